"""Valuation functions over bundles of items.

Two families are supported: weighted coverage valuations, where a bundle is
worth the total weight of the union of the element sets attached to its
items, and single-item valuations used by the second-price and lottery
mechanisms. Both are immutable and hashable so they can key caches.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import InputError

# Absolute tolerance for comparing monetary values throughout the toolkit.
VALUE_TOL = 1e-9


@dataclass(frozen=True)
class CoverageValuation:
    """Weighted coverage valuation.

    ``universe`` is a tuple of ``(element_id, weight)`` pairs and
    ``item_sets`` a tuple of ``(item_id, frozenset_of_element_ids)`` pairs,
    sorted by item id. Use :meth:`from_sets` to build one from plain dicts.
    """

    universe: tuple
    item_sets: tuple

    def __post_init__(self):
        ids = [e for e, _ in self.universe]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate element id in universe")
        for e, w in self.universe:
            if not w >= 0:
                raise InputError(f"element {e!r} has negative weight {w}")
        known = set(ids)
        for item, elems in self.item_sets:
            missing = set(elems) - known
            if missing:
                raise InputError(
                    f"item {item!r} references unknown elements {sorted(missing)}")

    @classmethod
    def from_sets(cls, item_sets: Mapping, weights: Mapping | None = None,
                  items: Iterable | None = None) -> "CoverageValuation":
        """Build from ``{item: iterable_of_elements}``.

        Elements not given a weight default to 1. If ``items`` is passed,
        items absent from ``item_sets`` get an empty set.
        """
        weights = dict(weights or {})
        sets = {str(k): frozenset(map(str, v)) for k, v in item_sets.items()}
        if items is not None:
            for it in items:
                sets.setdefault(str(it), frozenset())
        elems = set(weights) | set().union(*sets.values()) if sets else set(weights)
        universe = tuple(sorted((str(e), float(weights.get(e, 1.0))) for e in elems))
        return cls(universe, tuple(sorted(sets.items())))

    @classmethod
    def zero(cls, items: Iterable = ()) -> "CoverageValuation":
        return cls((), tuple(sorted((str(i), frozenset()) for i in items)))

    def canonical(self) -> tuple:
        """Process-independent key (frozenset order varies with hash seed)."""
        return ("coverage", self.universe,
                tuple((it, tuple(sorted(el))) for it, el in self.item_sets))

    def to_json(self) -> dict:
        return {
            "type": "coverage",
            "universe": [{"id": e, "weight": w} for e, w in self.universe],
            "item_sets": {it: sorted(el) for it, el in self.item_sets},
        }

    @cached_property
    def _weights(self):
        return dict(self.universe)

    @cached_property
    def _sets(self):
        return dict(self.item_sets)

    @property
    def items(self) -> tuple:
        return tuple(i for i, _ in self.item_sets)

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, w in self.universe))

    def value(self, bundle: Iterable) -> float:
        covered = set()
        for item in bundle:
            try:
                covered |= self._sets[item]
            except KeyError:
                raise InputError(f"unknown item {item!r}") from None
        w = self._weights
        return float(sum(w[e] for e in sorted(covered)))

    def expected_value_product(self, probs: Mapping) -> float:
        """Expected value when each item is included independently.

        ``probs`` maps item id to inclusion probability; items not present
        are never included.
        """
        for item, q in probs.items():
            if item not in self._sets:
                raise InputError(f"unknown item {item!r}")
            if not 0.0 <= q <= 1.0:
                raise InputError(f"probability {q} for item {item!r} outside [0, 1]")
        miss = {e: 1.0 for e, _ in self.universe}
        for item, elems in self.item_sets:
            q = probs.get(item, 0.0)
            for e in elems:
                miss[e] *= 1.0 - q
        return float(sum(w * (1.0 - miss[e]) for e, w in self.universe))

    def element_matrix(self, items) -> tuple[np.ndarray, np.ndarray]:
        """Weights (E,) and 0/1 membership (E, m) over the given item order."""
        col = {it: j for j, it in enumerate(items)}
        for it in self._sets:
            if it not in col:
                raise InputError(f"valuation mentions item {it!r} not in instance")
        weights = np.array([w for _, w in self.universe], dtype=float)
        mask = np.zeros((len(self.universe), len(items)), dtype=np.uint8)
        row = {e: k for k, (e, _) in enumerate(self.universe)}
        for it, elems in self.item_sets:
            for e in elems:
                mask[row[e], col[it]] = 1
        return weights, mask


@dataclass(frozen=True)
class SingleItemValuation:
    """Value for receiving the single item on offer."""

    amount: float

    def __post_init__(self):
        object.__setattr__(self, "amount", float(self.amount))
        if not self.amount >= 0:
            raise InputError(f"single-item value must be >= 0, got {self.amount}")

    @property
    def total_weight(self) -> float:
        return float(self.amount)

    def canonical(self) -> tuple:
        return ("single_item", float(self.amount))

    def to_json(self) -> dict:
        return {"type": "single_item", "value": float(self.amount)}

    def value(self, bundle: Iterable) -> float:
        return float(self.amount) if len(tuple(bundle)) else 0.0

    def expected_value_product(self, probs: Mapping) -> float:
        q = sum(probs.values())
        if not 0.0 <= q <= 1.0:
            raise InputError(f"allocation probability {q} outside [0, 1]")
        return float(self.amount) * q


def value(v, bundle) -> float:
    """Value of ``bundle`` under valuation ``v``."""
    return v.value(bundle)


def expected_value_product(v, probs: Mapping) -> float:
    """Closed-form expectation of ``value(v, S)`` under a product distribution."""
    return v.expected_value_product(probs)

