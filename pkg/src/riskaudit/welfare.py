"""Expected-welfare maximization over the fractional allocation polytope.

A fractional allocation ``x`` is an (n_players, n_items) nonnegative matrix
whose columns sum to at most one. It induces a lottery over feasible
allocations: item j goes to player i with probability ``1 - exp(-x[i, j])``
and stays unallocated with the leftover probability, which is nonnegative
because ``1 - exp(-t) <= t``. Each item is a single categorical draw, so
bundles are disjoint; items are drawn independently of each other.

With these marginals a coverage player's expected value is
``sum_e w_e * (1 - exp(-sum_{j in e} x[i, j]))``, concave in ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceError, InputError

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class OptimizerParams:
    tol: float = 1e-7
    max_iter: int = 100_000


class CoverageProblem:
    """Coverage reports flattened into kernel arrays."""

    def __init__(self, reports, items):
        self.items = tuple(items)
        self.n_players = len(reports)
        players, weights, masks = [], [], []
        for i, v in enumerate(reports):
            if not hasattr(v, "element_matrix"):
                raise InputError(f"player {i}: coverage valuation required")
            w, mask = v.element_matrix(self.items)
            players.append(np.full(len(w), i, dtype=np.int_))
            weights.append(w)
            masks.append(mask)
        m = len(self.items)
        self.eplayer = np.concatenate(players) if players else np.zeros(0, np.int_)
        self.eweight = np.concatenate(weights) if weights else np.zeros(0)
        self.emask = (np.vstack(masks) if masks else np.zeros((0, m))).astype(np.uint8)
        self.emask = self.emask.reshape(len(self.eweight), m)

    @property
    def shape(self):
        return (self.n_players, len(self.items))

    def lipschitz_bound(self) -> float:
        # Hessian is block diagonal per player; block norm <= sum_e w_e * |e|
        if not self.eweight.size:
            return 0.0
        per_player = np.bincount(self.eplayer, self.eweight * self.emask.sum(axis=1),
                                 minlength=self.n_players)
        return float(per_player.max())

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise InputError(f"allocation shape {x.shape} != {self.shape}")
        if x.size and (x.min() < -FEASIBILITY_TOL
                       or x.sum(axis=0).max() > 1.0 + FEASIBILITY_TOL):
            raise InputError("fractional allocation outside the polytope")
        return x


def _problem(reports, items):
    if isinstance(reports, CoverageProblem):
        return reports
    return CoverageProblem(reports, items)


def allocation_marginals(x) -> np.ndarray:
    """Per (player, item) probability of winning, ``1 - exp(-x)``."""
    return _kernels.marginals(np.asarray(x, dtype=float))


def expected_welfare(x, reports, items=None) -> float:
    prob = _problem(reports, items)
    return _kernels.welfare(prob.check(x), prob.eplayer, prob.eweight, prob.emask)


def welfare_gradient(x, reports, items=None) -> np.ndarray:
    prob = _problem(reports, items)
    return _kernels.welfare_and_grad(prob.check(x), prob.eplayer, prob.eweight,
                                     prob.emask)[1]


def project_to_polytope(x_raw) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum_i x[i, j] <= 1 for all j}``."""
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.ndim != 2:
        raise InputError("expected a 2-d array")
    return _kernels.project_columns(x_raw)


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    objective: float
    iterations: int
    residual: float


def maximize_expected_welfare(reports, items=None, params: OptimizerParams | None = None,
                              *, full_output=False):
    """Projected gradient ascent from ``x = 0``.

    Raises :class:`ConvergenceError` if the gradient-mapping norm is still
    above ``params.tol`` after ``params.max_iter`` iterations.
    """
    params = params or OptimizerParams()
    prob = _problem(reports, items)
    x0 = np.zeros(prob.shape)
    lip = prob.lipschitz_bound()
    if lip == 0.0 or x0.size == 0:
        res = OptimizeResult(x0, 0.0, 0, 0.0)
    else:
        x, obj, iters, resid, ok = _kernels.ascend(
            x0, prob.eplayer, prob.eweight, prob.emask, 1.0 / lip, params.tol,
            params.max_iter)
        if not ok:
            raise ConvergenceError(
                f"welfare optimizer did not converge in {iters} iterations "
                f"(residual {resid:.3e} > tol {params.tol:.1e})",
                residual=resid, iterations=iters)
        res = OptimizeResult(x, obj, iters, resid)
    return res if full_output else res.x
