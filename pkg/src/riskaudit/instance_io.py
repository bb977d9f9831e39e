"""Instance files: strict JSON with a versioned schema.

Weights, probabilities and payments may be given as JSON numbers or as
decimal strings; strings are parsed with :mod:`decimal` and converted to
float once, and prior normalization is checked on the decimal values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

from .core import Instance
from .errors import InstanceError
from .mechanisms import SINGLE_ITEM, LotteryMenu, make_coverage_auction, make_lottery, make_second_price
from .valuations import VALUE_TOL, CoverageValuation, SingleItemValuation
from .welfare import OptimizerParams

SCHEMA_VERSION = 1
MECHANISM_KINDS = ("second_price", "lottery", "coverage_auction")


@dataclass
class InstanceFile:
    instance: Instance
    mechanism: dict
    grids: tuple | None = None
    battery: list | None = None
    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    description: str = ""

    def type_space(self):
        from .audit import TypeSpace

        if self.grids is not None:
            return TypeSpace(self.grids)
        return TypeSpace(tuple((v,) for v in self.instance.true_valuations))

    def build_mechanism(self):
        kind = self.mechanism["kind"]
        if kind == "second_price":
            return make_second_price(self.instance.n_players)
        if kind == "lottery":
            return make_lottery(self.mechanism["menu"])
        return make_coverage_auction(self.instance, self.optimizer)


def _fields(obj, where, required=(), optional=()):
    if not isinstance(obj, dict):
        raise InstanceError("schema-violation", "expected an object", where)
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise InstanceError("unknown-field", f"unexpected field(s) {sorted(unknown)}", where)
    for k in required:
        if k not in obj:
            raise InstanceError("schema-violation", f"missing field {k!r}", where)


def _decimal(raw, where) -> Decimal:
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        raise InstanceError("invalid-number", f"expected a number, got {raw!r}", where)
    try:
        d = Decimal(str(raw).strip())
    except InvalidOperation:
        raise InstanceError("invalid-number", f"not a decimal number: {raw!r}", where) from None
    if not d.is_finite():
        raise InstanceError("invalid-number", f"non-finite number {raw!r}", where)
    return d


def _number(raw, where, minimum=None) -> float:
    d = _decimal(raw, where)
    if minimum is not None and d < minimum:
        raise InstanceError("schema-violation", f"value {raw!r} must be >= {minimum}", where)
    return float(d)


def _probability(raw, where) -> Decimal:
    d = _decimal(raw, where)
    if not Decimal(0) <= d <= Decimal(1):
        raise InstanceError("invalid-probability", f"probability {raw!r} outside [0, 1]", where)
    return d


def _list(raw, where):
    if not isinstance(raw, list):
        raise InstanceError("schema-violation", "expected a list", where)
    return raw


def _valuation(raw, items, where):
    if isinstance(raw, (int, float, str)) and not isinstance(raw, bool):
        return SingleItemValuation(_number(raw, where, 0))
    if not isinstance(raw, dict) or "type" not in raw:
        raise InstanceError("schema-violation", "valuation needs a 'type'", where)
    kind = raw["type"]
    if kind == "single_item":
        _fields(raw, where, ("type", "value"))
        return SingleItemValuation(_number(raw["value"], f"{where}.value", 0))
    if kind != "coverage":
        raise InstanceError("schema-violation", f"unknown valuation type {kind!r}", where)
    _fields(raw, where, ("type", "universe"), ("item_sets",))
    weights = {}
    for k, el in enumerate(_list(raw["universe"], f"{where}.universe")):
        ew = f"{where}.universe[{k}]"
        if isinstance(el, str):
            eid, w = el, 1.0
        else:
            _fields(el, ew, ("id",), ("weight",))
            eid = el["id"]
            w = _number(el.get("weight", 1), f"{ew}.weight", 0)
        if not isinstance(eid, str):
            raise InstanceError("schema-violation", "element id must be a string", ew)
        if eid in weights:
            raise InstanceError("schema-violation", f"duplicate element {eid!r}", ew)
        weights[eid] = w
    sets = raw.get("item_sets", {})
    if not isinstance(sets, dict):
        raise InstanceError("schema-violation", "item_sets must be an object", f"{where}.item_sets")
    for it, elems in sets.items():
        wi = f"{where}.item_sets.{it}"
        if it not in items:
            raise InstanceError("dangling-item", f"unknown item {it!r}", wi)
        for e in _list(elems, wi):
            if e not in weights:
                raise InstanceError("dangling-element", f"element {e!r} not in universe", wi)
    return CoverageValuation.from_sets(sets, weights, items)


def _menu(raw, where):
    tiers = []
    for k, t in enumerate(_list(raw, where)):
        wt = f"{where}[{k}]"
        _fields(t, wt, ("from", "prob", "payment"))
        tiers.append((_number(t["from"], f"{wt}.from", 0),
                      float(_probability(t["prob"], f"{wt}.prob")),
                      _number(t["payment"], f"{wt}.payment")))
    try:
        return LotteryMenu.from_tiers(tiers)
    except ValueError as exc:
        raise InstanceError("schema-violation", str(exc), where) from None


def load_instance_dict(doc) -> InstanceFile:
    _fields(doc, "$", ("schema_version", "mechanism", "players"),
            ("description", "items", "prior", "battery", "optimizer"))
    if doc["schema_version"] != SCHEMA_VERSION:
        raise InstanceError("unsupported-version",
                            f"schema_version {doc['schema_version']!r} != {SCHEMA_VERSION}",
                            "$.schema_version")
    mech = doc["mechanism"]
    _fields(mech, "$.mechanism", ("kind",), ("menu",))
    kind = mech["kind"]
    if kind not in MECHANISM_KINDS:
        raise InstanceError("schema-violation", f"unknown mechanism {kind!r}", "$.mechanism.kind")
    mech_spec = {"kind": kind}
    if kind == "lottery":
        if "menu" not in mech:
            raise InstanceError("schema-violation", "lottery needs a menu", "$.mechanism")
        mech_spec["menu"] = _menu(mech["menu"], "$.mechanism.menu")
    elif "menu" in mech:
        raise InstanceError("unknown-field", "menu only applies to lotteries", "$.mechanism")

    items = doc.get("items", [SINGLE_ITEM])
    for k, it in enumerate(_list(items, "$.items")):
        if not isinstance(it, str):
            raise InstanceError("schema-violation", "item ids must be strings", f"$.items[{k}]")
    if len(set(items)) != len(items):
        raise InstanceError("schema-violation", "duplicate item ids", "$.items")
    items = tuple(items)

    players = _list(doc["players"], "$.players")
    truths, grids = [], []
    for i, p in enumerate(players):
        wp = f"$.players[{i}]"
        _fields(p, wp, ("valuation",), ("grid",))
        truths.append(_valuation(p["valuation"], items, f"{wp}.valuation"))
        if "grid" in p:
            g = tuple(_valuation(v, items, f"{wp}.grid[{k}]")
                      for k, v in enumerate(_list(p["grid"], f"{wp}.grid")))
            if not g:
                raise InstanceError("schema-violation", "grid must be nonempty", f"{wp}.grid")
            grids.append(g)
    if grids and len(grids) != len(players):
        raise InstanceError("schema-violation", "give a grid for every player or none", "$.players")

    prior = None
    if "prior" in doc:
        raw_prior = _list(doc["prior"], "$.prior")
        if len(raw_prior) != len(players):
            raise InstanceError("schema-violation", "prior needs one distribution per player",
                                "$.prior")
        prior = []
        for i, dist in enumerate(raw_prior):
            wd = f"$.prior[{i}]"
            total, entries = Decimal(0), []
            for k, e in enumerate(_list(dist, wd)):
                _fields(e, f"{wd}[{k}]", ("valuation", "prob"))
                q = _probability(e["prob"], f"{wd}[{k}].prob")
                total += q
                entries.append((_valuation(e["valuation"], items, f"{wd}[{k}].valuation"),
                                float(q)))
            if not entries or abs(total - 1) > Decimal(str(VALUE_TOL)):
                raise InstanceError("prior-not-normalized",
                                    f"probabilities sum to {total}, not 1", wd)
            prior.append(tuple(entries))
        prior = tuple(prior)

    battery = None
    if "battery" in doc:
        battery = [str(s) for s in _list(doc["battery"], "$.battery")]
        from .utility import parse_battery

        try:
            parse_battery(battery)
        except ValueError as exc:
            raise InstanceError("schema-violation", str(exc), "$.battery") from None

    opt = OptimizerParams()
    if "optimizer" in doc:
        o = doc["optimizer"]
        _fields(o, "$.optimizer", (), ("tol", "max_iter"))
        opt = OptimizerParams(
            tol=_number(o.get("tol", opt.tol), "$.optimizer.tol", 0),
            max_iter=int(_number(o.get("max_iter", opt.max_iter), "$.optimizer.max_iter", 1)))

    try:
        instance = Instance(len(players), items, tuple(truths), prior)
        if kind in ("second_price", "lottery"):
            bad = [i for i, v in enumerate(truths) if not isinstance(v, SingleItemValuation)]
            if bad or items != (SINGLE_ITEM,):
                raise InstanceError("mechanism-mismatch",
                                    f"{kind} needs single-item valuations on item {SINGLE_ITEM!r}",
                                    "$.players")
            if kind == "lottery" and len(players) != 1:
                raise InstanceError("mechanism-mismatch", "lottery has exactly one player",
                                    "$.players")
        elif any(not isinstance(v, CoverageValuation) for v in truths):
            raise InstanceError("mechanism-mismatch", "coverage auction needs coverage valuations",
                                "$.players")
    except InstanceError:
        raise
    except ValueError as exc:
        raise InstanceError("schema-violation", str(exc), "$") from None
    return InstanceFile(instance, mech_spec, tuple(grids) if grids else None, battery, opt,
                        str(doc.get("description", "")))


def parse_instance(path) -> InstanceFile:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise InstanceError("file-not-found", f"no such file {str(path)!r}") from None
    except OSError as exc:
        raise InstanceError("io-error", str(exc), str(path)) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InstanceError("not-utf8", str(exc), f"byte {exc.start}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("malformed-json", exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return load_instance_dict(doc)


def _num(x: float) -> str:
    return repr(float(x))


def _val_json(v):
    if isinstance(v, SingleItemValuation):
        return {"type": "single_item", "value": _num(v.amount)}
    return {
        "type": "coverage",
        "universe": [{"id": e, "weight": _num(w)} for e, w in v.universe],
        "item_sets": {it: sorted(el) for it, el in v.item_sets},
    }


def serialize_instance(f: InstanceFile) -> dict:
    inst = f.instance
    mech = {"kind": f.mechanism["kind"]}
    if "menu" in f.mechanism:
        mech["menu"] = [{"from": _num(t), "prob": _num(q), "payment": _num(p)}
                        for t, q, p in f.mechanism["menu"].tiers]
    players = []
    for i, v in enumerate(inst.true_valuations):
        entry = {"valuation": _val_json(v)}
        if f.grids is not None:
            entry["grid"] = [_val_json(g) for g in f.grids[i]]
        players.append(entry)
    doc = {"schema_version": SCHEMA_VERSION, "mechanism": mech, "items": list(inst.items),
           "players": players,
           "optimizer": {"tol": _num(f.optimizer.tol), "max_iter": f.optimizer.max_iter}}
    if f.description:
        doc["description"] = f.description
    if inst.prior is not None:
        doc["prior"] = [[{"valuation": _val_json(v), "prob": _num(p)} for v, p in d]
                        for d in inst.prior]
    if f.battery is not None:
        doc["battery"] = list(f.battery)
    return doc


def fixture_path(name: str) -> Path:
    """Path of a shipped example instance, e.g. ``fixture_path("coverage_2x2")``."""
    return Path(str(resources.files("riskaudit") / "data" / f"{name}.json"))


def shipped_fixtures() -> list:
    return sorted(p.stem for p in (resources.files("riskaudit") / "data").iterdir()
                  if p.name.endswith(".json"))


def load_fixture(name: str) -> InstanceFile:
    return parse_instance(fixture_path(name))
