"""Protocol definitions, validation, and structural properties.

Two kinds of pairwise protocol are supported:

* ``lv``: a k x k matrix ``P``; when an agent of species ``i`` initiates an
  interaction with one of species ``j`` the responder becomes ``i`` with
  probability ``P[i][j]``.
* ``general``: a table of rules ``(initiator, responder) -> result`` with
  probabilities.  The initiator never changes; mass not covered by a rule
  leaves the responder unchanged.

Labels are only used at the edges (files, printing).  ``validate`` maps them
to indices ``0..k-1`` and precomputes the arrays the engine consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import errors
from .errors import InvalidProtocol, NotLvKind, UnknownBuiltin
from .states import AggregateState, GraphState, StarState

KINDS = ("lv", "general")
_PROB_SUM_SLACK = 1e-12


@dataclass(frozen=True)
class Rule:
    initiator: str
    responder: str
    result: str
    prob: float


@dataclass(frozen=True)
class ProtocolSpec:
    k: int
    names: tuple[str, ...]
    kind: str
    matrix: tuple[tuple[float, ...], ...] | None = None
    rules: tuple[Rule, ...] | None = None
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(x) for x in self.names))
        if self.matrix is not None:
            object.__setattr__(self, "matrix",
                               tuple(tuple(float(v) for v in row) for row in self.matrix))
        if self.rules is not None:
            object.__setattr__(self, "rules", tuple(
                r if isinstance(r, Rule) else Rule(*r) for r in self.rules))


@dataclass(frozen=True)
class Digraph:
    """Arc ``(i, j)`` means species ``i`` can convert species ``j``."""

    k: int
    arcs: frozenset

    def weak_components(self) -> list[frozenset]:
        parent = list(range(self.k))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in self.arcs:
            parent[find(i)] = find(j)
        groups: dict[int, set] = {}
        for v in range(self.k):
            groups.setdefault(find(v), set()).add(v)
        return sorted((frozenset(g) for g in groups.values()), key=min)

    def in_degree(self, j: int) -> int:
        return sum(1 for (_, b) in self.arcs if b == j)


@dataclass(frozen=True, eq=False)
class ValidatedProtocol:
    """An immutable, index-based view of a valid protocol.

    ``transitions[i, j, r]`` is the probability that responder ``j`` becomes
    ``r`` when initiated by ``i``; ``change[i, j]`` is its total over
    ``r != j``.  ``channels`` lists the positive entries as parallel arrays
    ``(initiator, responder, result, prob)``.
    """

    spec: ProtocolSpec
    index: dict
    transitions: np.ndarray
    change: np.ndarray
    channels: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    digraph: Digraph
    pmin: float
    P: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def names(self) -> tuple[str, ...]:
        return self.spec.names

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def label(self) -> str | None:
        return self.spec.label

    def species_index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.k:
                raise IndexError(f"species index {name_or_index} out of range")
            return int(name_or_index)
        return self.index[str(name_or_index)]

    def __repr__(self) -> str:
        return f"ValidatedProtocol({self.label or self.kind}, k={self.k}, names={self.names})"


# --------------------------------------------------------------------------
# validation


def validate(spec: ProtocolSpec | ValidatedProtocol) -> ValidatedProtocol:
    """Check ``spec`` and derive the engine representation.

    Raises the ``InvalidProtocol`` subclass matching the first violation;
    the exception's ``violations`` attribute lists all of them.
    """
    if isinstance(spec, ValidatedProtocol):
        return spec

    violations: list[tuple[str, str]] = []

    def bad(cls, msg):
        violations.append((cls.__name__, msg))

    k = spec.k
    if spec.kind not in KINDS:
        bad(errors.MalformedProtocol, f"kind must be one of {KINDS}, got {spec.kind!r}")
    if not isinstance(k, (int, np.integer)) or k < 2:
        bad(errors.MalformedProtocol, f"k must be an integer >= 2, got {k!r}")
    elif len(spec.names) != k:
        bad(errors.MalformedProtocol, f"expected {k} names, got {len(spec.names)}")
    elif len(set(spec.names)) != k:
        bad(errors.MalformedProtocol, "species names must be unique")
    if violations:
        _raise(violations)

    index = {name: i for i, name in enumerate(spec.names)}
    T = np.zeros((k, k, k))
    P = None

    if spec.kind == "lv":
        if spec.matrix is None:
            _raise([("MalformedProtocol", "lv protocol needs a matrix")])
        try:
            P = np.array(spec.matrix, dtype=float)
        except ValueError:
            _raise([("MalformedProtocol", "matrix rows have unequal lengths")])
        if P.shape != (k, k):
            _raise([("MalformedProtocol", f"matrix must be {k}x{k}, got shape {P.shape}")])
        for i in range(k):
            if P[i, i] != 0:
                bad(errors.NonZeroDiagonal, f"P[{i}][{i}] = {P[i, i]} (diagonal must be zero)")
        for i, j in zip(*np.nonzero(~((P >= 0) & (P <= 1)))):
            bad(errors.ProbabilityOutOfRange, f"P[{i}][{j}] = {P[i, j]} not in [0, 1]")
        for i in range(k):
            for j in range(k):
                if i != j:
                    T[i, j, i] = P[i, j]
    else:
        if not spec.rules:
            _raise([("MalformedProtocol", "general protocol needs a non-empty rule list")])
        seen = set()
        for r in spec.rules:
            missing = [x for x in (r.initiator, r.responder, r.result) if x not in index]
            if missing:
                bad(errors.MalformedProtocol, f"rule {r} uses unknown species {missing}")
                continue
            key = (r.initiator, r.responder, r.result)
            if key in seen:
                bad(errors.DuplicateRule, f"duplicate rule {key}")
                continue
            seen.add(key)
            p = float(r.prob)
            if not 0 <= p <= 1:
                bad(errors.ProbabilityOutOfRange, f"rule {key} has probability {p}")
                continue
            i, j, res = index[r.initiator], index[r.responder], index[r.result]
            T[i, j, res] += p
        sums = T.sum(axis=2)
        for i, j in zip(*np.nonzero(sums > 1 + _PROB_SUM_SLACK)):
            bad(errors.ProbabilityOutOfRange,
                f"rules for ({spec.names[i]}, {spec.names[j]}) sum to {sums[i, j]} > 1")

    # a rule whose result equals the responder is an explicit no-op
    for j in range(k):
        T[:, j, j] = 0.0
    change = T.sum(axis=2)

    arcs = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(change > 0)))
    digraph = Digraph(k, arcs)
    touched = {i for arc in arcs for i in arc}
    for v in range(k):
        if v not in touched:
            bad(errors.IsolatedType, f"species {spec.names[v]!r} never interacts")

    if violations:
        _raise(violations)

    ini, res_, out, prob = [], [], [], []
    for i in range(k):
        for j in range(k):
            for r in range(k):
                if T[i, j, r] > 0:
                    ini.append(i)
                    res_.append(j)
                    out.append(r)
                    prob.append(T[i, j, r])
    channels = (np.array(ini, dtype=np.int64), np.array(res_, dtype=np.int64),
                np.array(out, dtype=np.int64), np.array(prob, dtype=float))

    if P is not None:
        positive = P[P > 0]
    else:
        positive = T[T > 0]
    pmin = float(positive.min())

    for arr in (T, change, P, *channels):
        if arr is not None:
            arr.setflags(write=False)
    return ValidatedProtocol(spec=spec, index=index, transitions=T, change=change,
                             channels=channels, digraph=digraph, pmin=pmin, P=P)


def _raise(violations):
    code, _ = violations[0]
    cls = getattr(errors, code)
    msg = "; ".join(f"{c}: {m}" for c, m in violations)
    raise cls(msg, violations)


def is_irreducible(vp: ValidatedProtocol) -> tuple[bool, str]:
    """Every species has a predator and the digraph is weakly connected."""
    vp = validate(vp)
    if vp.kind != "lv":
        raise NotLvKind("irreducibility is defined for LV-type protocols only")
    P = vp.P
    for j in range(vp.k):
        if not np.any(P[:, j] > 0):
            return False, f"column {j} ({vp.names[j]!r}) is all zero: species has no predator"
    comps = vp.digraph.weak_components()
    if len(comps) > 1:
        desc = " | ".join("{" + ",".join(vp.names[i] for i in sorted(c)) + "}" for c in comps)
        return False, f"digraph has {len(comps)} weak components: {desc}"
    return True, "every column non-zero and digraph weakly connected"


def as_general(spec: ProtocolSpec | ValidatedProtocol) -> ProtocolSpec:
    """Rule-table form of an LV protocol (``ij -> ii`` with probability P_ij)."""
    if isinstance(spec, ValidatedProtocol):
        spec = spec.spec
    if spec.kind == "general":
        return spec
    rules = []
    for i, row in enumerate(spec.matrix):
        for j, p in enumerate(row):
            if p > 0:
                rules.append(Rule(spec.names[i], spec.names[j], spec.names[i], p))
    return ProtocolSpec(spec.k, spec.names, "general", rules=tuple(rules), label=spec.label)


# --------------------------------------------------------------------------
# builtins


def _rps() -> ProtocolSpec:
    m = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    return ProtocolSpec(3, ("1", "2", "3"), "lv", matrix=m, label="rps")


def _ws() -> ProtocolSpec:
    m = [[0, 1, 1, 0.5],
         [1, 0, 0.5, 1],
         [0, 0, 0, 0],
         [0, 0, 0, 0]]
    return ProtocolSpec(4, ("X", "Y", "x", "y"), "lv", matrix=m, label="ws")


def _life_death(p12: float = 1.0, p21: float = 1.0) -> ProtocolSpec:
    return ProtocolSpec(2, ("1", "2"), "lv", matrix=[[0, p12], [p21, 0]], label="life_death")


def _counterexample() -> ProtocolSpec:
    rules = (
        Rule("a", "b", "c", 1.0),
        Rule("a", "c", "a", 1.0),
        Rule("c", "a", "b", 1.0),
        Rule("b", "a", "b", 1.0),
        Rule("b", "b", "a", 1.0),
    )
    return ProtocolSpec(3, ("a", "b", "c"), "general", rules=rules, label="counterexample")


BUILTINS = {
    "rps": _rps,
    "ws": _ws,
    "life_death": _life_death,
    "counterexample": _counterexample,
}


def builtin(name: str, **params) -> ProtocolSpec:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownBuiltin(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


# --------------------------------------------------------------------------
# absorbing states


def is_absorbing(state, vp: ValidatedProtocol) -> bool:
    """No interaction available to the scheduler can change the state.

    On K_n two agents interact only if they are distinct, so a same-species
    rule needs at least two agents of that species.
    """
    vp = validate(vp)
    change = vp.change
    if isinstance(state, AggregateState):
        c = state.counts
        if len(c) != vp.k:
            raise ValueError(f"state has {len(c)} species, protocol has {vp.k}")
        for i, j in vp.digraph.arcs:
            if c[i] > 0 and c[j] - (i == j) > 0:
                return False
        return True
    if isinstance(state, StarState):
        if state.k != vp.k:
            raise ValueError(f"state has {state.k} species, protocol has {vp.k}")
        h = state.center
        for j, cnt in enumerate(state.leaf_counts):
            if cnt > 0 and (change[h, j] > 0 or change[j, h] > 0):
                return False
        return True
    if isinstance(state, GraphState):
        s = state.species
        e = state.graph.edges
        a, b = s[e[:, 0]], s[e[:, 1]]
        return not bool(np.any(change[a, b] > 0) or np.any(change[b, a] > 0))
    raise TypeError(f"unsupported state type {type(state).__name__}")


# --------------------------------------------------------------------------
# JSON files


def protocol_from_dict(d: dict) -> ProtocolSpec:
    if not isinstance(d, dict):
        raise errors.MalformedProtocol("protocol JSON must be an object")
    allowed = {"k", "names", "kind", "matrix", "rules", "name"}
    unknown = set(d) - allowed
    if unknown:
        raise errors.MalformedProtocol(f"unknown keys {sorted(unknown)}")
    try:
        k = d["k"]
        kind = d["kind"]
    except KeyError as exc:
        raise errors.MalformedProtocol(f"missing key {exc}") from None
    names = d.get("names") or [str(i + 1) for i in range(k)]
    if kind == "general":
        try:
            rules = tuple(Rule(str(r["initiator"]), str(r["responder"]), str(r["result"]),
                               float(r["prob"])) for r in d.get("rules") or [])
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.MalformedProtocol(f"bad rule entry: {exc}") from None
        return ProtocolSpec(k, names, kind, rules=rules, label=d.get("name"))
    return ProtocolSpec(k, names, kind, matrix=d.get("matrix"), label=d.get("name"))


def protocol_to_dict(spec: ProtocolSpec | ValidatedProtocol) -> dict:
    if isinstance(spec, ValidatedProtocol):
        spec = spec.spec
    d: dict = {"k": spec.k, "names": list(spec.names), "kind": spec.kind}
    if spec.kind == "lv":
        d["matrix"] = [list(row) for row in spec.matrix]
    else:
        d["rules"] = [{"initiator": r.initiator, "responder": r.responder,
                       "result": r.result, "prob": r.prob} for r in spec.rules]
    if spec.label:
        d["name"] = spec.label
    return d


def load_protocol(path: str | Path) -> ValidatedProtocol:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise errors.MalformedProtocol(f"{path}: invalid JSON ({exc})") from None
    return validate(protocol_from_dict(d))


def resolve_protocol(ref) -> ValidatedProtocol:
    """Accept a spec, a builtin name, or a path to a protocol file."""
    if isinstance(ref, (ProtocolSpec, ValidatedProtocol)):
        return validate(ref)
    if isinstance(ref, dict):
        return validate(protocol_from_dict(ref))
    ref = str(ref)
    if ref in BUILTINS:
        return validate(builtin(ref))
    if ref.startswith("builtin:"):
        return validate(builtin(ref.split(":", 1)[1]))
    return load_protocol(ref)


def format_matrix(vp: ValidatedProtocol) -> str:
    """Human-readable matrix (LV) or rule table (general)."""
    vp = validate(vp)
    lines = []
    if vp.kind == "lv":
        w = max(len(n) for n in vp.names)
        width = max(w, 4)
        lines.append(" " * (w + 1) + " ".join(f"{n:>{width}}" for n in vp.names))
        for i, n in enumerate(vp.names):
            lines.append(f"{n:>{w}} " + " ".join(f"{v:>{width}g}" for v in vp.P[i]))
    else:
        for r in vp.spec.rules:
            lines.append(f"{r.initiator}{r.responder} -> {r.initiator}{r.result}  p={r.prob:g}")
    return "\n".join(lines)


def names_to_indices(vp: ValidatedProtocol, items: Iterable) -> list[int]:
    return [vp.species_index(x) for x in items]
