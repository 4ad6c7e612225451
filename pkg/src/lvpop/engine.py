"""Discrete stochastic dynamics.

Three state representations share one protocol encoding:

* ``AggregateState`` on K_n, simulated with event skipping: the number of
  no-op scheduler steps before the next state change is geometric, so only
  changing events are executed while the raw step counter stays exact.
* ``GraphState`` on an arbitrary connected graph, one raw step at a time.
* ``StarState`` for RPS on K_{1,n}, O(1) per event.

Pairing modes on K_n: ``exact`` draws an ordered pair of distinct agents
uniformly; ``paper`` draws both agents independently and uniformly, so a step
pairs species i, j with probability n_i n_j / n^2 and an agent drawn twice is
a no-op.  With P_ii = 0 the two modes differ only in no-op mass: hitting
distributions agree and step counts scale by roughly n / (n - 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import AbsorbingState, EmptyPopulation, NotRps
from .protocol import ValidatedProtocol, is_absorbing, validate
from .rng import make_rng
from .states import AggregateState, GraphState, StarState

PAIRING_MODES = ("exact", "paper")
STAR_MODES = ("paper", "exact")
DEFAULT_MAX_STEPS = 10**10

_RPS_P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)


def _is_exact(pairing_mode: str) -> bool:
    if pairing_mode not in PAIRING_MODES:
        raise ValueError(f"pairing_mode must be one of {PAIRING_MODES}, got {pairing_mode!r}")
    return pairing_mode == "exact"


def _check_k(state, vp: ValidatedProtocol):
    if state.k != vp.k:
        raise ValueError(f"state has {state.k} species, protocol has {vp.k}")


def _counts_array(state: AggregateState) -> np.ndarray:
    if state.n == 0:
        raise EmptyPopulation("population is empty")
    return np.array(state.counts, dtype=np.int64)


def is_rps(vp: ValidatedProtocol) -> bool:
    return vp.kind == "lv" and vp.k == 3 and np.array_equal(vp.P, _RPS_P)


def _require_rps(vp: ValidatedProtocol):
    if not is_rps(vp):
        raise NotRps("star dynamics are implemented for the RPS matrix only")


# --------------------------------------------------------------------------
# single steps


def step_aggregate(state: AggregateState, spec, rng, pairing_mode: str = "exact") -> AggregateState:
    """One raw scheduler step on K_n."""
    vp = validate(spec)
    _check_k(state, vp)
    counts = _counts_array(state)
    K.raw_steps_aggregate(counts, vp.transitions, _is_exact(pairing_mode), make_rng(rng), 1)
    return AggregateState(tuple(counts), state.step + 1)


def step_effective(state: AggregateState, spec, rng,
                   pairing_mode: str = "exact") -> tuple[AggregateState, int]:
    """Advance to the next state change; returns the new state and the no-op run length."""
    vp = validate(spec)
    _check_k(state, vp)
    counts = _counts_array(state)
    ini, res, out, prob = vp.channels
    skipped, ch = K.effective_event(counts, ini, res, out, prob,
                                    _is_exact(pairing_mode), make_rng(rng))
    if ch < 0:
        raise AbsorbingState("no interaction can change this state")
    return AggregateState(tuple(counts), state.step + skipped + 1), int(skipped)


def step_graph(state: GraphState, spec, rng) -> GraphState:
    """One raw step: uniform edge, uniform orientation, rule applied to the responder."""
    vp = validate(spec)
    _check_k(state, vp)
    g = state.graph
    species = state.species.copy()
    counts = np.array(state.counts, dtype=np.int64)
    active = K.count_active(species, g.edges, vp.change)
    if active == 0:
        return GraphState(g, species, state.k, state.step + 1)
    K.advance_graph(species, counts, g.edges, g.indptr, g.indices, vp.change,
                    vp.transitions, make_rng(rng), state.step, state.step + 1, active)
    return GraphState(g, species, state.k, state.step + 1)


def step_star(state: StarState, spec, rng, pairing_mode: str = "paper") -> StarState:
    """One raw step of RPS on K_{1,n}.

    ``paper`` mode: with hub species c the hub keeps everything with
    probability n_c/n, converts a prey leaf with probability n_prey/n, and is
    converted with probability n_pred/n.  ``exact`` mode adds the orientation
    coin of the generic graph scheduler, halving both changing moves.
    """
    vp = validate(spec)
    _require_rps(vp)
    if pairing_mode not in STAR_MODES:
        raise ValueError(f"pairing_mode must be one of {STAR_MODES}")
    if state.n == 0:
        raise EmptyPopulation("star has no leaves")
    lc = np.array(state.leaf_counts, dtype=np.int64)
    center = K.raw_steps_star(lc, state.center, pairing_mode == "exact", make_rng(rng), 1)
    return StarState(int(center), tuple(lc), state.step + 1)


# --------------------------------------------------------------------------
# recording


class Recorder:
    """Samples ``(step, counts, U)`` every ``stride`` raw steps.

    When ``b`` is given the potential sum_i b_i ln(n_i / n) is recorded
    (``-inf`` once a weighted species has died out).  For LV protocols the
    recorder also asserts that an eliminated species never comes back.
    """

    def __init__(self, stride: int, b=None, *, check_elimination: bool = True):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = int(stride)
        self.b = None if b is None else np.asarray(getattr(b, "b", b), dtype=float)
        self.check_elimination = check_elimination
        self.rows: list[tuple] = []
        self.star = False
        self._dead: set[int] = set()
        self._lv = True

    def bind(self, vp: ValidatedProtocol, star: bool = False):
        self._lv = vp.kind == "lv"
        self.star = star
        self.names = vp.names
        return self

    def potential(self, counts) -> float:
        if self.b is None:
            return float("nan")
        c = np.asarray(counts, dtype=float)
        x = c / c.sum()
        mask = self.b != 0
        if np.any(x[mask] == 0):
            return float("-inf")
        return float(np.sum(self.b[mask] * np.log(x[mask])))

    def record(self, step: int, counts, center: int | None = None):
        counts = tuple(int(c) for c in counts)
        if self.check_elimination and self._lv:
            total = list(counts)
            if center is not None:
                # a leaf species can return through the hub
                total[center] += 1
            for i in self._dead:
                if total[i] != 0:
                    raise AssertionError(f"species {i} reappeared at step {step}")
            self._dead.update(i for i, c in enumerate(total) if c == 0)
        prod = None
        if center is not None:
            prod = counts[0] * counts[1] * counts[2]
        self.rows.append((int(step), counts, self.potential(counts), center, prod))

    def header(self) -> list[str]:
        names = list(getattr(self, "names", [f"s{i}" for i in range(len(self.rows[0][1]))]))
        cols = ["step"]
        if self.star:
            cols.append("center")
        cols += [f"n_{name}" for name in names] + ["U_b"]
        if self.star:
            cols.append("product_potential")
        return cols

    def to_rows(self) -> list[list]:
        out = []
        for step, counts, U, center, prod in self.rows:
            row = [step]
            if self.star:
                row.append(center)
            row += list(counts) + [U]
            if self.star:
                row.append(prod)
            out.append(row)
        return out

    def write_csv(self, path_or_file):
        def write(fh):
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.to_rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)


# --------------------------------------------------------------------------
# full runs


@dataclass
class RunOutcome:
    terminal: str  # "absorbed" or "step_limit"
    state: object
    steps: int
    effective_events: int
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def absorbed(self) -> bool:
        return self.terminal == "absorbed"

    def alive(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.state.counts) if c > 0)


def _next_record(step: int, stride: int) -> int:
    return (step // stride + 1) * stride


def run_to_absorption(state, spec, rng, max_steps: int = DEFAULT_MAX_STEPS,
                      recorder: Recorder | None = None,
                      pairing_mode: str | None = None) -> RunOutcome:
    """Simulate until an absorbing state or until the step counter reaches ``max_steps``.

    ``max_steps`` bounds the absolute step counter of the state.  Reaching it
    yields a ``step_limit`` outcome, not an error.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    vp = validate(spec)
    _check_k(state, vp)
    gen = make_rng(rng)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    max_steps = int(max_steps)

    if isinstance(state, AggregateState):
        return _run_aggregate(state, vp, gen, max_steps, recorder, pairing_mode or "exact", seed)
    if isinstance(state, GraphState):
        return _run_graph(state, vp, gen, max_steps, recorder, seed)
    if isinstance(state, StarState):
        out = run_star(state, vp, gen, max_steps, recorder, pairing_mode or "paper")
        out.seed = seed
        return out
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _run_aggregate(state, vp, gen, max_steps, recorder, pairing_mode, seed):
    exact = _is_exact(pairing_mode)
    counts = _counts_array(state)
    ini, res, out, prob = vp.channels
    step = start = state.step
    events = 0
    absorbed = False
    pending = -1
    if recorder is not None:
        recorder.bind(vp).record(step, counts)
    while True:
        limit = max_steps
        if recorder is not None:
            limit = min(limit, _next_record(step, recorder.stride))
        step, ev, absorbed, pending = K.advance_aggregate(counts, ini, res, out, prob, exact,
                                                          gen, step, limit, pending)
        events += ev
        if absorbed or step >= max_steps:
            break
        recorder.record(step, counts)
    final = AggregateState(tuple(counts), step)
    if recorder is not None and recorder.rows[-1][0] != step:
        recorder.record(step, counts)
    return RunOutcome("absorbed" if absorbed else "step_limit", final,
                      step - start, events, seed)


def _run_graph(state, vp, gen, max_steps, recorder, seed):
    g = state.graph
    species = state.species.copy()
    counts = np.array(state.counts, dtype=np.int64)
    active = K.count_active(species, g.edges, vp.change)
    step = start = state.step
    events = 0
    if recorder is not None:
        recorder.bind(vp).record(step, counts)
    while True:
        limit = max_steps
        if recorder is not None:
            limit = min(limit, _next_record(step, recorder.stride))
        step, ev, absorbed, active = K.advance_graph(
            species, counts, g.edges, g.indptr, g.indices, vp.change, vp.transitions,
            gen, step, limit, active)
        events += ev
        if absorbed or step >= max_steps:
            break
        recorder.record(step, counts)
    if recorder is not None and recorder.rows[-1][0] != step:
        recorder.record(step, counts)
    final = GraphState(g, species, state.k, step)
    return RunOutcome("absorbed" if absorbed else "step_limit", final,
                      step - start, events, seed)


def run_star(state: StarState, spec, rng, max_steps: int = DEFAULT_MAX_STEPS,
             recorder: Recorder | None = None, pairing_mode: str = "paper",
             dip_threshold: float | None = None) -> RunOutcome:
    """Star run; with ``dip_threshold`` the product potential n1*n2*n3 is tracked.

    Tracking fills ``outcome.extra`` with ``min_product``, ``dips`` (downward
    crossings of the threshold), ``recoveries`` (dips after which the product
    later exceeded its value at the crossing) and ``returns`` (upward
    crossings of the threshold).
    """
    vp = validate(spec)
    _require_rps(vp)
    if pairing_mode not in STAR_MODES:
        raise ValueError(f"pairing_mode must be one of {STAR_MODES}")
    gen = make_rng(rng)
    oriented = pairing_mode == "exact"
    lc = np.array(state.leaf_counts, dtype=np.int64)
    if lc.sum() == 0:
        raise EmptyPopulation("star has no leaves")
    center = state.center
    step = start = state.step
    events = 0
    stats = np.zeros(K.N_STAR_STATS)
    prod0 = float(lc[0] * lc[1] * lc[2])
    stats[K.ST_MIN_PROD] = prod0
    stats[K.ST_PREV_PROD] = prod0
    thr = -1.0 if dip_threshold is None else float(dip_threshold)
    pending = -1
    if recorder is not None:
        recorder.bind(vp, star=True).record(step, lc, center)
    while True:
        limit = max_steps
        if recorder is not None:
            limit = min(limit, _next_record(step, recorder.stride))
        center, step, ev, absorbed, pending = K.advance_star(lc, center, oriented, gen, step,
                                                             limit, stats, thr, pending)
        events += ev
        if absorbed or step >= max_steps:
            break
        recorder.record(step, lc, center)
    if recorder is not None and recorder.rows[-1][0] != step:
        recorder.record(step, lc, center)
    final = StarState(int(center), tuple(lc), step)
    extra = {}
    if dip_threshold is not None:
        extra = {
            "min_product": int(stats[K.ST_MIN_PROD]),
            "dips": int(stats[K.ST_DIPS]),
            "recoveries": int(stats[K.ST_RECOVERED]),
            "returns": int(stats[K.ST_RETURNED]),
        }
    return RunOutcome("absorbed" if absorbed else "step_limit", final,
                      step - start, events, None, extra)


def simulate_fixed_steps(state: AggregateState, spec, rng, nsteps: int,
                         pairing_mode: str = "exact", *, skipping: bool = True) -> AggregateState:
    """State after exactly ``nsteps`` raw steps (event skipping or plain stepping)."""
    vp = validate(spec)
    _check_k(state, vp)
    counts = _counts_array(state)
    gen = make_rng(rng)
    exact = _is_exact(pairing_mode)
    if skipping:
        ini, res, out, prob = vp.channels
        K.advance_aggregate(counts, ini, res, out, prob, exact, gen, 0, nsteps, -1)
    else:
        K.raw_steps_aggregate(counts, vp.transitions, exact, gen, nsteps)
    return AggregateState(tuple(counts), state.step + nsteps)


def sample_transitions(state: AggregateState, spec, rng, size: int,
                       pairing_mode: str = "exact") -> tuple[np.ndarray, np.ndarray]:
    """``size`` independent single raw steps from ``state``.

    Returns ``(lost, gained)`` species index arrays, ``-1`` where the step was
    a no-op.
    """
    vp = validate(spec)
    _check_k(state, vp)
    counts = _counts_array(state)
    return K.sample_transitions(counts, vp.transitions, _is_exact(pairing_mode),
                                make_rng(rng), int(size))


def fixed_steps_batch(state, spec, rng, nsteps: int, runs: int,
                      pairing_mode: str = "exact", *, skipping: bool = True) -> np.ndarray:
    """``(runs, k)`` final counts of independent ``nsteps``-step runs from ``state``."""
    vp = validate(spec)
    _check_k(state, vp)
    counts = _counts_array(state)
    ini, res, out, prob = vp.channels
    return K.batch_fixed_steps(counts, ini, res, out, prob, vp.transitions,
                               _is_exact(pairing_mode), make_rng(rng), int(nsteps), int(runs),
                               skipping)


def star_steps_batch(state: StarState, spec, rng, nsteps: int, runs: int,
                     pairing_mode: str = "paper") -> np.ndarray:
    """``(runs, 4)`` rows ``(center, n1, n2, n3)`` after ``nsteps`` star steps."""
    vp = validate(spec)
    _require_rps(vp)
    if pairing_mode not in STAR_MODES:
        raise ValueError(f"pairing_mode must be one of {STAR_MODES}")
    lc = np.array(state.leaf_counts, dtype=np.int64)
    return K.batch_star(lc, state.center, pairing_mode == "exact", make_rng(rng),
                        int(nsteps), int(runs))


def graph_steps_batch(state: GraphState, spec, rng, nsteps: int, runs: int) -> np.ndarray:
    """``(runs, n_nodes)`` species arrays after ``nsteps`` graph steps."""
    vp = validate(spec)
    _check_k(state, vp)
    g = state.graph
    return K.batch_graph(np.array(state.species), g.edges, g.indptr, g.indices, vp.change,
                         vp.transitions, make_rng(rng), int(nsteps), int(runs))


def absorbing_label(state, vp: ValidatedProtocol) -> str:
    """Name of the surviving species, or ``a+b`` for mixed absorbing states."""
    alive = [i for i, c in enumerate(state.counts) if c > 0]
    return "+".join(vp.names[i] for i in alive)


__all__ = [
    "PAIRING_MODES", "DEFAULT_MAX_STEPS", "Recorder", "RunOutcome",
    "step_aggregate", "step_effective", "step_graph", "step_star",
    "run_to_absorption", "run_star", "simulate_fixed_steps", "sample_transitions",
    "fixed_steps_batch", "star_steps_batch", "graph_steps_batch",
    "absorbing_label", "is_rps", "is_absorbing",
]
