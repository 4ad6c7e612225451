"""Seeded Monte Carlo harness and the named experiments built on it.

Every trial i of a batch draws its generator from ``seed_for_trial(base_seed,
i)``, so any single trial can be replayed in isolation.  Trials are
independent; with ``jobs > 1`` they run in worker processes and results are
collected in index order, after which statistics are computed serially.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .constants import STAR_DIP_FACTOR
from .engine import DEFAULT_MAX_STEPS, Recorder, absorbing_label, run_star, run_to_absorption
from .errors import InvalidConfig, LvpopError, UnabsorbedTrials
from .graphs import Graph
from .protocol import builtin, protocol_to_dict, resolve_protocol
from .rng import make_rng, seed_for_trial
from .states import AggregateState, GraphState, StarState
from .stats import ChiSquare, chi_square_homogeneity, wilson_interval

STEP_LIMIT = "step_limit"
FAILED = "failed"


@dataclass
class ExperimentConfig:
    protocol: object = "rps"  # builtin name, path, or protocol dict
    n: int | None = None
    init: list | None = None  # counts, or fractions summing to 1
    graph: str = "complete"  # complete | star | file:<path>
    trials: int = 1
    base_seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    pairing_mode: str | None = None  # engine default per graph kind
    stride: int | None = None  # recorder stride in raw steps
    center: int = 0  # hub species for star runs
    dip_threshold: float | None = None  # star product tracking

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidConfig("trials must be at least 1")
        self.max_steps = int(float(self.max_steps))
        if self.max_steps <= 0:
            raise InvalidConfig("max_steps must be positive")
        if not (self.graph in ("complete", "star") or str(self.graph).startswith("file:")):
            raise InvalidConfig(f"unknown graph kind {self.graph!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidConfig(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if not isinstance(self.protocol, (str, dict)):
            d["protocol"] = protocol_to_dict(self.protocol)
        if d["init"] is not None:
            d["init"] = [v.item() if hasattr(v, "item") else v for v in d["init"]]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def initial_counts(self, k: int) -> tuple[int, ...]:
        if self.init is None:
            if self.n is None:
                raise InvalidConfig("either n or init is required")
            return AggregateState.from_fractions([1.0 / k] * k, self.n).counts
        vals = [float(v) for v in self.init]
        if len(vals) != k:
            raise InvalidConfig(f"init has {len(vals)} entries, protocol has {k} species")
        integral = all(v == int(v) and v >= 0 for v in vals)
        if integral and (self.n is None or sum(vals) == self.n):
            return tuple(int(v) for v in vals)
        if self.n is None:
            raise InvalidConfig("fractional init requires n")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise InvalidConfig(f"init sums to {sum(vals)}: neither n={self.n} nor 1")
        return AggregateState.from_fractions(vals, self.n).counts


@dataclass
class TrialRecord:
    index: int
    seed: int
    terminal: str  # absorbed | step_limit | failed
    label: str  # absorbing species label, or the terminal for non-absorbed
    steps: int
    effective_events: int
    final: tuple
    extra: dict = field(default_factory=dict)
    trace: list | None = None
    error: str | None = None


def _initial_state(cfg: ExperimentConfig, vp, rng):
    counts = cfg.initial_counts(vp.k)
    if cfg.graph == "complete":
        return AggregateState(counts)
    if cfg.graph == "star":
        return StarState(cfg.center, counts)
    graph = Graph.load(cfg.graph[len("file:"):])
    return GraphState.from_counts(graph, counts, rng)


def run_single(cfg: ExperimentConfig, index: int, vp=None) -> TrialRecord:
    """One trial; LvpopError during the run becomes a failed record."""
    seed = seed_for_trial(cfg.base_seed, index)
    try:
        vp = vp or resolve_protocol(cfg.protocol)
        rng = make_rng(seed)
        state = _initial_state(cfg, vp, rng)
        rec = Recorder(cfg.stride) if cfg.stride else None
        if isinstance(state, StarState):
            out = run_star(state, vp, rng, cfg.max_steps, rec, cfg.pairing_mode or "paper",
                           dip_threshold=cfg.dip_threshold)
        else:
            out = run_to_absorption(state, vp, rng, cfg.max_steps, rec, cfg.pairing_mode)
    except LvpopError as e:
        return TrialRecord(index, seed, FAILED, FAILED, 0, 0, (), error=f"{e.code}: {e}")
    label = absorbing_label(out.state, vp) if out.absorbed else STEP_LIMIT
    return TrialRecord(index, seed, out.terminal, label, out.steps, out.effective_events,
                       tuple(int(c) for c in out.state.counts), out.extra,
                       rec.to_rows() if rec is not None else None)


def _run_chunk(args):
    cfg_dict, indices = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    vp = resolve_protocol(cfg.protocol)
    return [run_single(cfg, i, vp) for i in indices]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]

    @property
    def trials(self) -> int:
        return len(self.records)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.label] = out.get(r.label, 0) + 1
        return dict(sorted(out.items()))

    def frequency(self, label: str) -> float:
        return self.counts().get(label, 0) / self.trials

    def frequency_table(self) -> dict[str, dict]:
        N = self.trials
        table = {}
        for label, c in self.counts().items():
            table[label] = {
                "count": c,
                "frequency": c / N,
                "wilson95": list(wilson_interval(c, N, 0.95)),
                "wilson99": list(wilson_interval(c, N, 0.99)),
            }
        return table

    def absorbed_steps(self) -> np.ndarray:
        return np.array([r.steps for r in self.records if r.terminal == "absorbed"], dtype=float)

    def step_quantiles(self, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict[str, float]:
        s = self.absorbed_steps()
        if s.size == 0:
            return {}
        return {f"q{int(round(q * 100)):02d}": float(np.quantile(s, q)) for q in qs} | {
            "mean": float(s.mean())}

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "build": __version__,
            "trials": self.trials,
            "absorbed": sum(r.terminal == "absorbed" for r in self.records),
            "step_limit": sum(r.terminal == STEP_LIMIT for r in self.records),
            "failed": sum(r.terminal == FAILED for r in self.records),
            "frequencies": self.frequency_table(),
            "step_quantiles": self.step_quantiles(),
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trials.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial_index", "seed", "terminal", "label", "steps", "effective_events",
                        "final_counts", "error"])
            for r in self.records:
                w.writerow([r.index, r.seed, r.terminal, r.label, r.steps, r.effective_events,
                            " ".join(map(str, r.final)), r.error or ""])
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, default=str)
        traced = [r for r in self.records if r.trace]
        if traced:
            (out / "traces").mkdir(exist_ok=True)
            for r in traced:
                with open(out / "traces" / f"trial_{r.index}.csv", "w", newline="") as fh:
                    csv.writer(fh).writerows(r.trace)
        return out


def run_trials(config: ExperimentConfig | dict, jobs: int = 1) -> ExperimentResult:
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    vp = resolve_protocol(cfg.protocol)
    if jobs <= 1 or cfg.trials == 1:
        records = [run_single(cfg, i, vp) for i in range(cfg.trials)]
    else:
        cfg_dict = cfg.to_dict()
        size = max(1, math.ceil(cfg.trials / (4 * jobs)))
        chunks = [(cfg_dict, list(range(s, min(s + size, cfg.trials))))
                  for s in range(0, cfg.trials, size)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = [r for part in ex.map(_run_chunk, chunks) for r in part]
    return ExperimentResult(cfg, records)


# --------------------------------------------------------------------------
# scaling


@dataclass
class LineFit:
    slope: float
    intercept: float
    residuals: np.ndarray
    rss: float
    aic: float


def _fit(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rss = float(resid @ resid)
    m = len(x)
    aic = m * math.log(max(rss, 1e-300) / m) + 4
    return LineFit(float(slope), float(intercept), resid, rss, aic)


@dataclass
class ScalingResult:
    n_list: list[int]
    values: np.ndarray  # statistic of steps per n
    loglog: LineFit  # log(value) vs log(n)
    loglinear: LineFit  # log(value) vs n
    results: list[ExperimentResult]

    @property
    def slope(self) -> float:
        return self.loglog.slope

    @property
    def intercept(self) -> float:
        return self.loglog.intercept

    @property
    def residuals(self) -> np.ndarray:
        return self.loglog.residuals

    def ratios(self) -> np.ndarray:
        return self.values[1:] / self.values[:-1]

    def exponential_preferred(self) -> bool:
        """True when log-time is better explained by n than by log n."""
        return self.loglinear.aic < self.loglog.aic

    def to_dict(self) -> dict:
        return {
            "n": self.n_list,
            "values": self.values.tolist(),
            "ratios": self.ratios().tolist(),
            "loglog": {"slope": self.loglog.slope, "intercept": self.loglog.intercept,
                       "rss": self.loglog.rss, "aic": self.loglog.aic},
            "loglinear": {"slope": self.loglinear.slope, "intercept": self.loglinear.intercept,
                          "rss": self.loglinear.rss, "aic": self.loglinear.aic},
        }


def convergence_scaling(protocol, n_list, trials: int, quantile: float | str = 0.5, *,
                        init=None, base_seed: int = 0, pairing_mode: str | None = None,
                        max_steps: int = DEFAULT_MAX_STEPS, jobs: int = 1) -> ScalingResult:
    """Steps-to-absorption statistic per n, fitted against log n and against n.

    ``quantile`` is a number in (0, 1) or ``"mean"``; ``init`` is a fraction
    vector (default: equal shares).
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise InvalidConfig("need at least three population sizes")
    vp = resolve_protocol(protocol)
    fr = list(init) if init is not None else [1.0 / vp.k] * vp.k
    values, results = [], []
    for j, n in enumerate(n_list):
        cfg = ExperimentConfig(vp.spec, n=n, init=fr, trials=trials,
                               base_seed=base_seed + j * 1_000_003, max_steps=max_steps,
                               pairing_mode=pairing_mode)
        res = run_trials(cfg, jobs)
        bad = res.trials - len(res.absorbed_steps())
        if bad:
            raise UnabsorbedTrials(f"{bad} trials at n={n} did not absorb; fit would be censored")
        s = res.absorbed_steps()
        values.append(s.mean() if quantile == "mean" else np.quantile(s, float(quantile)))
        results.append(res)
    values = np.array(values, dtype=float)
    logv = np.log(values)
    return ScalingResult(n_list, values, _fit(np.log(n_list), logv), _fit(n_list, logv), results)


# --------------------------------------------------------------------------
# star stalling


@dataclass
class StarStallReport:
    n: int
    horizon: int
    threshold: float
    star: ExperimentResult
    complete: ExperimentResult | None

    @property
    def absorbed(self) -> int:
        return sum(r.terminal == "absorbed" for r in self.star.records)

    @property
    def dipping_trials(self) -> int:
        return sum(r.extra.get("dips", 0) > 0 for r in self.star.records)

    @property
    def recovered_share(self) -> float:
        dip = [r for r in self.star.records if r.extra.get("dips", 0) > 0]
        if not dip:
            return float("nan")
        return sum(r.extra["recoveries"] > 0 for r in dip) / len(dip)

    @property
    def complete_median(self) -> float | None:
        if self.complete is None:
            return None
        s = self.complete.absorbed_steps()
        if len(s) < self.complete.trials:
            return float("inf")
        return float(np.median(s))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "horizon": self.horizon,
            "threshold": self.threshold,
            "trials": self.star.trials,
            "absorbed": self.absorbed,
            "min_product": [r.extra.get("min_product") for r in self.star.records],
            "dipping_trials": self.dipping_trials,
            "recovered_share": self.recovered_share,
            "complete_median_steps": self.complete_median,
        }


def star_stall_experiment(n: int, trials: int, horizon: int, *, leaf_counts=None,
                          base_seed: int = 0, complete_trials: int = 0,
                          pairing_mode: str = "paper", jobs: int = 1) -> StarStallReport:
    """RPS on K_{1,n}: absorption within ``horizon`` and product-potential dips.

    With ``complete_trials`` the same composition is also run to absorption on
    the complete graph K_n for contrast.
    """
    lc = list(leaf_counts) if leaf_counts is not None else list(
        AggregateState.from_fractions([1 / 3] * 3, n).counts)
    thr = STAR_DIP_FACTOR * float(n) ** 3
    spec = builtin("rps")
    cfg = ExperimentConfig(spec, n=n, init=lc, graph="star", trials=trials, base_seed=base_seed,
                           max_steps=horizon, pairing_mode=pairing_mode, dip_threshold=thr)
    star = run_trials(cfg, jobs)
    complete = None
    if complete_trials:
        ccfg = ExperimentConfig(spec, n=n, init=lc, trials=complete_trials,
                                base_seed=base_seed + 1, max_steps=DEFAULT_MAX_STEPS)
        complete = run_trials(ccfg, jobs)
    return StarStallReport(n, int(horizon), thr, star, complete)


# --------------------------------------------------------------------------
# wolves and sheep


@dataclass
class WsReport:
    n: int
    epsilon: float
    init: tuple[int, ...]
    result: ExperimentResult

    def _count(self, label: str) -> int:
        return self.result.counts().get(label, 0)

    @property
    def all_x(self) -> int:
        return self._count("X")

    @property
    def all_y(self) -> int:
        return self._count("Y")

    @property
    def other(self) -> int:
        return self.result.trials - self.all_x - self.all_y

    def share(self, label: str) -> float:
        return self._count(label) / self.result.trials

    def interval(self, label: str, level: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self._count(label), self.result.trials, level)

    def to_dict(self) -> dict:
        T = self.result.trials
        return {
            "n": self.n, "epsilon": self.epsilon, "init": list(self.init), "trials": T,
            "all_X": self.all_x, "all_Y": self.all_y, "other": self.other,
            "all_X_wilson95": list(self.interval("X")), "all_Y_wilson95": list(self.interval("Y")),
        }


def ws_initial_counts(n: int, epsilon: float) -> tuple[int, int, int, int]:
    """One wolf of each kind, n sheep split in the ratio (1 + eps) : (1 - eps)."""
    if not 0 <= epsilon < 1:
        raise InvalidConfig("epsilon must lie in [0, 1)")
    nx = int(round(n * (1 + epsilon) / 2))
    return (1, 1, nx, n - nx)


def ws_amplification(n: int, epsilon: float, trials: int, *, base_seed: int = 0,
                     pairing_mode: str | None = None, jobs: int = 1) -> WsReport:
    init = ws_initial_counts(n, epsilon)
    cfg = ExperimentConfig(builtin("ws"), init=list(init), trials=trials, base_seed=base_seed,
                           pairing_mode=pairing_mode)
    return WsReport(n, float(epsilon), init, run_trials(cfg, jobs))


# --------------------------------------------------------------------------
# cyclic symmetry of RPS


@dataclass
class SymmetryReport:
    counts: tuple[int, ...]
    rotated: tuple[int, ...]
    table: np.ndarray  # 2 x 3 winners; row 2 mapped back by the inverse rotation
    test: ChiSquare

    @property
    def pvalue(self) -> float:
        return self.test.pvalue

    def to_dict(self) -> dict:
        return {"counts": list(self.counts), "rotated": list(self.rotated),
                "table": self.table.tolist(), "statistic": self.test.statistic,
                "dof": self.test.dof, "pvalue": self.test.pvalue}


def _winner_counts(res: ExperimentResult) -> np.ndarray:
    w = np.zeros(3)
    for r in res.records:
        if r.terminal == "absorbed":
            w[int(np.argmax(r.final))] += 1
    return w


def rps_symmetry_test(x0, n: int, trials: int, *, base_seed: int = 0,
                      pairing_mode: str | None = None, jobs: int = 1) -> SymmetryReport:
    """Winner distribution from x0 against the one from (x3, x1, x2), relabelled.

    Relabelling every species a -> a + 1 maps the chain onto itself, so species
    a winning from x0 has the same probability as a + 1 winning from the
    rotated start.
    """
    counts = AggregateState.from_fractions(x0, n).counts
    rot = (counts[2], counts[0], counts[1])
    spec = builtin("rps")
    a = run_trials(ExperimentConfig(spec, init=list(counts), trials=trials,
                                    base_seed=base_seed, pairing_mode=pairing_mode), jobs)
    b = run_trials(ExperimentConfig(spec, init=list(rot), trials=trials,
                                    base_seed=base_seed + 1, pairing_mode=pairing_mode), jobs)
    wa = _winner_counts(a)
    wb = np.roll(_winner_counts(b), -1)
    table = np.vstack([wa, wb])
    return SymmetryReport(counts, rot, table, chi_square_homogeneity(table))


__all__ = [
    "ExperimentConfig", "ExperimentResult", "TrialRecord", "run_trials", "run_single",
    "convergence_scaling", "ScalingResult", "star_stall_experiment", "StarStallReport",
    "ws_amplification", "ws_initial_counts", "WsReport", "rps_symmetry_test",
    "SymmetryReport", "seed_for_trial",
]
