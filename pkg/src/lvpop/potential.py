"""Nett interaction matrix, potential vector, and exact one-step potential drift.

For an LV protocol with matrix ``P`` the mean-field dynamics are driven by the
skew-symmetric ``A = P - P^T``.  A potential vector ``b`` is chosen as

* case ``"i"``: ``b >= 0``, ``b != 0`` with ``b^T A = 0`` (a conserved
  quantity of the flow), when one exists;
* case ``"ii"``: otherwise any ``b`` with every component of ``b^T A``
  positive (the potential then increases along the flow).

Both are found by small linear programs and rescaled to ``max|b_i| = 1``.
The potential of a state with fractions ``x`` is ``U(x) = sum_i b_i ln x_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpInfeasible, NotLvKind, NumericallyIllConditioned, ZeroPopulation
from .lp import linprog
from .protocol import ValidatedProtocol, validate

CASE_I_THRESHOLD = 1e-9
RESIDUAL_TOL = 1e-9
SKEW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PotentialVector:
    b: np.ndarray
    case: str  # "i" or "ii"
    residual: float  # max|b^T A| for case i, min(b^T A) for case ii

    def __iter__(self):
        return iter(self.b)

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "case": self.case, "residual": self.residual}


def nett_matrix(spec) -> np.ndarray:
    vp = validate(spec)
    if vp.kind != "lv":
        raise NotLvKind("the nett matrix is defined for LV-type protocols")
    return vp.P - vp.P.T


def compute_b(A) -> PotentialVector:
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    if A.shape != (k, k) or not np.allclose(A, -A.T, atol=SKEW_TOL, rtol=0):
        raise ValueError("A must be a square skew-symmetric matrix")

    # case (i): max sum(b) s.t. A^T b = 0, 0 <= b <= 1
    res = linprog(-np.ones(k), A_ub=np.eye(k), b_ub=np.ones(k), A_eq=A.T, b_eq=np.zeros(k))
    if res.status != "optimal":
        raise LpInfeasible(f"case (i) LP returned {res.status}; b = 0 is always feasible")
    if -res.fun > CASE_I_THRESHOLD:
        b = res.x / np.abs(res.x).max()
        b[np.abs(b) < 1e-15] = 0.0
        resid = float(np.abs(b @ A).max())
        if resid > RESIDUAL_TOL:
            raise NumericallyIllConditioned(f"case (i) residual {resid:.3g} exceeds {RESIDUAL_TOL}")
        return PotentialVector(b, "i", resid)

    # case (ii): b = p - q, (A^T b)_j >= 1, minimise ||b||_1
    A_ub = np.hstack([-A.T, A.T])
    res = linprog(np.ones(2 * k), A_ub=A_ub, b_ub=-np.ones(k))
    if res.status != "optimal":
        raise LpInfeasible(f"case (ii) LP returned {res.status}; "
                           "a skew-symmetric matrix must admit a solution")
    b = res.x[:k] - res.x[k:]
    b = b / np.abs(b).max()
    h = b @ A
    resid = float(h.min())
    if resid < RESIDUAL_TOL:
        raise NumericallyIllConditioned(f"case (ii) min(b^T A) = {resid:.3g} after rescaling")
    return PotentialVector(b, "ii", resid)


def potential_for(spec) -> PotentialVector:
    return compute_b(nett_matrix(spec))


def _b_array(b) -> np.ndarray:
    return np.asarray(getattr(b, "b", b), dtype=float)


def potential_U(b, x) -> float:
    """sum_i b_i ln x_i; species with b_i = 0 are skipped."""
    b = _b_array(b)
    x = np.asarray(x, dtype=float)
    mask = b != 0
    if np.any(x[mask] <= 0):
        raise ZeroPopulation("potential undefined: a weighted species has zero population")
    return float(np.sum(b[mask] * np.log(x[mask])))


def expected_delta_U(counts, spec, b, pairing_mode: str = "paper") -> float:
    """Exact expected change of U over one raw scheduler step.

    Enumerates every channel (i, j -> r): the pair weight is n_i n_j / n^2
    (``paper``) or n_i n_j / (n (n - 1)) (``exact``), with n_j replaced by
    n_j - 1 when i == j.  The change contributes
    b_r (ln(n_r + 1) - ln n_r) + b_j (ln(n_j - 1) - ln n_j).
    Channels with zero weight are skipped, so absorbing states give 0.
    """
    vp = validate(spec)
    b = _b_array(b)
    c = np.asarray(getattr(counts, "counts", counts), dtype=np.int64)
    n = int(c.sum())
    if pairing_mode == "paper":
        denom = float(n) * n
    elif pairing_mode == "exact":
        denom = float(n) * (n - 1)
    else:
        raise ValueError(f"unknown pairing_mode {pairing_mode!r}")
    ini, res, out, prob = vp.channels
    total = 0.0
    for i, j, r, p in zip(ini, res, out, prob):
        w = c[i] * (c[j] - (i == j))
        if w <= 0:
            continue
        d = 0.0
        if b[r] != 0:
            if c[r] == 0:
                raise ZeroPopulation(f"species {r} has weight b={b[r]} but zero population")
            d += b[r] * np.log1p(1.0 / c[r])
        if b[j] != 0:
            if c[j] == 1:
                raise ZeroPopulation(f"a step can eliminate weighted species {j}")
            d += b[j] * np.log1p(-1.0 / c[j])
        total += w * p * d
    return total / denom


def delta_U_of_transitions(counts, b, lost, gained) -> np.ndarray:
    """Potential change of each sampled one-step transition (0 for no-ops)."""
    b = _b_array(b)
    c = np.asarray(getattr(counts, "counts", counts), dtype=float)
    lost = np.asarray(lost)
    gained = np.asarray(gained)
    out = np.zeros(lost.shape)
    moved = lost >= 0
    j = lost[moved]
    r = gained[moved]
    with np.errstate(divide="ignore"):
        out[moved] = b[r] * np.log1p(1.0 / c[r]) + b[j] * np.log1p(-1.0 / c[j])
    return out


def star_product_potential(counts) -> tuple[int, int]:
    """(n1 * n2 * n3, max - min) for star leaf counts."""
    c = [int(v) for v in counts]
    if len(c) != 3:
        raise ValueError("star potential needs exactly three leaf counts")
    return c[0] * c[1] * c[2], max(c) - min(c)
