"""Exact absorbing-chain analysis of the aggregate dynamics on K_n.

The state space is every composition of n into k counts.  The raw one-step
transition matrix is assembled sparsely and the absorption probabilities and
expected absorption times are obtained from linear solves with (I - Q).
Feasible for a few thousand states, which is ample as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import splu

from .protocol import validate


def compositions(n: int, k: int) -> list[tuple[int, ...]]:
    """All k-tuples of non-negative integers summing to n (stars and bars)."""
    out = []
    for bars in combinations(range(n + k - 1), k - 1):
        prev = -1
        c = []
        for b in bars:
            c.append(b - prev - 1)
            prev = b
        c.append(n + k - 2 - prev)
        out.append(tuple(c))
    return out


@dataclass(frozen=True, eq=False)
class AbsorbingChain:
    states: list[tuple[int, ...]]
    index: dict
    transient: np.ndarray  # indices into states
    absorbing: np.ndarray
    absorption: np.ndarray  # (len(states), len(absorbing)) probabilities
    expected_steps: np.ndarray  # (len(states),), 0 on absorbing states

    def probabilities_from(self, counts) -> dict[tuple[int, ...], float]:
        row = self.absorption[self.index[tuple(counts)]]
        return {self.states[a]: float(p) for a, p in zip(self.absorbing, row) if p > 0}

    def time_from(self, counts) -> float:
        return float(self.expected_steps[self.index[tuple(counts)]])


def solve_chain(spec, n: int, pairing_mode: str = "exact") -> AbsorbingChain:
    vp = validate(spec)
    k = vp.k
    if pairing_mode == "exact":
        denom = float(n) * (n - 1)
    elif pairing_mode == "paper":
        denom = float(n) * n
    else:
        raise ValueError(f"unknown pairing_mode {pairing_mode!r}")
    states = compositions(n, k)
    index = {s: i for i, s in enumerate(states)}
    ini, res, out, prob = vp.channels
    rows, cols, vals = [], [], []
    absorbing = []
    for si, s in enumerate(states):
        leave = 0.0
        for i, j, r, p in zip(ini, res, out, prob):
            w = s[i] * (s[j] - (i == j)) * p / denom
            if w <= 0:
                continue
            t = list(s)
            t[j] -= 1
            t[r] += 1
            rows.append(si)
            cols.append(index[tuple(t)])
            vals.append(w)
            leave += w
        if leave == 0.0:
            absorbing.append(si)
        else:
            rows.append(si)
            cols.append(si)
            vals.append(1.0 - leave)
    m = len(states)
    P = csr_matrix((vals, (rows, cols)), shape=(m, m))
    absorbing = np.array(absorbing, dtype=np.int64)
    is_abs = np.zeros(m, dtype=bool)
    is_abs[absorbing] = True
    transient = np.flatnonzero(~is_abs)
    B = np.zeros((m, len(absorbing)))
    B[absorbing, np.arange(len(absorbing))] = 1.0
    tau = np.zeros(m)
    if len(transient):
        Q = P[transient][:, transient]
        R = P[transient][:, absorbing].toarray()
        lu = splu((identity(len(transient), format="csc") - Q).tocsc())
        B[transient] = lu.solve(R)
        tau[transient] = lu.solve(np.ones(len(transient)))
    return AbsorbingChain(states, index, transient, absorbing, B, tau)
