"""Compiled inner loops.

All kernels mutate the arrays they are given and return the advanced step
counter.  ``limit`` is an absolute raw-step bound: a kernel returns as soon as
the state is absorbing or the step counter reaches ``limit``; the state it
leaves behind is the state at that step.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def geometric_skip(rng, q):
    """Number of failures before the first success, success probability ``q``."""
    if q >= 1.0:
        return 0
    v = 1.0 - rng.random()
    return np.int64(np.log(v) / np.log1p(-q))


@njit(cache=True)
def _pair_denominator(n, exact):
    if exact:
        return n * (n - 1.0)
    return float(n) * float(n)


@njit(cache=True)
def channel_weights(counts, ini, res, prob, w):
    """Fill ``w`` with cumulative unnormalised channel weights; return the total.

    The weight of channel (i, j -> r) is n_i * (n_j - [i == j]) * prob.
    """
    tot = 0.0
    for c in range(ini.shape[0]):
        a = counts[ini[c]]
        b = counts[res[c]]
        if ini[c] == res[c]:
            b -= 1
        if a > 0 and b > 0:
            tot += a * b * prob[c]
        w[c] = tot
    return tot


@njit(cache=True)
def advance_aggregate(counts, ini, res, out, prob, exact, rng, step, limit, pending):
    """Event-skipping simulation on K_n.

    ``pending`` is a no-op run length left over from a previous call that
    stopped at its limit (-1 if none); carrying it over makes chunked runs
    consume the random stream exactly like one uninterrupted run.
    Returns ``(step, events, absorbed, pending)``.
    """
    n = 0
    for i in range(counts.shape[0]):
        n += counts[i]
    denom = _pair_denominator(n, exact)
    m = ini.shape[0]
    w = np.empty(m)
    events = 0
    while True:
        tot = channel_weights(counts, ini, res, prob, w)
        if tot <= 0.0:
            return step, events, True, -1
        if step >= limit:
            return step, events, False, pending
        if pending >= 0:
            skip = pending
            pending = -1
        else:
            skip = geometric_skip(rng, tot / denom)
        if skip >= limit - step:
            return limit, events, False, skip - (limit - step)
        step += skip + 1
        u = rng.random() * tot
        c = 0
        while c < m - 1 and u >= w[c]:
            c += 1
        counts[res[c]] -= 1
        counts[out[c]] += 1
        events += 1


@njit(cache=True)
def effective_event(counts, ini, res, out, prob, exact, rng):
    """One state-changing event.  Returns ``(skipped, channel)``; channel -1 if absorbing."""
    n = 0
    for i in range(counts.shape[0]):
        n += counts[i]
    m = ini.shape[0]
    w = np.empty(m)
    tot = channel_weights(counts, ini, res, prob, w)
    if tot <= 0.0:
        return 0, -1
    skip = geometric_skip(rng, tot / _pair_denominator(n, exact))
    u = rng.random() * tot
    c = 0
    while c < m - 1 and u >= w[c]:
        c += 1
    counts[res[c]] -= 1
    counts[out[c]] += 1
    return skip, c


@njit(cache=True)
def _species_of(cum, a):
    i = 0
    while a >= cum[i]:
        i += 1
    return i


@njit(cache=True)
def _sample_pair(counts, cum, n, exact, rng):
    """Species of an ordered agent pair; (-1, -1) for a self-pair in paper mode."""
    k = counts.shape[0]
    acc = 0
    for i in range(k):
        acc += counts[i]
        cum[i] = acc
    a = rng.integers(0, n)
    if exact:
        b = rng.integers(0, n - 1)
        if b >= a:
            b += 1
    else:
        b = rng.integers(0, n)
        if b == a:
            return -1, -1
    return _species_of(cum, a), _species_of(cum, b)


@njit(cache=True)
def _sample_result(T, i, j, rng):
    """Result species for responder j under initiator i; j itself if unchanged."""
    u = rng.random()
    acc = 0.0
    for r in range(T.shape[2]):
        if r == j:
            continue
        p = T[i, j, r]
        if p > 0.0:
            acc += p
            if u < acc:
                return r
    return j


@njit(cache=True)
def raw_steps_aggregate(counts, T, exact, rng, nsteps):
    """Plain scheduler steps on K_n, one pair per step.  Returns the number of changes."""
    n = 0
    for i in range(counts.shape[0]):
        n += counts[i]
    cum = np.empty(counts.shape[0], dtype=np.int64)
    events = 0
    for _ in range(nsteps):
        i, j = _sample_pair(counts, cum, n, exact, rng)
        if i < 0:
            continue
        r = _sample_result(T, i, j, rng)
        if r != j:
            counts[j] -= 1
            counts[r] += 1
            events += 1
    return events


@njit(cache=True)
def sample_transitions(counts, T, exact, rng, size):
    """``size`` independent one-step draws from the same state.

    Returns arrays (lost, gained): the species whose count drops/rises, -1 when
    the step changes nothing.
    """
    n = 0
    for i in range(counts.shape[0]):
        n += counts[i]
    cum = np.empty(counts.shape[0], dtype=np.int64)
    lost = np.full(size, -1, dtype=np.int64)
    gained = np.full(size, -1, dtype=np.int64)
    for s in range(size):
        i, j = _sample_pair(counts, cum, n, exact, rng)
        if i < 0:
            continue
        r = _sample_result(T, i, j, rng)
        if r != j:
            lost[s] = j
            gained[s] = r
    return lost, gained


@njit(cache=True)
def count_active(species, edges, change):
    act = 0
    for e in range(edges.shape[0]):
        a = species[edges[e, 0]]
        b = species[edges[e, 1]]
        if change[a, b] > 0.0:
            act += 1
        if change[b, a] > 0.0:
            act += 1
    return act


@njit(cache=True)
def _incident_active(species, v, indptr, indices, change):
    act = 0
    s = species[v]
    for p in range(indptr[v], indptr[v + 1]):
        t = species[indices[p]]
        if change[s, t] > 0.0:
            act += 1
        if change[t, s] > 0.0:
            act += 1
    return act


@njit(cache=True)
def advance_graph(species, counts, edges, indptr, indices, change, T, rng, step, limit, active):
    """Raw scheduler steps on a graph: uniform edge, uniform orientation.

    ``active`` is the number of ordered adjacent pairs whose interaction can
    change the responder; the state is absorbing exactly when it is zero.
    Returns ``(step, events, absorbed, active)``.
    """
    m = edges.shape[0]
    events = 0
    while True:
        if active == 0:
            return step, events, True, active
        if step >= limit:
            return step, events, False, active
        step += 1
        e = rng.integers(0, m)
        if rng.random() < 0.5:
            u = edges[e, 0]
            v = edges[e, 1]
        else:
            u = edges[e, 1]
            v = edges[e, 0]
        i = species[u]
        j = species[v]
        if change[i, j] <= 0.0:
            continue
        r = _sample_result(T, i, j, rng)
        if r == j:
            continue
        active -= _incident_active(species, v, indptr, indices, change)
        species[v] = r
        active += _incident_active(species, v, indptr, indices, change)
        counts[j] -= 1
        counts[r] += 1
        events += 1


# star statistics slots
ST_MIN_PROD = 0
ST_DIPS = 1
ST_RECOVERED = 2
ST_IN_DIP = 3
ST_DIP_VALUE = 4
ST_PREV_PROD = 5
ST_RETURNED = 6
N_STAR_STATS = 7


@njit(cache=True)
def _star_track(lc, stats, threshold):
    prod = lc[0] * lc[1] * lc[2]
    if prod < stats[ST_MIN_PROD]:
        stats[ST_MIN_PROD] = prod
    prev = stats[ST_PREV_PROD]
    if stats[ST_IN_DIP] == 1:
        if prod > stats[ST_DIP_VALUE]:
            stats[ST_RECOVERED] += 1
            stats[ST_IN_DIP] = 0
    if prev > threshold and prod <= threshold:
        stats[ST_DIPS] += 1
        stats[ST_IN_DIP] = 1
        stats[ST_DIP_VALUE] = prod
    if prev <= threshold and prod > threshold:
        stats[ST_RETURNED] += 1
    stats[ST_PREV_PROD] = prod


@njit(cache=True)
def advance_star(lc, center, oriented, rng, step, limit, stats, threshold, pending):
    """RPS on K_{1,n} with event skipping.

    With hub species c, a uniformly chosen leaf of c's prey is converted and a
    leaf of c's predator converts the hub; a leaf of species c does nothing.
    ``oriented`` additionally requires the scheduler's orientation coin to put
    the winner first, halving both rates (the plain graph scheduler).

    ``pending`` carries an unfinished no-op run between calls, as in
    ``advance_aggregate``.  Returns ``(center, step, events, absorbed, pending)``.
    """
    n = lc[0] + lc[1] + lc[2]
    scale = 2.0 * n if oriented else float(n)
    events = 0
    while True:
        prey = (center + 1) % 3
        pred = (center + 2) % 3
        a = lc[prey]
        b = lc[pred]
        if a + b == 0:
            return center, step, events, True, -1
        if step >= limit:
            return center, step, events, False, pending
        if pending >= 0:
            skip = pending
            pending = -1
        else:
            skip = geometric_skip(rng, (a + b) / scale)
        if skip >= limit - step:
            return center, limit, events, False, skip - (limit - step)
        step += skip + 1
        if rng.random() * (a + b) < a:
            lc[prey] -= 1
            lc[center] += 1
            if threshold >= 0.0:
                _star_track(lc, stats, threshold)
        else:
            center = pred
        events += 1


@njit(cache=True)
def raw_steps_star(lc, center, oriented, rng, nsteps):
    """Per-step star dynamics without skipping (reference path for tests)."""
    n = lc[0] + lc[1] + lc[2]
    for _ in range(nsteps):
        x = rng.integers(0, n)
        j = 0
        acc = lc[0]
        while x >= acc:
            j += 1
            acc += lc[j]
        if oriented and rng.random() >= 0.5:
            continue
        if j == (center + 1) % 3:
            lc[j] -= 1
            lc[center] += 1
        elif j == (center + 2) % 3:
            center = j
    return center


# --------------------------------------------------------------------------
# batches of short runs (distributional comparisons between engines)


@njit(cache=True)
def batch_fixed_steps(counts0, ini, res, out, prob, T, exact, rng, nsteps, runs, skipping):
    """Final counts of ``runs`` independent runs of ``nsteps`` raw steps each."""
    k = counts0.shape[0]
    result = np.empty((runs, k), dtype=np.int64)
    counts = np.empty(k, dtype=np.int64)
    for r in range(runs):
        counts[:] = counts0
        if skipping:
            advance_aggregate(counts, ini, res, out, prob, exact, rng, 0, nsteps, -1)
        else:
            raw_steps_aggregate(counts, T, exact, rng, nsteps)
        result[r] = counts
    return result


@njit(cache=True)
def batch_star(lc0, center0, oriented, rng, nsteps, runs):
    """Rows (center, n1, n2, n3) after ``nsteps`` plain star steps."""
    result = np.empty((runs, 4), dtype=np.int64)
    lc = np.empty(3, dtype=np.int64)
    for r in range(runs):
        lc[:] = lc0
        c = raw_steps_star(lc, center0, oriented, rng, nsteps)
        result[r, 0] = c
        result[r, 1:] = lc
    return result


@njit(cache=True)
def batch_graph(species0, edges, indptr, indices, change, T, rng, nsteps, runs):
    """Final species arrays of ``runs`` graph runs of ``nsteps`` raw steps."""
    nn = species0.shape[0]
    k = change.shape[0]
    result = np.empty((runs, nn), dtype=np.int64)
    species = np.empty(nn, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    for r in range(runs):
        species[:] = species0
        counts[:] = 0
        for v in range(nn):
            counts[species[v]] += 1
        active = count_active(species, edges, change)
        advance_graph(species, counts, edges, indptr, indices, change, T, rng, 0, nsteps, active)
        result[r] = species
    return result
