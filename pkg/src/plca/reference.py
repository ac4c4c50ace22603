"""Brute-force oracles for tiny instances.

Nothing here shares code with :mod:`plca.objective` or :mod:`plca.em`; these
functions exist to cross-check them.

The grid search enumerates column-stochastic matrices whose entries are
multiples of ``1/resolution``.  Two exact reductions keep it tractable:

* for fixed components the objective splits into one term per group, so
  each mixture column is minimized independently;
* relabelling latent classes leaves the objective unchanged, so only
  component sets with lattice-sorted columns are visited.

The returned minimum is the minimum over the full product lattice.
"""
import itertools
import math

import numpy as np

from .errors import SearchSpaceTooLargeError, ShapeError
from .model import PlcaModel

MAX_GRID_POINTS = 10**7


def simplex_lattice(dim, resolution):
    """All points of the probability simplex in R^dim with coordinates in
    multiples of 1/resolution, in lexicographic order of the integer counts."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, slots - 1)

    rec([], resolution, dim)
    return np.array(out, dtype=np.float64) / resolution


def grid_point_count(m, n, k, resolution):
    """Objective evaluations :func:`grid_search_fobj` would perform."""
    p = math.comb(resolution + m - 1, m - 1)
    q = math.comb(resolution + k - 1, k - 1)
    return math.comb(p + k - 1, k) * q * n


def grid_search_fobj(pi, k, resolution, max_points=MAX_GRID_POINTS):
    """Exhaustive lattice minimization of the PLCA objective.

    Returns ``(model, value)``; ties go to the first point in lexicographic
    lattice order.
    """
    table = np.asarray(pi.table, dtype=np.float64)
    m, n = table.shape
    if k < 1 or resolution < 1:
        raise ValueError("k and resolution must be positive")
    count = grid_point_count(m, n, k, resolution)
    if count > max_points:
        raise SearchSpaceTooLargeError(count, max_points)

    cols = simplex_lattice(m, resolution)  # P x M
    mixes = simplex_lattice(k, resolution)  # Q x K
    sets = np.array(list(itertools.combinations_with_replacement(range(len(cols)), k)))
    chunk = max(1, 2_000_000 // (len(mixes) * m))

    best_val, best_set, best_mix = math.inf, 0, None
    for start in range(0, len(sets), chunk):
        idx = sets[start:start + chunk]
        comps = cols[idx].transpose(0, 2, 1)  # c x M x K
        cond = np.einsum("cez,qz->cqe", comps, mixes)
        total = np.zeros(len(idx))
        arg = np.zeros((len(idx), n), dtype=np.int64)
        for g in range(n):
            w = table[:, g]
            obs = w > 0
            with np.errstate(divide="ignore"):
                logs = np.log(cond[:, :, obs])
            vals = -(logs * w[obs]).sum(axis=2)  # -inf*w -> +inf when cond == 0
            arg[:, g] = np.argmin(vals, axis=1)
            total += vals[np.arange(len(idx)), arg[:, g]]
        i = int(np.argmin(total))
        if best_mix is None or total[i] < best_val:
            best_val, best_set, best_mix = float(total[i]), start + i, arg[i]

    comp = cols[sets[best_set]].T
    mix = mixes[best_mix].T
    prior = table.sum(axis=0)
    return PlcaModel(prior / prior.sum(), mix, comp), best_val


def naive_fobj(pi, model):
    """Objective by explicit loops and plain float addition."""
    table = np.asarray(pi.table)
    m, n, k = model.dims
    if table.shape != (m, n):
        raise ShapeError(f"empirical table is {table.shape}, model expects {(m, n)}")
    total = 0.0
    for e in range(m):
        for g in range(n):
            w = float(table[e, g])
            if w == 0.0:
                continue
            cond = 0.0
            for z in range(k):
                cond += float(model.components[e, z]) * float(model.mixture[z, g])
            if cond == 0.0:
                return math.inf
            total -= w * math.log(cond)
    return total


def exact_factorization(pi):
    """A model whose joint reproduces ``pi`` exactly, with K = min(M, N).

    If M <= N the components are the unit vectors and each mixture column is
    pi(., g) / pi(g); otherwise the roles swap.  Empty groups get a uniform
    column.
    """
    table = np.asarray(pi.table, dtype=np.float64)
    m, n = table.shape
    prior = table.sum(axis=0)
    cond = np.full((m, n), 1.0 / m)
    obs = prior > 0
    cond[:, obs] = table[:, obs] / prior[obs]
    if m <= n:
        return PlcaModel(prior, cond, np.eye(m))
    return PlcaModel(prior, np.eye(n), cond)
