"""Draws from the generative process: g ~ P(g), z ~ P(z|g), e ~ P(e|z).

Each draw consumes three uniforms from the generator, in the order
(group, class, event).  Every categorical is sampled by inverse CDF over the
index-ascending cumulative sum, so :func:`sample_corpus` produces exactly
the same pairs as ``n`` consecutive :func:`sample_pair` calls on a
``numpy.random.Generator(PCG64(seed))``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .model import PlcaModel


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class SampleCorpus:
    """Observed (event, group) pairs; latent classes are not kept."""

    pairs: np.ndarray
    seed: int
    dims: tuple

    def __post_init__(self):
        pairs = np.array(self.pairs, dtype=np.int64).reshape(-1, 2)
        m, n = self.dims
        if pairs.size and (pairs.min() < 0 or pairs[:, 0].max() >= m or pairs[:, 1].max() >= n):
            raise ValidationError(f"corpus indices outside dims (M={m}, N={n})")
        pairs.flags.writeable = False
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "dims", (int(m), int(n)))

    def __len__(self):
        return len(self.pairs)


def _cdf(p, axis=0):
    """Cumulative sums with the tail pinned to 1 from the last non-zero entry on."""
    c = np.cumsum(p, axis=axis)
    c = np.moveaxis(c, axis, 0).copy()
    p0 = np.moveaxis(np.asarray(p), axis, 0)
    for col in np.ndindex(c.shape[1:]):
        nz = np.flatnonzero(p0[(slice(None), *col)])
        c[(slice(nz[-1], None), *col)] = 1.0
    return np.moveaxis(c, 0, axis)


def _draw(model, u):
    """Map an (n, 3) array of uniforms to (events, groups, classes)."""
    g = np.searchsorted(_cdf(model.group_prior), u[:, 0], side="right")
    z = np.empty_like(g)
    e = np.empty_like(g)
    mix_cdf = _cdf(model.mixture, axis=0)
    comp_cdf = _cdf(model.components, axis=0)
    for gi in np.unique(g):
        sel = g == gi
        z[sel] = np.searchsorted(mix_cdf[:, gi], u[sel, 1], side="right")
    for zi in np.unique(z):
        sel = z == zi
        e[sel] = np.searchsorted(comp_cdf[:, zi], u[sel, 2], side="right")
    return e, g, z


def sample_pair(model: PlcaModel, rng):
    """One draw; returns (event, group, latent class)."""
    e, g, z = _draw(model, rng.random(3).reshape(1, 3))
    return int(e[0]), int(g[0]), int(z[0])


def sample_triples(model: PlcaModel, n, rng):
    """``n`` draws as three index arrays (events, groups, classes)."""
    return _draw(model, rng.random((n, 3)))


def sample_corpus(model: PlcaModel, n: int, seed: int) -> SampleCorpus:
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    e, g, _ = sample_triples(model, n, make_rng(seed))
    return SampleCorpus(np.column_stack([e, g]), seed, model.dims[:2])


def corpus_to_counts(corpus, dims):
    """Integer M x N table of pair counts."""
    m, n = dims
    pairs = np.asarray(getattr(corpus, "pairs", corpus), dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs[:, 0].max() >= m or pairs[:, 1].max() >= n):
        raise ValidationError(f"corpus indices outside dims (M={m}, N={n})")
    counts = np.zeros((m, n), dtype=np.int64)
    np.add.at(counts, (pairs[:, 0], pairs[:, 1]), 1)
    return counts
