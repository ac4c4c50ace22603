"""Empirical distributions and the quantities EM is judged by.

All reductions go through :func:`gsum`, which sums terms in group-major
order with :func:`math.fsum`.  ``fsum`` is correctly rounded, so objective
values do not depend on array layout or BLAS threading.

Conventions: ``0 * log(anything) = 0``; an observed cell the model gives
zero probability makes the divergence ``+inf`` (never an exception).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .model import PlcaModel, PosteriorTable


def gsum(terms):
    """Compensated sum of an M x N array, visiting cells group by group."""
    return math.fsum(np.asarray(terms, dtype=np.float64).ravel(order="F"))


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Normalized non-negative M x N table pi(e, g); rows are events, columns groups."""

    table: np.ndarray
    group_marginal: np.ndarray = field(init=False)

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64, copy=True)
        if table.ndim != 2 or 0 in table.shape:
            raise ShapeError(f"empirical table must be a non-empty 2-D array, got shape {table.shape}")
        _check_nonneg(table)
        total = gsum(table)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"empirical table has total mass {total!r}, expected 1")
        table.flags.writeable = False
        marginal = table.sum(axis=0)
        marginal.flags.writeable = False
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "group_marginal", marginal)

    @property
    def shape(self):
        return self.table.shape

    @property
    def event_marginal(self):
        return self.table.sum(axis=1)


def _check_nonneg(raw):
    if not np.all(np.isfinite(raw)):
        e, g = np.argwhere(~np.isfinite(raw))[0]
        raise ValidationError(f"non-finite value at (e={e}, g={g})")
    if np.any(raw < 0):
        e, g = np.argwhere(raw < 0)[0]
        raise ValidationError(f"negative value {raw[e, g]!r} at (e={e}, g={g})")


def build_empirical(raw) -> EmpiricalDistribution:
    """Scale a non-negative matrix to unit total mass.

    >>> build_empirical([[1, 2], [3, 4]]).group_marginal.tolist()
    [0.4, 0.6000000000000001]
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or 0 in raw.shape:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {raw.shape}")
    _check_nonneg(raw)
    total = gsum(raw)
    if total == 0.0:
        raise ValidationError("matrix is all zeros")
    return EmpiricalDistribution(raw / total)


def _check_dims(pi, model):
    m, n, _ = model.dims
    if pi.shape != (m, n):
        raise ShapeError(f"empirical table is {pi.shape}, model expects {(m, n)}")


def _xlogy_sum(weights, values):
    """sum(weights * log(values)) with 0*log(.) = 0 and -inf on w>0, v=0."""
    mask = weights > 0
    if np.any(values[mask] == 0.0):
        return -math.inf
    terms = np.zeros_like(weights)
    terms[mask] = weights[mask] * np.log(values[mask])
    return gsum(terms)


def kld(pi: EmpiricalDistribution, model: PlcaModel) -> float:
    """KL(pi || P) over the event x group table."""
    _check_dims(pi, model)
    p = model.joint()
    mask = pi.table > 0
    if np.any(p[mask] == 0.0):
        return math.inf
    terms = np.zeros_like(p)
    terms[mask] = pi.table[mask] * np.log(pi.table[mask] / p[mask])
    return gsum(terms)


def fobj(pi: EmpiricalDistribution, model: PlcaModel) -> float:
    """Negative expected log conditional likelihood, -sum pi(e,g) log P(e|g).

    Differs from :func:`kld` only by terms that involve ``pi`` and the group
    prior, so minimizing one over mixture/components minimizes the other.
    """
    _check_dims(pi, model)
    return -_xlogy_sum(pi.table, model.conditional())


def sample_loglik(corpus, model: PlcaModel, return_stderr=False):
    """Average log P(e_i|g_i) over observed pairs.

    ``corpus`` is a :class:`~plca.sampler.SampleCorpus` or an (n, 2) integer
    array of (event, group) pairs.  With ``return_stderr`` the standard error
    of the mean is returned as well.
    """
    pairs = np.asarray(getattr(corpus, "pairs", corpus))
    if pairs.size == 0:
        raise DomainError("corpus is empty")
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ShapeError(f"expected (n, 2) pairs, got shape {pairs.shape}")
    m, n, _ = model.dims
    e, g = pairs[:, 0], pairs[:, 1]
    if e.min() < 0 or e.max() >= m or g.min() < 0 or g.max() >= n:
        raise IndexError(f"corpus indices outside model dims (M={m}, N={n})")
    cond = model.conditional()[e, g]
    if np.any(cond == 0.0):
        value, se = -math.inf, math.nan
    else:
        logs = np.log(cond)
        value = math.fsum(logs) / len(logs)
        se = float(np.std(logs, ddof=1)) / math.sqrt(len(logs)) if len(logs) > 1 else math.nan
    return (value, se) if return_stderr else value


def q_function(pi: EmpiricalDistribution, post: PosteriorTable, model: PlcaModel) -> float:
    """Expected complete-data log-likelihood

        Q = sum_{e,g} pi(e,g) sum_z post[z,e,g] log(P(e|z) P(z|g))
    """
    _check_dims(pi, model)
    k, m, n = post.shape
    if (m, n, k) != model.dims:
        raise ShapeError(f"posterior shape {post.shape} does not match model dims {model.dims}")
    w = pi.table[None, :, :] * post.values
    p = model.components.T[:, :, None] * model.mixture[:, None, :]
    mask = w > 0
    if np.any(p[mask] == 0.0):
        return -math.inf
    terms = np.zeros_like(w)
    terms[mask] = w[mask] * np.log(p[mask])
    # fold the class axis first so each cell is one term in group-major order
    return gsum(terms.sum(axis=0))


def posterior_entropy_term(pi: EmpiricalDistribution, post: PosteriorTable) -> float:
    """sum pi(e,g) sum_z post log post (non-positive).

    At ``post = posterior(model)`` this closes the decomposition
    ``q_function = -fobj + posterior_entropy_term``.
    """
    w = pi.table[None, :, :] * post.values
    mask = w > 0
    terms = np.zeros_like(w)
    terms[mask] = w[mask] * np.log(post.values[mask])
    return gsum(terms.sum(axis=0))
