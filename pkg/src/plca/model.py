"""PLCA parameter triple and pointwise probability evaluations.

The joint model is

    P(e, g) = P(g) * sum_z P(e|z) P(z|g)

with ``group_prior`` holding P(g) (length N), ``mixture`` holding P(z|g)
(K x N, column-stochastic) and ``components`` holding P(e|z) (M x K,
column-stochastic).  Everything is stored in linear scale.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError

# construction accepts this much round-off before rejecting
ACCEPT_TOL = 1e-9
# columns further than this from 1 get divided by their sum
EXACT_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


def _stochastic(a, axis, name):
    """Validate column sums (or the vector sum) and renormalize if needed."""
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    if np.any(a < 0):
        idx = tuple(int(i) for i in np.argwhere(a < 0)[0])
        raise ValidationError(f"{name} has a negative entry at {idx}")
    sums = a.sum(axis=axis, keepdims=True)
    bad = np.abs(sums - 1.0) > ACCEPT_TOL
    if np.any(bad):
        where = np.flatnonzero(bad.ravel())[0]
        raise ValidationError(
            f"{name} column {where} sums to {float(sums.ravel()[where])!r}, expected 1")
    off = np.abs(sums - 1.0) > EXACT_TOL
    if np.any(off):
        a = np.where(off, a / sums, a)
    return a


@dataclass(frozen=True, eq=False)
class PlcaModel:
    """Immutable PLCA parameters.

    Construction checks every stochastic constraint with tolerance 1e-9 and
    rescales any vector that is off by more than 1e-12, so the stored arrays
    always satisfy the constraints to 1e-12.  Arrays are read-only.
    """

    group_prior: np.ndarray
    mixture: np.ndarray
    components: np.ndarray
    dims: tuple = field(init=False)

    def __post_init__(self):
        prior = np.asarray(self.group_prior, dtype=np.float64)
        mixture = np.asarray(self.mixture, dtype=np.float64)
        components = np.asarray(self.components, dtype=np.float64)
        if prior.ndim != 1 or mixture.ndim != 2 or components.ndim != 2:
            raise ShapeError("expected group_prior 1-D, mixture and components 2-D")
        n = prior.shape[0]
        m, k = components.shape
        if mixture.shape != (k, n):
            raise ShapeError(f"mixture has shape {mixture.shape}, expected {(k, n)}")
        if m < 1 or n < 1 or k < 1:
            raise ShapeError(f"dims must be positive, got M={m} N={n} K={k}")
        prior = _stochastic(prior, 0, "group_prior")
        mixture = _stochastic(mixture, 0, "mixture")
        components = _stochastic(components, 0, "components")
        object.__setattr__(self, "group_prior", _frozen(prior))
        object.__setattr__(self, "mixture", _frozen(mixture))
        object.__setattr__(self, "components", _frozen(components))
        object.__setattr__(self, "dims", (m, n, k))

    @property
    def n_events(self):
        return self.dims[0]

    @property
    def n_groups(self):
        return self.dims[1]

    @property
    def n_classes(self):
        return self.dims[2]

    def conditional(self):
        """M x N matrix of P(e|g) = sum_z P(e|z) P(z|g)."""
        return self.components @ self.mixture

    def joint(self):
        """M x N matrix of P(e, g)."""
        return self.conditional() * self.group_prior[None, :]

    def relabel(self, perm):
        """Return the same model with latent class ``perm[i]`` moved to slot ``i``."""
        perm = np.asarray(perm)
        if sorted(perm.tolist()) != list(range(self.n_classes)):
            raise ValidationError(f"{perm.tolist()} is not a permutation of range({self.n_classes})")
        return PlcaModel(self.group_prior, self.mixture[perm, :], self.components[:, perm])

    def with_group_prior(self, group_prior):
        return PlcaModel(group_prior, self.mixture, self.components)


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """Responsibilities P(z|e,g) as a K x M x N array.

    ``degenerate`` marks (e, g) cells where every class has zero
    probability; those cells carry the uniform posterior 1/K.
    """

    values: np.ndarray
    degenerate: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def _check_index(model, e, g):
    m, n, _ = model.dims
    if not (0 <= e < m):
        raise IndexError(f"event index {e} out of range [0, {m})")
    if not (0 <= g < n):
        raise IndexError(f"group index {g} out of range [0, {n})")


def conditional_e_given_g(model: PlcaModel, e: int, g: int) -> float:
    """P(e|g) = sum_z P(e|z) P(z|g) for a single cell."""
    _check_index(model, e, g)
    return float(np.dot(model.components[e, :], model.mixture[:, g]))


def joint_prob(model: PlcaModel, e: int, g: int) -> float:
    """P(e, g) = P(g) * P(e|g) for a single cell."""
    return float(model.group_prior[g]) * conditional_e_given_g(model, e, g)


def posterior(model: PlcaModel) -> PosteriorTable:
    """E-step responsibilities P(z|e,g) for every cell.

    Cells whose normalizer is zero get 1/K for every class and are flagged.
    """
    # numer[z, e, g] = P(e|z) P(z|g)
    numer = model.components.T[:, :, None] * model.mixture[:, None, :]
    denom = numer.sum(axis=0)
    degenerate = denom == 0.0
    safe = np.where(degenerate, 1.0, denom)
    values = numer / safe[None, :, :]
    if np.any(degenerate):
        values[:, degenerate] = 1.0 / model.n_classes
    values.flags.writeable = False
    degenerate.flags.writeable = False
    return PosteriorTable(values, degenerate)
