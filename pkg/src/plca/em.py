"""EM fitting of the PLCA factorization.

One iteration computes the responsibilities P(z|e,g) from the current
parameters and re-estimates

    P(e|z) <- sum_g pi(e,g) r[z,e,g] / sum_{e',g} pi(e',g) r[z,e',g]
    P(z|g) <- sum_e pi(e,g) r[z,e,g] / sum_{z',e} pi(e,g) r[z',e,g]

The group prior is fixed to the empirical group marginal and never updated.

Initialization draws every column of the mixture and components from a
symmetric Dirichlet(1), realized as normalized standard-exponential draws
from ``numpy.random.Generator(PCG64(seed))``.  The components matrix
(M x K, row-major) is drawn first, then the mixture (K x N, row-major).
"""
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeError, ValidationError
from .model import PlcaModel, posterior
from .objective import EmpiricalDistribution, fobj, kld


class Init(str, Enum):
    RANDOM_DIRICHLET = "random-dirichlet"
    PROVIDED_MODEL = "provided-model"


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class FitConfig:
    k: int
    max_iters: int = 500
    rel_tol: float = 1e-8
    seed: int = 0
    init: Init = Init.RANDOM_DIRICHLET
    record_trace: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not (self.rel_tol > 0):
            raise ValidationError(f"rel_tol must be positive, got {self.rel_tol!r}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "init", Init(self.init))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    fobj: float
    kld: float
    max_param_delta: float
    wall_ms: float


@dataclass
class FitTrace:
    records: list = field(default_factory=list)
    termination: Termination = Termination.MAX_ITERS
    initial_fobj: float = math.nan
    # (iteration, class indices) whenever a class lost all responsibility mass
    dead_classes: list = field(default_factory=list)

    @property
    def fobj_values(self):
        return [r.fobj for r in self.records]

    @property
    def n_iterations(self):
        return self.records[-1].iteration if self.records else 0

    def __len__(self):
        return len(self.records)


def init_model(pi: EmpiricalDistribution, cfg: FitConfig) -> PlcaModel:
    m, n = pi.shape
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    comp = rng.standard_exponential((m, cfg.k))
    mix = rng.standard_exponential((cfg.k, n))
    return PlcaModel(pi.group_marginal, mix / mix.sum(axis=0), comp / comp.sum(axis=0))


def _update(pi, model):
    """One EM iteration; returns (new model, indices of dead classes)."""
    m, n, k = model.dims
    if pi.shape != (m, n):
        raise ShapeError(f"empirical table is {pi.shape}, model expects {(m, n)}")
    post = posterior(model).values
    w = pi.table[None, :, :] * post  # K x M x N

    comp_num = w.sum(axis=2).T  # M x K
    class_mass = comp_num.sum(axis=0)
    dead = np.flatnonzero(class_mass == 0.0)
    comp = np.empty_like(comp_num)
    live = class_mass > 0
    comp[:, live] = comp_num[:, live] / class_mass[live]
    comp[:, ~live] = 1.0 / m

    mix_num = w.sum(axis=1)  # K x N
    mix_num[dead, :] = 0.0
    group_mass = mix_num.sum(axis=0)
    active = group_mass > 0
    mix = np.array(model.mixture)
    # groups with no observed mass keep their current column
    mix[:, active] = mix_num[:, active] / group_mass[active]
    return PlcaModel(model.group_prior, mix, comp), dead


def em_step(pi: EmpiricalDistribution, model: PlcaModel) -> PlcaModel:
    """Apply one E-step + M-step and return the updated model."""
    return _update(pi, model)[0]


def _max_delta(old, new, active):
    return max(
        float(np.max(np.abs(new.components - old.components))),
        float(np.max(np.abs(new.mixture[:, active] - old.mixture[:, active]), initial=0.0)),
    )


def fit(pi: EmpiricalDistribution, cfg: FitConfig, initial=None, callback=None):
    """Run EM until the objective stalls or ``cfg.max_iters`` is reached.

    Parameters
    ----------
    pi : EmpiricalDistribution
    cfg : FitConfig
    initial : PlcaModel, optional
        Required when ``cfg.init`` is ``provided-model``.  Its group prior is
        replaced by the empirical group marginal.
    callback : callable, optional
        Called as ``callback(iteration, model)`` after every iteration.

    Returns
    -------
    (PlcaModel, FitTrace)
        Convergence is declared when
        ``|f_t - f_{t-1}| <= rel_tol * max(1, |f_{t-1}|)``.  Without
        ``record_trace`` only the final iteration is kept in the trace.
    """
    if cfg.init is Init.PROVIDED_MODEL:
        if initial is None:
            raise ValidationError("init=provided-model needs an initial model")
        if initial.dims != (*pi.shape, cfg.k):
            raise ShapeError(f"initial model dims {initial.dims} do not match {(*pi.shape, cfg.k)}")
        model = initial.with_group_prior(pi.group_marginal)
    else:
        model = init_model(pi, cfg)

    active = pi.group_marginal > 0
    trace = FitTrace(initial_fobj=fobj(pi, model))
    prev = trace.initial_fobj
    last = None
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        new, dead = _update(pi, model)
        cur = fobj(pi, new)
        delta = _max_delta(model, new, active)
        wall_ms = (time.perf_counter() - t0) * 1e3
        if dead.size:
            trace.dead_classes.append((it, dead.tolist()))
        last = IterationRecord(it, cur, kld(pi, new) if cfg.record_trace else math.nan, delta, wall_ms)
        if cfg.record_trace:
            trace.records.append(last)
        model = new
        if callback is not None:
            callback(it, model)
        if dead.size == cfg.k:
            trace.termination = Termination.DEGENERATE
            break
        if math.isfinite(cur) and math.isfinite(prev) and abs(cur - prev) <= cfg.rel_tol * max(1.0, abs(prev)):
            trace.termination = Termination.CONVERGED
            break
        prev = cur
    else:
        trace.termination = Termination.MAX_ITERS

    if not cfg.record_trace:
        trace.records.append(IterationRecord(last.iteration, last.fobj, kld(pi, model),
                                             last.max_param_delta, last.wall_ms))
    return model, trace


def stationarity_residual(pi: EmpiricalDistribution, model: PlcaModel) -> float:
    """Largest violation of the Lagrangian stationarity conditions.

    For each (e, z): ``P(e|z) * lam_z == sum_g pi(e,g) r[z,e,g]`` with
    ``lam_z = sum_{e,g} pi(e,g) r[z,e,g]``; for each observed group (z, g):
    ``P(z|g) * pi(g) == sum_e pi(e,g) r[z,e,g]``.
    """
    post = posterior(model).values
    w = pi.table[None, :, :] * post
    s_ez = w.sum(axis=2).T
    lam = s_ez.sum(axis=0)
    comp_res = np.abs(model.components * lam[None, :] - s_ez)
    s_zg = w.sum(axis=1)
    mix_res = np.abs(model.mixture * pi.group_marginal[None, :] - s_zg)
    return float(max(comp_res.max(), mix_res.max()))
