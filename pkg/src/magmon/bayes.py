"""Bayesian field inference from photocurrent records.

The discrete generative model is linear and Gaussian, so the log-likelihood
of a record is exactly quadratic in the candidate field B.  Running the
conditional filter at field B, the predicted mean increments decompose as

    <P>_i(B) = A_i * B + Psi_i

with a record-independent sensitivity recursion A and a record-driven part
Psi (both obey the same damped recursion with factor phi_i = 1 - c_i K_i dt).
The likelihood then collapses to three scalars per record,

    log L(B) = -1/2 (S_rr - 2 B S_rA + B^2 S_AA),

accumulated here in compensated summation over records so that posteriors are
invariant under record reordering to the last bit.  S_AA is the discrete
Fisher information of the record set; the exact sampling distribution of the
maximum-likelihood point is Normal(B_true, 1/S_AA).

Posteriors are represented on a uniform grid over a flat prior interval with
trapezoid quadrature weights; moments come from the same quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .information import fisher_record_closed
from .model import ModelParams, TimeGrid
from .records import PhotocurrentRecord, filter_coefficients

__all__ = [
    "PosteriorGrid",
    "EstimateSummary",
    "log_likelihood",
    "quadratic_coefficients",
    "prefix_coefficients",
    "posterior",
    "estimate",
    "saturation_curve",
]

DEFAULT_PRIOR = (-0.01, 0.01)
DEFAULT_GRID_POINTS = 401


@dataclass(frozen=True)
class PosteriorGrid:
    """Grid posterior over the field for a set of records up to time t."""

    b_values: np.ndarray
    log_likelihood: np.ndarray   # up to a B-independent constant
    posterior: np.ndarray        # density values; trapezoid-normalized
    prior_interval: tuple
    params: ModelParams | None
    n_records: int
    t: float
    prior_kind: str = "uniform"

    def weights(self) -> np.ndarray:
        w = np.full(len(self.b_values), self.b_values[1] - self.b_values[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class EstimateSummary:
    """Posterior point summary against the information-bound scale."""

    mean: float
    sd: float
    sd_crb: float
    ratio: float


def _linear_decomposition(record: PhotocurrentRecord):
    """Residual/regressor split of a record: returns (r, beta, dt) with
    log L(B) = -sum (r_i - beta_i B)^2 / (2 dt)."""
    params, grid = record.params, record.grid()
    c, K, drift = filter_coefficients(params, grid)
    dy = record.as_main_convention()
    dt = grid.dt
    phi = 1.0 - c * K * dt
    # A_i = Pi_i * a_i and Psi_i = Pi_i * s_i with Pi the running product of
    # phi; the running product stays well above underflow because it is
    # bounded below by 1/(1 + 4 eta J) at full squeezing.
    Pi = np.concatenate(([1.0], np.cumprod(phi)))
    a = np.concatenate(([0.0], np.cumsum(-drift / Pi[1:])))
    s = np.concatenate(([0.0], np.cumsum(K * dy / Pi[1:])))
    A = Pi * a
    Psi = Pi * s
    r = dy - c * Psi[:-1] * dt
    beta = c * A[:-1] * dt
    return r, beta, dt


def quadratic_coefficients(record: PhotocurrentRecord, upto_step: int | None = None):
    """(S_rr, S_rA, S_AA) for one record, optionally truncated to a prefix."""
    r, beta, dt = _linear_decomposition(record)
    if upto_step is not None:
        if not 0 <= upto_step <= len(r):
            raise ValueError(f"upto_step {upto_step} outside record length {len(r)}")
        r, beta = r[:upto_step], beta[:upto_step]
    return (float(np.dot(r, r) / dt),
            float(np.dot(r, beta) / dt),
            float(np.dot(beta, beta) / dt))


def prefix_coefficients(record: PhotocurrentRecord, steps):
    """Quadratic coefficients at several prefix lengths of one record.

    steps is an increasing array of step counts; returns three arrays of the
    same length (S_rr, S_rA, S_AA evaluated on record[:k] for each k).
    """
    r, beta, dt = _linear_decomposition(record)
    crr = np.concatenate(([0.0], np.cumsum(r * r))) / dt
    cra = np.concatenate(([0.0], np.cumsum(r * beta))) / dt
    caa = np.concatenate(([0.0], np.cumsum(beta * beta))) / dt
    idx = np.asarray(steps, dtype=int)
    if np.any(idx < 0) or np.any(idx > len(r)):
        raise ValueError("checkpoint steps outside record length")
    return crr[idx], cra[idx], caa[idx]


def log_likelihood(record: PhotocurrentRecord, B: float) -> float:
    """Exact log-likelihood of one record at candidate field B (additive
    constant included)."""
    if not math.isfinite(B):
        raise ValueError("candidate field must be finite")
    S_rr, S_rA, S_AA = quadratic_coefficients(record)
    return -0.5 * (S_rr - 2.0 * B * S_rA + B * B * S_AA)


def _check_compatible(records) -> ModelParams:
    first = records[0]
    for rec in records[1:]:
        if rec.params != first.params:
            raise ValueError("records mix different model parameters")
        if rec.n_steps != first.n_steps or rec.dt != first.dt:
            raise ValueError("records mix different time grids")
        if rec.convention_tag != first.convention_tag:
            raise ValueError("records mix different current conventions")
    return first.params


def _posterior_from_quadratic(S_rr, S_rA, S_AA, prior_interval, n_grid,
                              params, n_records, t,
                              boundary: str = "raise") -> PosteriorGrid:
    lo, hi = prior_interval
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid prior interval {prior_interval}")
    b = np.linspace(lo, hi, n_grid)
    logl = -0.5 * (S_rr - 2.0 * b * S_rA + b * b * S_AA)
    shifted = logl - logl.max()
    p = np.exp(shifted)
    w = np.full(n_grid, (hi - lo) / (n_grid - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    mass = float(np.dot(p, w))
    p = p / mass
    pmax = p.max()
    peaked = pmax > 2.0 * p.min()
    if (boundary == "raise" and n_records > 0 and peaked
            and (p[0] == pmax or p[-1] == pmax)):
        raise RuntimeError(
            "posterior mass concentrates at the prior boundary; widen the "
            f"prior interval {prior_interval}")
    return PosteriorGrid(b_values=b, log_likelihood=logl, posterior=p,
                         prior_interval=(float(lo), float(hi)),
                         params=params, n_records=n_records, t=t)


def posterior(records, prior_interval=DEFAULT_PRIOR,
              n_grid: int = DEFAULT_GRID_POINTS,
              upto_step: int | None = None,
              boundary: str = "raise") -> PosteriorGrid:
    """Grid posterior over B given zero or more records.

    With no records the flat prior is returned unchanged.  Record
    contributions are combined with math.fsum, so any reordering of the same
    multiset of records yields a bit-identical posterior.  A posterior that
    peaks on the edge of the prior interval raises (the prior is too narrow);
    pass boundary="allow" to skip that guard for diagnostic sweeps.
    """
    records = list(records)
    if n_grid < 3:
        raise ValueError("n_grid must be at least 3")
    if boundary not in ("raise", "allow"):
        raise ValueError(f"unknown boundary policy {boundary!r}")
    if not records:
        t = 0.0
        return _posterior_from_quadratic(0.0, 0.0, 0.0, prior_interval,
                                         n_grid, None, 0, t, boundary)
    params = _check_compatible(records)
    parts = [quadratic_coefficients(rec, upto_step) for rec in records]
    S_rr = math.fsum(p[0] for p in parts)
    S_rA = math.fsum(p[1] for p in parts)
    S_AA = math.fsum(p[2] for p in parts)
    k = len(records[0].increments) if upto_step is None else upto_step
    t = k * records[0].dt
    return _posterior_from_quadratic(S_rr, S_rA, S_AA, prior_interval, n_grid,
                                     params, len(records), t, boundary)


def estimate(post: PosteriorGrid, t: float | None = None) -> EstimateSummary:
    """Posterior mean and spread, with the closed-form information bound
    1/sqrt(n F(t)) attached for the same parameters and horizon."""
    w = post.weights()
    mean = float(np.dot(w * post.posterior, post.b_values))
    var = float(np.dot(w * post.posterior, (post.b_values - mean) ** 2))
    sd = math.sqrt(max(var, 0.0))
    horizon = post.t if t is None else t
    if post.n_records == 0 or post.params is None or horizon <= 0.0:
        return EstimateSummary(mean=mean, sd=sd, sd_crb=math.nan, ratio=math.nan)
    F = fisher_record_closed(post.params, horizon)
    if F <= 0.0:
        return EstimateSummary(mean=mean, sd=sd, sd_crb=math.inf, ratio=0.0)
    sd_crb = 1.0 / math.sqrt(post.n_records * F)
    return EstimateSummary(mean=mean, sd=sd, sd_crb=sd_crb, ratio=sd / sd_crb)


def saturation_curve(records, checkpoint_steps, prior_interval=DEFAULT_PRIOR,
                     n_grid: int = DEFAULT_GRID_POINTS):
    """Single-record posterior spread against the information bound over time.

    For each checkpoint step k and each record, the posterior of that record
    alone truncated to its first k increments is summarized.  Returns
    (times, summaries) where summaries[i][j] is the EstimateSummary of record
    j at checkpoint i.  Boundary-grazing posteriors are kept (truncated at
    the prior edge) rather than raised: a barely informative early checkpoint
    may legitimately lean on the prior.
    """
    records = list(records)
    if not records:
        raise ValueError("saturation_curve needs at least one record")
    params = _check_compatible(records)
    steps = np.asarray(checkpoint_steps, dtype=int)
    times = steps * records[0].dt
    per_record = [prefix_coefficients(rec, steps) for rec in records]
    summaries = []
    for i, k in enumerate(steps):
        row = []
        t = float(times[i])
        for crr, cra, caa in per_record:
            post = _posterior_from_quadratic(crr[i], cra[i], caa[i],
                                             prior_interval, n_grid, params,
                                             1, t, boundary="allow")
            row.append(estimate(post))
        summaries.append(row)
    return times, summaries
