"""Conditional Gaussian dynamics: variance flow, first-moment stepping, and the
field-sensitivity ODE.

The conditional state of the effective mode stays Gaussian, with a
deterministic covariance (the Riccati flow does not depend on the measurement
record) and a stochastic mean driven by the homodyne innovations:

    d<P>_c  = -gamma*B*sqrt(Jbar) dt + 2 Var_c[P] sqrt(eta*kappa*Jbar) dw
    dVar/dt = -4 eta kappa Jbar Var^2          (closed form below)
    ds/dt   = -gamma*sqrt(Jbar) - 4 Var eta kappa Jbar s,   s = d<P>_c/dB

From the vacuum, Var_c[P](t) = 1 / (8 eta J (1 - e^{-kappa t/2}) + 2), and the
sensitivity also closes:

    s(t) = -(8 gamma sqrt(J) / (3 kappa)) * Var(t) * v*(3 + 4 eta J v (3 - v)),
    v = 1 - e^{-kappa t/4}.

The ODE routines here deliberately *re-integrate* these equations with a
fixed-step explicit scheme (classical RK4 on the user grid, with extra
substeps inside cells where the Riccati contraction is fast) so the closed
forms can be checked against an independent route.  The stability rule is

    substeps per cell = ceil(dt * (8 eta kappa Jbar(t) Var(t) + kappa) / 0.1)

evaluated at the cell start, where the rates are largest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, TimeGrid, jbar

__all__ = [
    "GaussianConditionalState",
    "SensitivityState",
    "var_p_closed",
    "var_p_ode",
    "sensitivity_closed",
    "sensitivity_ode",
    "step_conditional_mean",
    "cov_flow_matrix",
    "vacuum_state",
]


@dataclass(frozen=True)
class GaussianConditionalState:
    """First moments and 2x2 covariance (sigma = 2*Cov convention) at time t."""

    mean_x: float
    mean_p: float
    cov: np.ndarray
    t: float

    def var_p(self) -> float:
        """Var_c[P] = sigma_22 / 2."""
        return float(self.cov[1, 1]) / 2.0


@dataclass(frozen=True)
class SensitivityState:
    """d<P>_c/dB (units 1/Gauss) at time t."""

    dmean_p_dB: float
    t: float


def vacuum_state() -> GaussianConditionalState:
    """Initial condition: zero means, identity covariance (vacuum)."""
    return GaussianConditionalState(mean_x=0.0, mean_p=0.0, cov=np.eye(2), t=0.0)


def var_p_closed(params: ModelParams, t):
    """Conditional variance Var_c[P](t) = 1/(8 eta J (1-e^{-kappa t/2}) + 2)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    denom = 8.0 * params.eta * params.J * (-np.expm1(-params.kappa * t / 2.0)) + 2.0
    out = 1.0 / denom
    return out if out.ndim else float(out)


def sensitivity_closed(params: ModelParams, t):
    """Closed-form s(t) = d<P(t)>_c/dB (1/Gauss); deterministic, record-free."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    v = -np.expm1(-params.kappa * t / 4.0)
    gain = v * (3.0 + 4.0 * params.eta * params.J * v * (3.0 - v))
    out = -(8.0 * params.gamma * np.sqrt(params.J) / (3.0 * params.kappa)) \
        * var_p_closed(params, t) * gain
    return out if out.ndim else float(out)


def _substeps(params: ModelParams, t: float, dt: float) -> int:
    """Stability rule: keep |fastest rate| * h <= 0.1 within the cell."""
    rate = 8.0 * params.eta * params.kappa * jbar(params, t) \
        * var_p_closed(params, t) + params.kappa
    return max(1, math.ceil(dt * rate / 0.1))


def var_p_ode(params: ModelParams, grid: TimeGrid, check_tol: float = 1e-6) -> np.ndarray:
    """Integrate the Riccati variance equation on the grid (RK4, substepped).

    Returns Var_c[P] at all grid nodes.  Raises RuntimeError if the result
    disagrees with the closed form by more than check_tol in relative terms
    (set check_tol=None to skip the cross-check).
    """
    ek, J, eta = params.kappa, params.J, params.eta
    times = grid.times()
    out = np.empty(times.size)
    out[0] = 0.5
    V = 0.5
    for i in range(grid.n_steps):
        t0, dt = times[i], grid.dt
        n_sub = _substeps(params, t0, dt)
        h = dt / n_sub
        for k in range(n_sub):
            t = t0 + k * h

            def f(tt, vv):
                return -4.0 * eta * ek * J * math.exp(-ek * tt / 2.0) * vv * vv

            k1 = f(t, V)
            k2 = f(t + h / 2, V + h * k1 / 2)
            k3 = f(t + h / 2, V + h * k2 / 2)
            k4 = f(t + h, V + h * k3)
            V += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = V
    if check_tol is not None:
        ref = var_p_closed(params, times)
        rel = np.max(np.abs(out - ref) / ref)
        if rel > check_tol:
            raise RuntimeError(
                f"variance ODE disagrees with closed form: rel err {rel:.3e} "
                f"> {check_tol:.1e}; refine the grid")
    return out


def sensitivity_ode(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """Integrate ds/dt = -gamma sqrt(Jbar) - 4 Var eta kappa Jbar s from s(0)=0.

    Deterministic (no noise term); the closed-form variance feeds the damping
    coefficient.  Returns s at all grid nodes (units 1/Gauss).
    """
    ek, J, eta, gam = params.kappa, params.J, params.eta, params.gamma
    times = grid.times()
    out = np.empty(times.size)
    out[0] = 0.0
    s = 0.0
    for i in range(grid.n_steps):
        t0, dt = times[i], grid.dt
        n_sub = _substeps(params, t0, dt)
        h = dt / n_sub
        for k in range(n_sub):
            t = t0 + k * h

            def f(tt, ss):
                jb = J * math.exp(-ek * tt / 2.0)
                V = 1.0 / (8.0 * eta * J * (-math.expm1(-ek * tt / 2.0)) + 2.0)
                return -gam * math.sqrt(jb) - 4.0 * V * eta * ek * jb * ss

            k1 = f(t, s)
            k2 = f(t + h / 2, s + h * k1 / 2)
            k3 = f(t + h / 2, s + h * k2 / 2)
            k4 = f(t + h, s + h * k3)
            s += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = s
    return out


def step_conditional_mean(state: GaussianConditionalState, params: ModelParams,
                          dt: float, dw: float) -> GaussianConditionalState:
    """One Euler-Maruyama step of the conditional means, dw ~ Normal(0, dt).

    <P> picks up the field drift and the innovation gain 2*Var*sqrt(eta k Jbar);
    <X> couples to the record only through sigma_12, which stays zero from the
    model's initial condition, so it is carried but inert.  The covariance is
    advanced by one RK4 step of the matrix Riccati flow.
    """
    jb = jbar(params, state.t)
    root = math.sqrt(params.eta * params.kappa * jb)
    sig = state.cov
    mean_p = state.mean_p - params.gamma * params.B * math.sqrt(jb) * dt \
        + sig[1, 1] * root * dw
    mean_x = state.mean_x + sig[0, 1] * root * dw
    cov = _cov_rk4_step(params, state.t, sig, dt)
    return GaussianConditionalState(mean_x=mean_x, mean_p=mean_p, cov=cov,
                                    t=state.t + dt)


def _cov_rhs(params: ModelParams, t: float, sig: np.ndarray) -> np.ndarray:
    """dsigma/dt = D - sigma M M^T sigma for this model's D, M."""
    jb = params.J * math.exp(-params.kappa * t / 2.0)
    mm = 2.0 * params.eta * params.kappa * jb  # (M M^T)_22, the only entry
    s12, s22 = sig[0, 1], sig[1, 1]
    d = np.empty((2, 2))
    d[0, 0] = 2.0 * params.kappa * jb - mm * s12 * s12
    d[0, 1] = d[1, 0] = -mm * s12 * s22
    d[1, 1] = -mm * s22 * s22
    return d


def _cov_rk4_step(params: ModelParams, t: float, sig: np.ndarray,
                  h: float) -> np.ndarray:
    k1 = _cov_rhs(params, t, sig)
    k2 = _cov_rhs(params, t + h / 2, sig + h * k1 / 2)
    k3 = _cov_rhs(params, t + h / 2, sig + h * k2 / 2)
    k4 = _cov_rhs(params, t + h, sig + h * k3)
    return sig + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def cov_flow_matrix(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """Full 2x2 Riccati flow from sigma(0)=I; returns shape (n_steps+1, 2, 2).

    Raises RuntimeError on loss of positive-definiteness, which indicates a
    step-size failure (it cannot happen for a converged integration).
    """
    times = grid.times()
    out = np.empty((times.size, 2, 2))
    sig = np.eye(2)
    out[0] = sig
    for i in range(grid.n_steps):
        t0, dt = times[i], grid.dt
        n_sub = _substeps(params, t0, dt)
        h = dt / n_sub
        for k in range(n_sub):
            sig = _cov_rk4_step(params, t0 + k * h, sig, h)
        if sig[0, 0] <= 0 or sig[0, 0] * sig[1, 1] - sig[0, 1] ** 2 <= 0:
            raise RuntimeError(f"covariance lost positive-definiteness at "
                               f"t={times[i + 1]:.6g}; refine the grid")
        out[i + 1] = sig
    return out
