"""Physical parameters and shared coefficients for the monitored-ensemble model.

Conventions used throughout the package
---------------------------------------
A collective spin J = N/2 (dimensionless, stored as a float) starts polarized
along x and is exposed to a magnetic field B (Gauss) along the Larmor axis
while the z component is continuously monitored with efficiency eta.
The mean spin decays as

    Jbar(t) = J * exp(-kappa*t/2)

and the problem is reduced to a single bosonic mode with quadratures
X = Jy/sqrt(Jbar), P = Jz/sqrt(Jbar), [X, P] = i.  Covariances use the
sigma = 2*Cov convention, so the vacuum has sigma = identity and
sigma_22 = 2*Var[P].

In matrix form the conditional moments obey

    d<r> = u dt + sigma M dw / sqrt(2),      dsigma/dt = D - sigma M M^T sigma

with, for this model,

    D = diag(2*kappa*Jbar, 0)
    M = (0, sqrt(2*eta*kappa*Jbar))^T
    u = (0, -gamma*B*sqrt(Jbar))^T

Internally most formulas are expressed in the reduced variables
kt = kappa*t and g = gamma/kappa (units 1/Gauss); the public functions take
physical (params, t) and convert.  kappa has units 1/time, gamma units
1/(time*Gauss), so every Fisher-information quantity comes out in 1/Gauss^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ModelParams",
    "TimeGrid",
    "MomentMatrices",
    "jbar",
    "moment_matrices",
    "validity_report",
    "load_config",
    "save_config",
]


@dataclass(frozen=True)
class ModelParams:
    """Immutable physical configuration: J, kappa, gamma, eta, B."""

    J: float
    kappa: float
    gamma: float
    eta: float = 1.0
    B: float = 0.0

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"total spin J must be positive, got {self.J}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        for name in ("J", "kappa", "gamma", "eta", "B"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def g(self) -> float:
        """Reduced coupling gamma/kappa (1/Gauss)."""
        return self.gamma / self.kappa

    def replace(self, **kw) -> "ModelParams":
        d = self.as_dict()
        d.update(kw)
        return ModelParams(**d)

    def as_dict(self) -> dict:
        return {"J": self.J, "kappa": self.kappa, "gamma": self.gamma,
                "eta": self.eta, "B": self.B}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_final] with n_steps steps (n_steps+1 nodes)."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        """All n_steps+1 node times, including both endpoints."""
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass(frozen=True)
class MomentMatrices:
    """Drift/diffusion/measurement matrices of the moment equations at one time."""

    D: np.ndarray  # 2x2 diffusion, units 1/time
    M: np.ndarray  # 2x1 measurement, units 1/sqrt(time)
    u: np.ndarray  # drift 2-vector, units 1/time
    t: float = 0.0


def jbar(params: ModelParams, t):
    """Damped mean spin Jbar(t) = J exp(-kappa t / 2).

    Accepts scalar or array t; rejects negative times.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = params.J * np.exp(-params.kappa * t / 2.0)
    return out if out.ndim else float(out)


def moment_matrices(params: ModelParams, t: float) -> MomentMatrices:
    """Evaluate D, M, u of the matrix moment equations at time t."""
    jb = jbar(params, t)
    D = np.array([[2.0 * params.kappa * jb, 0.0], [0.0, 0.0]])
    M = np.array([[0.0], [np.sqrt(2.0 * params.eta * params.kappa * jb)]])
    u = np.array([0.0, -params.gamma * params.B * np.sqrt(jb)])
    return MomentMatrices(D=D, M=M, u=u, t=float(t))


def validity_report(params: ModelParams, t: float,
                    gaussian_threshold: float = 1.0,
                    small_field_threshold: float = 0.1) -> dict:
    """Advisory regime flags: Gaussian reduction wants kappa*t <~ 1, and the
    linearized field coupling wants |gamma*B*t| << 1.  Never raises."""
    kt = params.kappa * t
    gbt = abs(params.gamma * params.B * t)
    return {
        "kappa_t": kt,
        "gamma_B_t": gbt,
        "gaussian_ok": bool(kt <= gaussian_threshold),
        "small_field_ok": bool(gbt <= small_field_threshold),
    }


# -- configuration files ------------------------------------------------------
#
# Flat JSON with keys J, kappa, gamma, eta, B, t_final, n_steps, seed.
# save_config(load_config(path)) round-trips exactly (floats serialized by repr).

def load_config(path) -> tuple[ModelParams, TimeGrid, int]:
    """Read a flat JSON config file -> (ModelParams, TimeGrid, seed)."""
    with open(path) as fh:
        raw = json.load(fh)
    missing = [k for k in ("J", "kappa", "gamma", "eta", "B",
                           "t_final", "n_steps", "seed") if k not in raw]
    if missing:
        raise KeyError(f"config {path} missing keys: {', '.join(missing)}")
    params = ModelParams(J=float(raw["J"]), kappa=float(raw["kappa"]),
                         gamma=float(raw["gamma"]), eta=float(raw["eta"]),
                         B=float(raw["B"]))
    grid = TimeGrid(t_final=float(raw["t_final"]), n_steps=int(raw["n_steps"]))
    return params, grid, int(raw["seed"])


def save_config(path, params: ModelParams, grid: TimeGrid, seed: int) -> None:
    """Write the flat JSON config; inverse of load_config."""
    payload = dict(params.as_dict(), t_final=grid.t_final,
                   n_steps=grid.n_steps, seed=int(seed))
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
