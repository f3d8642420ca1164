"""Simulated homodyne photocurrent records.

A record is the discretized measurement current of one experimental run:
increments

    dy_i = m_i(B_true) * dt + dW_i,        dW_i ~ Normal(0, dt) i.i.d.

where the mean current follows the conditional filter evolved at the true
field.  Two mean-current conventions are supported and tagged on every
record, because they differ by a pure rescaling of the data:

    "main":  m_i = 2 sqrt(eta kappa Jbar_i) <P>_i,    noise variance dt
    "appc":  m_i = sqrt(2 eta kappa Jbar_i) <P>_i,    noise variance dt/2

i.e. an "appc" record is exactly a "main" record divided by sqrt(2).  The
Fisher information carried by the record is invariant under that rescaling,
but generator and likelihood must agree on the tag, so the tag travels with
the data and the inference layer refuses mismatches.

Reproducibility: record k of a batch uses
numpy's default_rng(SeedSequence(seed_base, spawn_key=(k,))) (PCG64); the
root seed, spawn key and algorithm tag are stored in the record and in the
file header.  Files are .npz archives holding the increment vector plus all
metadata as typed arrays; round-trips are bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filtering import var_p_closed
from .model import ModelParams, TimeGrid, jbar

__all__ = [
    "PhotocurrentRecord",
    "CONVENTIONS",
    "FORMAT_VERSION",
    "RNG_ALGORITHM",
    "simulate_record",
    "batch_simulate",
    "record_residuals",
    "filter_coefficients",
    "save_record",
    "load_record",
]

CONVENTIONS = ("main", "appc")
FORMAT_VERSION = 1
RNG_ALGORITHM = "pcg64-seedseq-spawn"


@dataclass(frozen=True)
class PhotocurrentRecord:
    """One run's increment vector plus everything needed to reuse it."""

    increments: np.ndarray
    dt: float
    t_final: float
    params: ModelParams          # with B = B_true used for generation
    seed: int                    # root seed
    spawn_key: tuple             # () for a directly seeded record, (k,) in a batch
    convention_tag: str = "main"
    rng_algorithm: str = RNG_ALGORITHM
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.convention_tag not in CONVENTIONS:
            raise ValueError(f"unknown convention_tag {self.convention_tag!r}")
        if len(self.increments) < 1:
            raise ValueError("record must contain at least one increment")
        if not np.all(np.isfinite(self.increments)):
            raise ValueError("record contains non-finite increments")

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    @property
    def uninformative(self) -> bool:
        """True when the record cannot carry field information (eta = 0)."""
        return self.params.eta == 0.0

    def grid(self) -> TimeGrid:
        return TimeGrid(t_final=self.t_final, n_steps=self.n_steps)

    def as_main_convention(self) -> np.ndarray:
        """Increments rescaled to the "main" convention (no-op for main)."""
        if self.convention_tag == "main":
            return self.increments
        return self.increments * math.sqrt(2.0)


def filter_coefficients(params: ModelParams, grid: TimeGrid):
    """Per-step filter coefficients on the left endpoints of the grid cells.

    Returns (c, K, drift) with
      c_i     = 2 sqrt(eta kappa Jbar_i)     mean-current coefficient ("main")
      K_i     = 2 Var_i sqrt(eta kappa Jbar_i)    innovation gain
      drift_i = gamma * sqrt(Jbar_i) * dt         per-step field drift of -<P>/B

    Raises when the grid is too coarse for the filter recursion (the damping
    factor 1 - K_i c_i dt must stay positive; it equals
    1 - 4 eta kappa Jbar_i Var_i dt, worst at t=0 where it needs
    2 eta kappa J dt < 1).
    """
    t_left = grid.times()[:-1]
    jb = jbar(params, t_left)
    V = var_p_closed(params, t_left)
    root = np.sqrt(params.eta * params.kappa * jb)
    c = 2.0 * root
    K = 2.0 * V * root
    if np.any(1.0 - K * c * grid.dt <= 0.0):
        raise ValueError(
            "time grid too coarse for the conditional filter: need "
            f"2*eta*kappa*J*dt < 1, got {2*params.eta*params.kappa*params.J*grid.dt:.3g}; "
            "increase n_steps")
    drift = params.gamma * np.sqrt(jb) * grid.dt
    return c, K, drift


def _generate(params: ModelParams, grid: TimeGrid, rng: np.random.Generator,
              convention_tag: str) -> np.ndarray:
    """Vectorized generation of one increment vector under B_true = params.B."""
    c, K, drift = filter_coefficients(params, grid)
    dW = rng.normal(0.0, math.sqrt(grid.dt), size=grid.n_steps)
    # Under the true field the innovations are the Wiener increments
    # themselves, so <P> accumulates by a plain prefix sum.
    steps = -params.B * drift + K * dW
    mean_p = np.concatenate(([0.0], np.cumsum(steps[:-1])))
    dy = c * mean_p * grid.dt + dW
    if convention_tag == "appc":
        dy = dy / math.sqrt(2.0)
    return dy


def simulate_record(params: ModelParams, grid: TimeGrid, seed: int,
                    convention_tag: str = "main",
                    _seedseq: np.random.SeedSequence | None = None,
                    _spawn_key: tuple = ()) -> PhotocurrentRecord:
    """Simulate one photocurrent record; deterministic in (params, grid, seed)."""
    if convention_tag not in CONVENTIONS:
        raise ValueError(f"unknown convention_tag {convention_tag!r}")
    ss = _seedseq if _seedseq is not None else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    dy = _generate(params, grid, rng, convention_tag)
    return PhotocurrentRecord(increments=dy, dt=grid.dt, t_final=grid.t_final,
                              params=params, seed=int(seed),
                              spawn_key=tuple(_spawn_key),
                              convention_tag=convention_tag)


def batch_simulate(params: ModelParams, grid: TimeGrid, n_records: int,
                   seed_base: int, convention_tag: str = "main",
                   threads: int = 1) -> list[PhotocurrentRecord]:
    """Independent records with per-record substreams spawned from seed_base.

    Record k uses SeedSequence(seed_base, spawn_key=(k,)), so the collection
    is reproducible as a whole and each record is reproducible on its own.
    """
    if n_records < 1:
        raise ValueError("n_records must be >= 1")
    keys = list(range(n_records))

    def make(k: int) -> PhotocurrentRecord:
        ss = np.random.SeedSequence(entropy=seed_base, spawn_key=(k,))
        return simulate_record(params, grid, seed_base, convention_tag,
                               _seedseq=ss, _spawn_key=(k,))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(make, keys))
    return [make(k) for k in keys]


def record_residuals(record: PhotocurrentRecord) -> np.ndarray:
    """Normalized innovations (dy_i - m_i dt)/sqrt(dt) under the generating
    parameters; i.i.d. standard normal when the record is self-consistent."""
    params, grid = record.params, record.grid()
    c, K, drift = filter_coefficients(params, grid)
    dy = record.as_main_convention()
    dt = grid.dt
    n = grid.n_steps
    res = np.empty(n)
    p = 0.0
    for i in range(n):
        dw = dy[i] - c[i] * p * dt
        res[i] = dw
        p = p - params.B * drift[i] + K[i] * dw
    return res / math.sqrt(dt)


# -- persistence ---------------------------------------------------------------

def save_record(record: PhotocurrentRecord, path) -> None:
    """Write a record to an .npz archive (bit-exact round-trip)."""
    p = record.params
    np.savez(path,
             increments=record.increments,
             J=np.float64(p.J), kappa=np.float64(p.kappa),
             gamma=np.float64(p.gamma), eta=np.float64(p.eta),
             B=np.float64(p.B),
             dt=np.float64(record.dt), t_final=np.float64(record.t_final),
             seed=np.int64(record.seed),
             spawn_key=np.asarray(record.spawn_key, dtype=np.int64),
             convention_tag=np.str_(record.convention_tag),
             rng_algorithm=np.str_(record.rng_algorithm),
             format_version=np.int64(record.format_version))


def load_record(path) -> PhotocurrentRecord:
    """Read an .npz archive written by save_record."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported record format version {version}")
        params = ModelParams(J=float(z["J"]), kappa=float(z["kappa"]),
                             gamma=float(z["gamma"]), eta=float(z["eta"]),
                             B=float(z["B"]))
        return PhotocurrentRecord(
            increments=z["increments"].copy(),
            dt=float(z["dt"]), t_final=float(z["t_final"]),
            params=params, seed=int(z["seed"]),
            spawn_key=tuple(int(k) for k in z["spawn_key"]),
            convention_tag=str(z["convention_tag"]),
            rng_algorithm=str(z["rng_algorithm"]),
            format_version=version)
