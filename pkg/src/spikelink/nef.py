"""NEF population: tuned LIF neurons, ridge-trained decoders, reconstruction.

Neuron currents are ``J = gain * (encoder . x) + bias``.  The LIF membrane is
advanced with the exact exponential propagator; threshold crossings inside a
step are located analytically so that refractoriness and firing rates are not
quantized by the integration step (reported spike times are on the step grid).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from .core import ContinuousFrame, SimClock, SpikeBatch
from .errors import BadRange, DimensionMismatch, SingularSystem, WidthMismatch

__all__ = [
    "LifParams",
    "NefPopulation",
    "TuningSample",
    "lif_rate",
    "nef_build",
    "lif_step",
    "nef_encode_step",
    "nef_train_decoders",
    "nef_decode",
    "default_grid",
    "default_reg",
    "rmse",
]

# below this excess over threshold a neuron is treated as not firing
_ONSET_TOL = 1e-12


@dataclass(frozen=True)
class LifParams:
    tau_m: float = 0.02
    v_thresh: float = 1.0
    v_reset: float = 0.0
    t_ref: float = 0.002
    dt: float = 1e-3

    def __post_init__(self):
        if not self.tau_m > 0:
            raise BadRange("tau_m must be positive")
        if not self.v_reset < self.v_thresh:
            raise BadRange("v_reset must be below v_thresh")
        if self.t_ref < 0:
            raise BadRange("t_ref must be non-negative")
        if not self.dt > 0:
            raise BadRange("dt must be positive")


def lif_rate(current, lif: LifParams = LifParams()) -> np.ndarray:
    """Steady-state LIF firing rate (Hz) for constant drive ``current``."""
    j = np.asarray(current, dtype=np.float64)
    out = np.zeros(j.shape)
    on = j - lif.v_thresh > _ONSET_TOL * max(1.0, abs(lif.v_thresh))
    jj = j[on]
    out[on] = 1.0 / (lif.t_ref + lif.tau_m * np.log((jj - lif.v_reset) / (jj - lif.v_thresh)))
    return out


def _current_for_rate(rate, lif: LifParams):
    """Constant drive that makes the LIF fire at ``rate``."""
    period = 1.0 / np.asarray(rate, dtype=float)
    if np.any(period <= lif.t_ref):
        raise BadRange("requested rate exceeds 1 / t_ref")
    e = np.exp((period - lif.t_ref) / lif.tau_m)
    return (e * lif.v_thresh - lif.v_reset) / (e - 1.0)


@dataclass
class NefPopulation:
    encoders: np.ndarray
    gains: np.ndarray
    biases: np.ndarray
    lif: LifParams = field(default_factory=LifParams)
    decoders: np.ndarray | None = None
    intercepts: np.ndarray | None = None
    max_rates: np.ndarray | None = None

    def __post_init__(self):
        self.encoders = np.atleast_2d(np.asarray(self.encoders, dtype=float))
        n = self.encoders.shape[0]
        self.gains = np.asarray(self.gains, dtype=float).reshape(n)
        self.biases = np.asarray(self.biases, dtype=float).reshape(n)
        norms = np.linalg.norm(self.encoders, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise BadRange("encoder rows must have unit norm")
        if np.any(self.gains <= 0):
            raise BadRange("gains must be positive")
        self.voltage = np.full(n, self.lif.v_reset)
        self.refractory = np.zeros(n)
        self.spike_offset = np.zeros(n)

    @property
    def n_neurons(self) -> int:
        return self.encoders.shape[0]

    @property
    def dim(self) -> int:
        return self.encoders.shape[1]

    def currents(self, x) -> np.ndarray:
        """Input currents for stimulus ``x`` of shape (dim,) or (samples, dim)."""
        x = np.asarray(x, dtype=float)
        return self.gains * (x @ self.encoders.T) + self.biases

    def rates(self, x) -> np.ndarray:
        return lif_rate(self.currents(x), self.lif)

    def reset_state(self):
        self.voltage[:] = self.lif.v_reset
        self.refractory[:] = 0.0


@dataclass(frozen=True, eq=False)
class TuningSample:
    input: np.ndarray
    rates: np.ndarray


def _unit_sphere(rng, n, d):
    if d == 1:
        return rng.choice([-1.0, 1.0], size=(n, 1))
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def nef_build(
    dim: int,
    n_neurons: int | None = None,
    seed: int = 0,
    intercept_range=(-0.95, 0.95),
    max_rate_range=(100.0, 200.0),
    lif: LifParams | None = None,
) -> NefPopulation:
    """Sample encoders, intercepts and max rates, then solve gains and biases.

    A neuron starts firing where ``encoder . x`` equals its intercept and fires
    at its max rate when ``encoder . x == 1``.
    """
    if dim < 1:
        raise BadRange("dim must be >= 1")
    n = 100 * dim if n_neurons is None else int(n_neurons)
    if n < 1:
        raise BadRange("n_neurons must be >= 1")
    lo, hi = intercept_range
    if not (-1.0 < lo <= hi < 1.0):
        raise BadRange(f"intercepts {intercept_range} not inside (-1, 1)")
    rlo, rhi = max_rate_range
    if not (0.0 < rlo <= rhi):
        raise BadRange(f"max rates {max_rate_range} must be positive")
    lif = lif or LifParams()
    rng = np.random.default_rng(seed)
    encoders = _unit_sphere(rng, n, dim)
    intercepts = rng.uniform(lo, hi, n)
    max_rates = rng.uniform(rlo, rhi, n)
    j_max = _current_for_rate(max_rates, lif)
    gains = (j_max - lif.v_thresh) / (1.0 - intercepts)
    biases = lif.v_thresh - gains * intercepts
    return NefPopulation(encoders, gains, biases, lif, intercepts=intercepts, max_rates=max_rates)


def lif_step(pop: NefPopulation, current, dt: float | None = None):
    """Advance every neuron by one step of constant ``current``.

    Returns the boolean spike mask.  The crossing time of each spike, measured
    from the start of the step, is left in ``pop.spike_offset``.
    """
    lif = pop.lif
    dt = lif.dt if dt is None else dt
    j = np.asarray(current, dtype=float)
    v = pop.voltage
    # time left in this step after the refractory period ends
    active_t = np.clip(dt - pop.refractory, 0.0, dt)
    v += (j - v) * -np.expm1(-active_t / lif.tau_m)
    spiked = v >= lif.v_thresh
    offset = np.zeros(v.size)
    if spiked.any():
        js, vs = j[spiked], v[spiked]
        # time elapsed since the crossing
        since = -lif.tau_m * np.log1p(-(vs - lif.v_thresh) / (js - lif.v_thresh))
        since = np.clip(since, 0.0, dt)
        offset[spiked] = dt - since
        v[spiked] = lif.v_reset
        pop.refractory[spiked] = lif.t_ref + dt - since
    pop.refractory -= dt
    np.maximum(pop.refractory, 0.0, out=pop.refractory)
    pop.spike_offset = offset
    return spiked


def nef_encode_step(pop: NefPopulation, frame, clock: SimClock) -> SpikeBatch:
    """Run the population for one tick on the LIF grid and collect its spikes."""
    x = frame.values if isinstance(frame, ContinuousFrame) else np.asarray(frame, dtype=float)
    if x.size != pop.dim:
        raise WidthMismatch(pop.dim, x.size)
    j = pop.currents(x)
    dt = pop.lif.dt
    n_sub = int(round(clock.delta_t / dt))
    if n_sub < 1 or abs(n_sub * dt - clock.delta_t) > 1e-9 * clock.delta_t:
        raise ValueError(f"tick {clock.delta_t} is not a multiple of the LIF step {dt}")
    ids, steps = [], []
    for s in range(n_sub):
        spiked = lif_step(pop, j, dt)
        if spiked.any():
            hit = np.flatnonzero(spiked)
            ids.append(hit)
            steps.append(np.full(hit.size, s))
    if not ids:
        return SpikeBatch.empty(clock.tick_index)
    ids = np.concatenate(ids)
    times = clock.time + np.concatenate(steps) * dt
    return SpikeBatch.from_arrays(clock.tick_index, ids, times)


def default_grid(dim: int, n_points: int = 500, seed: int = 0) -> np.ndarray:
    """Evaluation points spanning [-1, 1]^dim, shape (n_points, dim)."""
    if dim == 1:
        return np.linspace(-1.0, 1.0, n_points)[:, None]
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = max(0, int(np.ceil(np.log2(n_points))))
    return 2.0 * sob.random_base2(m)[:n_points] - 1.0


def default_reg(pop: NefPopulation, rel_noise: float = 0.1) -> float:
    upper = float(pop.max_rates.max()) if pop.max_rates is not None else float(pop.rates(pop.encoders).max())
    return (rel_noise * upper) ** 2


def nef_train_decoders(pop: NefPopulation, grid=None, reg: float | None = None) -> np.ndarray:
    """Ridge decoders from steady-state rates on ``grid``.

    Solves ``(A^T A + reg * m * I) phi = A^T X`` with ``m`` grid points by a
    Cholesky factorization.  The result is stored on ``pop.decoders``.
    """
    grid = default_grid(pop.dim) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != pop.dim:
        grid = grid.reshape(-1, pop.dim)
    reg = default_reg(pop) if reg is None else float(reg)
    if reg < 0:
        raise BadRange("reg must be non-negative")
    a = pop.rates(grid)
    m = grid.shape[0]
    gram = a.T @ a
    gram[np.diag_indices_from(gram)] += reg * m
    try:
        c = linalg.cho_factor(gram, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem("regularized normal matrix is not positive definite") from exc
    if np.min(np.abs(np.diag(c[0]))) <= np.finfo(float).eps * np.sqrt(np.abs(gram).max() or 1.0):
        raise SingularSystem("regularized normal matrix is numerically singular")
    phi = linalg.cho_solve(c, a.T @ grid)
    pop.decoders = phi
    return phi


def nef_decode(activities, phi) -> np.ndarray:
    a = np.asarray(activities, dtype=float)
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if a.shape[-1] != phi.shape[0]:
        raise DimensionMismatch(f"{a.shape[-1]} activities for {phi.shape[0]} decoders")
    return a @ phi


def rmse(pop: NefPopulation, grid=None, phi=None) -> float:
    grid = default_grid(pop.dim) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    phi = pop.decoders if phi is None else phi
    err = nef_decode(pop.rates(grid), phi) - grid
    return float(np.sqrt(np.mean(err ** 2)))
