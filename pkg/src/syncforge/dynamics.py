"""Oscillator models, fixed-step RK4 integration, and coupled-network dynamics.

Each model comes in three forms, following the usual pattern for this kind of
code: a single-agent vector field f (and its Jacobian) for reference orbits
and variational systems, and a vectorized variant acting on a whole (N, n)
block of agent states for network integration.  The single-agent forms are
numba-compiled so the Lyapunov engine can run them inside a jitted loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rng import standard_normal
from .tridiag import TridiagonalMatrix

__all__ = [
    "OscillatorModel",
    "NetworkSystem",
    "SyncSeries",
    "BlowUpError",
    "model",
    "MODEL_NAMES",
    "rk4_step",
    "rk4_integrate",
    "network_rhs",
    "simulate_network",
    "perturbed_sync_ic",
    "attractor_warmup",
    "finite_difference_jacobian",
    "sync_error",
    "sync_error_all_pairs",
]

# Any state component beyond this magnitude counts as a blow-up and aborts the
# integration so diverging non-synchronized networks terminate cleanly.
BLOWUP_LIMIT = 1e8


class BlowUpError(RuntimeError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, step: int, time: float):
        super().__init__(f"state blew up at step {step} (t = {time:g})")
        self.step = step
        self.time = time


@dataclass(eq=False)
class OscillatorModel:
    """Single-agent dynamics plus the network coupling matrix.

    f and jacobian act on one state vector of length n; f_network acts on an
    (N, n) array of agent states row-wise.
    """

    name: str
    n: int
    f: callable
    jacobian: callable
    coupling: np.ndarray
    f_network: callable
    x0: np.ndarray

    def __post_init__(self):
        self.coupling = np.asarray(self.coupling, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.coupling.shape != (self.n, self.n):
            raise ValueError("coupling matrix must be n x n")
        if self.x0.shape != (self.n,):
            raise ValueError("default initial state must have length n")


# -- van der Pol ---------------------------------------------------------------


@njit(cache=True)
def _vdp_f(y):
    out = np.empty(2)
    out[0] = y[1]
    out[1] = -y[0] + y[1] * (1.0 - y[0] * y[0])
    return out


@njit(cache=True)
def _vdp_jac(y):
    a = np.empty((2, 2))
    a[0, 0] = 0.0
    a[0, 1] = 1.0
    a[1, 0] = -1.0 - 2.0 * y[0] * y[1]
    a[1, 1] = 1.0 - y[0] * y[0]
    return a


def _vdp_f_net(x):
    return np.column_stack((x[:, 1], -x[:, 0] + x[:, 1] * (1.0 - x[:, 0] ** 2)))


# -- Roessler ------------------------------------------------------------------


@njit(cache=True)
def _rossler_f(y):
    out = np.empty(3)
    out[0] = -y[1] - y[2]
    out[1] = y[0] + 0.2 * y[1]
    out[2] = 0.2 + (y[0] - 9.0) * y[2]
    return out


@njit(cache=True)
def _rossler_jac(y):
    a = np.zeros((3, 3))
    a[0, 1] = -1.0
    a[0, 2] = -1.0
    a[1, 0] = 1.0
    a[1, 1] = 0.2
    a[2, 0] = y[2]
    a[2, 2] = y[0] - 9.0
    return a


def _rossler_f_net(x):
    return np.column_stack(
        (
            -x[:, 1] - x[:, 2],
            x[:, 0] + 0.2 * x[:, 1],
            0.2 + (x[:, 0] - 9.0) * x[:, 2],
        )
    )


def _build_van_der_pol() -> OscillatorModel:
    return OscillatorModel(
        name="van_der_pol",
        n=2,
        f=_vdp_f,
        jacobian=_vdp_jac,
        coupling=np.array([[0.0, 0.0], [1.0, 0.0]]),
        f_network=_vdp_f_net,
        x0=np.array([2.0, 0.0]),
    )


def _build_rossler() -> OscillatorModel:
    e = np.zeros((3, 3))
    e[0, 0] = 1.0
    return OscillatorModel(
        name="rossler",
        n=3,
        f=_rossler_f,
        jacobian=_rossler_jac,
        coupling=e,
        f_network=_rossler_f_net,
        x0=np.array([1.0, 1.0, 1.0]),
    )


_BUILDERS = {"van_der_pol": _build_van_der_pol, "rossler": _build_rossler}
MODEL_NAMES = tuple(sorted(_BUILDERS))


def model(name: str) -> OscillatorModel:
    """Construct a registered oscillator model by name."""
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}") from None


def finite_difference_jacobian(f, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of f at x, step rel_step * (1 + ||x||)."""
    x = np.asarray(x, dtype=float)
    h = rel_step * (1.0 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h))
    return np.column_stack(cols)


# -- integration ---------------------------------------------------------------


def rk4_step(rhs, x: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size h."""
    k1 = np.asarray(rhs(x))
    k2 = np.asarray(rhs(x + 0.5 * h * k1))
    k3 = np.asarray(rhs(x + 0.5 * h * k2))
    k4 = np.asarray(rhs(x + h * k3))
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(x: np.ndarray, step: int, h: float) -> None:
    m = np.abs(x).max()
    if not np.isfinite(m) or m > BLOWUP_LIMIT:
        raise BlowUpError(step, step * h)


def rk4_integrate(rhs, x0, h: float, steps: int, sample_stride: int = 1, observer=None):
    """Fixed-step RK4 with samples every `sample_stride` steps.

    Returns (times, values).  values[i] is the state at times[i], or, when an
    observer callable is given, observer(t, state).  The initial state is
    always the first sample.  A non-finite or runaway state raises
    BlowUpError carrying the offending step index.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    grab = (lambda t, s: s.copy()) if observer is None else observer
    times = [0.0]
    values = [grab(0.0, x)]
    for step in range(1, steps + 1):
        x = rk4_step(rhs, x, h)
        _check_finite(x, step, h)
        if step % sample_stride == 0 or step == steps:
            times.append(step * h)
            values.append(grab(step * h, x))
    return np.array(times), np.array(values)


def attractor_warmup(m: OscillatorModel, x0, t_transient: float, h: float = 1e-3) -> np.ndarray:
    """Integrate a single agent past its transient and return the final state."""
    if t_transient < 0.0:
        raise ValueError("transient time must be >= 0")
    steps = int(round(t_transient / h))
    x = np.asarray(x0, dtype=float).copy()
    for step in range(1, steps + 1):
        x = rk4_step(m.f, x, h)
        _check_finite(x, step, h)
    return x


# -- networks ------------------------------------------------------------------


@dataclass(eq=False)
class NetworkSystem:
    """N identical agents coupled through -(L (x) E)."""

    model: OscillatorModel
    laplacian: TridiagonalMatrix

    def __post_init__(self):
        resid = float(np.abs(self.laplacian.apply(np.ones(self.laplacian.n))).max())
        if resid > 1e-10 * max(1.0, self.laplacian.inf_norm()):
            raise ValueError(
                f"Laplacian row sums deviate from zero by {resid:.3e}; "
                "no synchronous manifold"
            )

    @property
    def n_agents(self) -> int:
        return self.laplacian.n

    @property
    def dim(self) -> int:
        return self.laplacian.n * self.model.n


def network_rhs(sys: NetworkSystem, x: np.ndarray) -> np.ndarray:
    """Stacked derivative F(x) - (L (x) E) x without forming the Kronecker product.

    Per agent i this is f(x_i) - E (sum_j L_ij x_j); the inner sum only touches
    the tridiagonal neighbors.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.dim,):
        raise ValueError(f"state must have length {sys.dim}, got {x.shape}")
    blocks = x.reshape(sys.n_agents, sys.model.n)
    drift = sys.model.f_network(blocks)
    coupled = sys.laplacian.apply(blocks) @ sys.model.coupling.T
    return (drift - coupled).ravel()


def sync_error(x: np.ndarray, n_agents: int, n: int) -> float:
    """max over adjacent agent pairs of ||x_i - x_{i+1}||_2."""
    blocks = x.reshape(n_agents, n)
    d = blocks[:-1] - blocks[1:]
    return float(np.sqrt((d * d).sum(axis=1)).max())


def sync_error_all_pairs(x: np.ndarray, n_agents: int, n: int) -> float:
    """max over all agent pairs of ||x_i - x_j||_2 (diagnostic variant)."""
    blocks = x.reshape(n_agents, n)
    d = blocks[:, None, :] - blocks[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2)).max())


@dataclass(eq=False)
class SyncSeries:
    """Synchronization-error samples of one network run."""

    times: np.ndarray
    sync_error: np.ndarray
    states: np.ndarray | None = None
    blow_up_time: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.sync_error = np.asarray(self.sync_error, dtype=float)
        if self.times.size != self.sync_error.size:
            raise ValueError("times and sync_error must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")

    def to_csv(self) -> str:
        lines = ["t,sync_error"]
        for t, e in zip(self.times, self.sync_error):
            lines.append(f"{float(t)!r},{float(e)!r}")
        return "\n".join(lines) + "\n"

    def states_to_csv(self) -> str:
        if self.states is None:
            raise ValueError("run was sampled without state snapshots")
        n_agents, n = self.states.shape[1], self.states.shape[2]
        header = ["t"] + [f"x_{i + 1}_{j + 1}" for i in range(n_agents) for j in range(n)]
        lines = [",".join(header)]
        for t, snap in zip(self.times, self.states):
            lines.append(",".join([f"{float(t)!r}"] + [f"{float(v)!r}" for v in snap.ravel()]))
        return "\n".join(lines) + "\n"


def simulate_network(
    sys: NetworkSystem,
    x0: np.ndarray,
    h: float,
    t_end: float,
    sample_stride: int = 1,
    store_states: bool = False,
) -> SyncSeries:
    """Integrate the coupled network and record the synchronization error.

    A blow-up truncates the series and is reported through blow_up_time rather
    than raised, so sweep harnesses can log diverging runs and move on.
    """
    if h <= 0.0 or t_end <= 0.0:
        raise ValueError("h and t_end must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.dim,):
        raise ValueError(f"initial state must have length {sys.dim}")
    steps = int(round(t_end / h))
    times = [0.0]
    errors = [sync_error(x, sys.n_agents, sys.model.n)]
    snaps = [x.reshape(sys.n_agents, sys.model.n).copy()] if store_states else None
    blow_up_time = None
    for step in range(1, steps + 1):
        x = rk4_step(lambda s: network_rhs(sys, s), x, h)
        try:
            _check_finite(x, step, h)
        except BlowUpError as err:
            blow_up_time = err.time
            break
        if step % sample_stride == 0 or step == steps:
            times.append(step * h)
            errors.append(sync_error(x, sys.n_agents, sys.model.n))
            if store_states:
                snaps.append(x.reshape(sys.n_agents, sys.model.n).copy())
    return SyncSeries(
        times=np.array(times),
        sync_error=np.array(errors),
        states=np.array(snaps) if store_states else None,
        blow_up_time=blow_up_time,
    )


def perturbed_sync_ic(
    attractor_point: np.ndarray, n_agents: int, variance: float, seed: int
) -> np.ndarray:
    """N copies of a point plus i.i.d. N(0, variance) noise, reproducible in seed."""
    if variance < 0.0:
        raise ValueError("variance must be >= 0")
    point = np.asarray(attractor_point, dtype=float)
    stacked = np.tile(point, n_agents)
    if variance == 0.0:
        return stacked
    noise = standard_normal(seed, stacked.size) * np.sqrt(variance)
    return stacked + noise
