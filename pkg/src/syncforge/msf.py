"""Master Stability Function machinery.

The MSF at a coupling parameter eta is the largest Lyapunov exponent of the
variational system z' = (Df(x(t)) - eta E) z evaluated along a reference orbit
of the single agent.  The exponent is estimated with the classic single-vector
renormalization method; a whole eta grid shares one reference orbit, so scans
co-integrate all tangent vectors in a batch.  Registered models run through a
numba-compiled kernel, arbitrary Python models through a numpy fallback.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from numba import njit
from numba.extending import is_jitted

from .dynamics import MODEL_NAMES, BlowUpError, OscillatorModel
from .dynamics import model as build_model
from .rng import standard_normal
from .synthesis import diffusive_spectrum

__all__ = [
    "LyapunovSettings",
    "LyapunovEstimate",
    "MsfCurve",
    "default_lyapunov_settings",
    "variational_rhs",
    "largest_lyapunov",
    "msf_scan",
    "negative_intervals",
    "required_sigma",
    "DiffusiveFeasibility",
    "diffusive_feasibility",
    "curve_to_csv",
    "intervals_to_json",
    "max_msf_over_modes",
]

_Z_FLOOR = 1e-300


@dataclass
class LyapunovSettings:
    """Observation window for the exponent estimate.

    Exponents of chaotic orbits converge like 1/total_time, so the defaults
    per model (see default_lyapunov_settings) are generous.
    """

    warmup_time: float
    total_time: float
    renorm_interval: float = 1.0
    h: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if min(self.warmup_time, self.total_time, self.renorm_interval, self.h) <= 0.0:
            raise ValueError("all times and the step size must be positive")
        if self.total_time < 2.0 * self.renorm_interval:
            raise ValueError("total_time must cover several renormalization intervals")


def default_lyapunov_settings(model_name: str) -> LyapunovSettings:
    if model_name == "van_der_pol":
        return LyapunovSettings(warmup_time=100.0, total_time=2000.0)
    if model_name == "rossler":
        return LyapunovSettings(warmup_time=500.0, total_time=20000.0)
    raise ValueError(f"no default settings for model {model_name!r}")


class LyapunovEstimate(NamedTuple):
    exponent: float
    convergence: float  # |half-sample - full-sample| exponent difference


@dataclass(eq=False)
class MsfCurve:
    """Largest-exponent values over an eta grid with detected negative intervals."""

    etas: np.ndarray
    values: np.ndarray
    negative_intervals: list[tuple[float, float]]

    def __post_init__(self):
        self.etas = np.asarray(self.etas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.etas.size != self.values.size:
            raise ValueError("grid and values must have equal length")
        if self.etas.size > 1 and np.any(np.diff(self.etas) <= 0.0):
            raise ValueError("eta grid must be strictly increasing")


def variational_rhs(m: OscillatorModel, reference_state, eta: float, z) -> np.ndarray:
    """(Df(x) - eta E) z for one tangent vector."""
    if eta < 0.0:
        raise ValueError("eta must be >= 0")
    x = np.asarray(reference_state, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (m.n,) or z.shape != (m.n,):
        raise ValueError(f"state and tangent vector must have length {m.n}")
    return (np.asarray(m.jacobian(x)) - eta * m.coupling) @ z


# -- batched renormalization engines --------------------------------------------


@njit(cache=True)
def _var_apply(a, e, etas, z, out):
    m, n = z.shape
    for i in range(m):
        for r in range(n):
            s = 0.0
            t = 0.0
            for c in range(n):
                s += a[r, c] * z[i, c]
                t += e[r, c] * z[i, c]
            out[i, r] = s - etas[i] * t


def _make_kernel(f, jac, e_mat):
    @njit(cache=False)
    def run(x0, etas, h, warm_blocks, main_blocks, renorm_every, z0):
        n = x0.shape[0]
        m = etas.shape[0]
        x = x0.copy()
        z = z0.copy()
        k1 = np.empty((m, n))
        k2 = np.empty((m, n))
        k3 = np.empty((m, n))
        k4 = np.empty((m, n))
        logs = np.zeros(m)
        logs_half = np.zeros(m)
        failed = np.zeros(m, np.bool_)
        half = main_blocks // 2
        status = 0
        blow_block = -1
        for block in range(warm_blocks + main_blocks):
            for _ in range(renorm_every):
                fx1 = f(x)
                _var_apply(jac(x), e_mat, etas, z, k1)
                x2 = x + (0.5 * h) * fx1
                fx2 = f(x2)
                _var_apply(jac(x2), e_mat, etas, z + (0.5 * h) * k1, k2)
                x3 = x + (0.5 * h) * fx2
                fx3 = f(x3)
                _var_apply(jac(x3), e_mat, etas, z + (0.5 * h) * k2, k3)
                x4 = x + h * fx3
                fx4 = f(x4)
                _var_apply(jac(x4), e_mat, etas, z + h * k3, k4)
                x = x + (h / 6.0) * (fx1 + 2.0 * fx2 + 2.0 * fx3 + fx4)
                z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            for r in range(n):
                if not (np.isfinite(x[r]) and np.abs(x[r]) < 1e8):
                    status = 1
                    blow_block = block
            if status != 0:
                break
            for i in range(m):
                g = 0.0
                for r in range(n):
                    g += z[i, r] * z[i, r]
                g = np.sqrt(g)
                if not np.isfinite(g) or g < _Z_FLOOR:
                    failed[i] = True
                    g = 1.0
                lg = np.log(g)
                if block >= warm_blocks:
                    logs[i] += lg
                    if block - warm_blocks < half:
                        logs_half[i] += lg
                for r in range(n):
                    z[i, r] /= g
        return logs, logs_half, failed, status, blow_block

    return run


_KERNELS: dict = {}


def _kernel_for(m: OscillatorModel):
    key = (id(m.f), id(m.jacobian), m.coupling.tobytes())
    if key not in _KERNELS:
        _KERNELS[key] = _make_kernel(m.f, m.jacobian, np.ascontiguousarray(m.coupling))
    return _KERNELS[key]


def _benettin_numpy(m, etas, h, warm_blocks, main_blocks, renorm_every, z0):
    f, jac, e = m.f, m.jacobian, m.coupling
    x = m.x0.copy()
    z = z0.copy()
    col = etas[:, None]
    logs = np.zeros(etas.size)
    logs_half = np.zeros(etas.size)
    failed = np.zeros(etas.size, dtype=bool)
    half = main_blocks // 2
    for block in range(warm_blocks + main_blocks):
        for _ in range(renorm_every):
            fx1 = np.asarray(f(x))
            a = np.asarray(jac(x))
            k1 = z @ a.T - col * (z @ e.T)
            x2 = x + 0.5 * h * fx1
            fx2 = np.asarray(f(x2))
            a = np.asarray(jac(x2))
            z2 = z + 0.5 * h * k1
            k2 = z2 @ a.T - col * (z2 @ e.T)
            x3 = x + 0.5 * h * fx2
            fx3 = np.asarray(f(x3))
            a = np.asarray(jac(x3))
            z3 = z + 0.5 * h * k2
            k3 = z3 @ a.T - col * (z3 @ e.T)
            x4 = x + h * fx3
            fx4 = np.asarray(f(x4))
            a = np.asarray(jac(x4))
            z4 = z + h * k3
            k4 = z4 @ a.T - col * (z4 @ e.T)
            x = x + (h / 6.0) * (fx1 + 2.0 * fx2 + 2.0 * fx3 + fx4)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mx = np.abs(x).max()
        if not np.isfinite(mx) or mx > 1e8:
            return logs, logs_half, failed, 1, block
        g = np.sqrt((z * z).sum(axis=1))
        bad = ~np.isfinite(g) | (g < _Z_FLOOR)
        failed |= bad
        g[bad] = 1.0
        if block >= warm_blocks:
            lg = np.log(g)
            logs += lg
            if block - warm_blocks < half:
                logs_half += lg
        z /= g[:, None]
    return logs, logs_half, failed, 0, -1


def _benettin(m: OscillatorModel, etas: np.ndarray, settings: LyapunovSettings):
    etas = np.ascontiguousarray(etas, dtype=float)
    if etas.size == 0:
        raise ValueError("empty eta batch")
    if np.any(etas < 0.0) or not np.all(np.isfinite(etas)):
        raise ValueError("eta values must be finite and >= 0")
    renorm_every = max(1, int(round(settings.renorm_interval / settings.h)))
    block_t = renorm_every * settings.h
    warm_blocks = max(1, int(round(settings.warmup_time / block_t)))
    main_blocks = max(2, int(round(settings.total_time / block_t)))

    direction = standard_normal(settings.seed, m.n)
    direction /= np.linalg.norm(direction)
    z0 = np.ascontiguousarray(np.tile(direction, (etas.size, 1)))

    if is_jitted(m.f) and is_jitted(m.jacobian):
        kernel = _kernel_for(m)
        logs, logs_half, failed, status, blow_block = kernel(
            np.ascontiguousarray(m.x0),
            etas,
            settings.h,
            warm_blocks,
            main_blocks,
            renorm_every,
            z0,
        )
    else:
        logs, logs_half, failed, status, blow_block = _benettin_numpy(
            m, etas, settings.h, warm_blocks, main_blocks, renorm_every, z0
        )
    if status == 1:
        raise BlowUpError(blow_block * renorm_every, blow_block * block_t)

    total = main_blocks * block_t
    half_t = (main_blocks // 2) * block_t
    exponents = logs / total
    convergences = np.abs(logs_half / half_t - exponents)
    exponents[failed] = np.nan
    convergences[failed] = np.nan
    return exponents, convergences


def largest_lyapunov(
    m: OscillatorModel, eta: float, settings: LyapunovSettings
) -> LyapunovEstimate:
    """Largest Lyapunov exponent of the variational system at one eta."""
    if eta < 0.0:
        raise ValueError("eta must be >= 0")
    exps, convs = _benettin(m, np.array([float(eta)]), settings)
    if np.isnan(exps[0]):
        raise RuntimeError(
            "tangent vector collapsed below the floating-point floor between "
            "renormalizations; use a smaller renorm_interval"
        )
    return LyapunovEstimate(float(exps[0]), float(convs[0]))


def _scan_worker(model_name: str, etas: list[float], settings_dict: dict):
    m = build_model(model_name)
    exps, _ = _benettin(m, np.asarray(etas), LyapunovSettings(**settings_dict))
    return exps


def msf_scan(
    m: OscillatorModel,
    etas: np.ndarray,
    settings: LyapunovSettings,
    threads: int = 1,
) -> MsfCurve:
    """Exponent at every grid point (shared reference orbit, batched tangents).

    Grid points are independent; with threads > 1 and a registered model the
    grid is chunked across worker processes.  Points whose tangent vector
    underflows are reported as NaN rather than aborting the scan.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.size == 0:
        raise ValueError("empty eta grid")
    if etas.size > 1 and np.any(np.diff(etas) <= 0.0):
        raise ValueError("eta grid must be strictly increasing")

    if threads > 1 and m.name in MODEL_NAMES:
        chunks = np.array_split(etas, min(threads, etas.size))
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(
                pool.map(
                    _scan_worker,
                    [m.name] * len(chunks),
                    [c.tolist() for c in chunks],
                    [asdict(settings)] * len(chunks),
                )
            )
        values = np.concatenate(parts)
    else:
        values, _ = _benettin(m, etas, settings)
    return MsfCurve(etas, values, negative_intervals(etas, values))


def negative_intervals(etas, values=None) -> list[tuple[float, float]]:
    """Maximal sub-intervals where the curve is negative.

    Interval endpoints interior to the grid are refined by linear
    interpolation between the bracketing grid points; an interval touching the
    grid edge keeps the edge eta (right-open if still negative at the end).
    Accepts an MsfCurve or a pair of arrays.  NaN values break intervals.
    """
    if values is None:
        etas, values = etas.etas, etas.values
    etas = np.asarray(etas, dtype=float)
    values = np.asarray(values, dtype=float)
    neg = np.isfinite(values) & (values < 0.0)
    out: list[tuple[float, float]] = []
    i = 0
    while i < etas.size:
        if not neg[i]:
            i += 1
            continue
        j = i
        while j + 1 < etas.size and neg[j + 1]:
            j += 1
        if i > 0 and np.isfinite(values[i - 1]):
            v0, v1 = values[i - 1], values[i]
            lo = etas[i - 1] + (etas[i] - etas[i - 1]) * v0 / (v0 - v1)
        else:
            lo = etas[i]
        if j + 1 < etas.size and np.isfinite(values[j + 1]):
            v0, v1 = values[j], values[j + 1]
            hi = etas[j] + (etas[j + 1] - etas[j]) * v0 / (v0 - v1)
        else:
            hi = etas[j]
        out.append((float(lo), float(hi)))
        i = j + 1
    return out


def required_sigma(eta_threshold: float, n: int) -> float:
    """Diffusive coupling strength needed so sigma * lambda_2 exceeds a threshold."""
    if eta_threshold <= 0.0:
        raise ValueError("threshold must be positive")
    if n < 2:
        raise ValueError("need at least 2 agents")
    lam2 = 4.0 * np.sin(np.pi / (2.0 * n)) ** 2
    return float(eta_threshold / lam2)


@dataclass
class DiffusiveFeasibility:
    feasible: bool
    ratio: float                                # lambda_N / lambda_2
    sigma_range: tuple[float, float] | None     # open interval of admissible sigma


def diffusive_feasibility(interval: tuple[float, float], n: int) -> DiffusiveFeasibility:
    """Can sigma * (diffusive spectrum) fit inside a negative-MSF interval?

    Feasible iff lambda_N / lambda_2 < eta_2 / eta_1; the admissible coupling
    strengths then form the open interval (eta_1 / lambda_2, eta_2 / lambda_N).
    """
    eta1, eta2 = float(interval[0]), float(interval[1])
    if not 0.0 < eta1 < eta2:
        raise ValueError("need 0 < eta1 < eta2")
    if n < 2:
        raise ValueError("need at least 2 agents")
    lams = diffusive_spectrum(1.0, n)
    ratio = float(lams[-1] / lams[1])
    if ratio < eta2 / eta1:
        return DiffusiveFeasibility(True, ratio, (eta1 / lams[1], eta2 / lams[-1]))
    return DiffusiveFeasibility(False, ratio, None)


def max_msf_over_modes(
    m: OscillatorModel, mode_eigenvalues: np.ndarray, settings: LyapunovSettings
) -> float:
    """Largest exponent over the nonzero coupling modes (predicted decay rate).

    The structural zero eigenvalue of a Laplacian comes back from the solver
    as roundoff-sized, so modes are filtered by a relative threshold.
    """
    modes = np.asarray(mode_eigenvalues, dtype=float)
    modes = np.unique(modes[modes > 1e-9 * max(1.0, modes.max(initial=0.0))])
    if modes.size == 0:
        raise ValueError("no nonzero modes given")
    exps, _ = _benettin(m, modes, settings)
    if np.all(np.isnan(exps)):
        raise RuntimeError("all mode exponents failed")
    return float(np.nanmax(exps))


def curve_to_csv(curve: MsfCurve) -> str:
    lines = ["eta,msf"]
    for e, v in zip(curve.etas, curve.values):
        lines.append(f"{float(e)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


def intervals_to_json(intervals: list[tuple[float, float]]) -> str:
    return json.dumps([{"lo": float(lo), "hi": float(hi)} for lo, hi in intervals])
