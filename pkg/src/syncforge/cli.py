"""Command-line driver.

Subcommands mirror the three-step design procedure: `msf` scans the stability
function and records where it is negative, `synthesize` builds a Laplacian
with eigenvalues in a chosen interval, `simulate` validates by integrating the
coupled network, `reproduce` runs the packaged experiment presets and `verify`
re-checks an emitted Laplacian file.

Exit codes: 0 success, 1 usage or configuration error, 2 no negative MSF
interval, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dynamics import (
    MODEL_NAMES,
    BlowUpError,
    NetworkSystem,
    attractor_warmup,
    model,
    perturbed_sync_ic,
    simulate_network,
)
from .msf import (
    LyapunovSettings,
    curve_to_csv,
    default_lyapunov_settings,
    diffusive_feasibility,
    intervals_to_json,
    max_msf_over_modes,
    msf_scan,
    required_sigma,
)
from .synthesis import (
    SynthesisError,
    TridiagonalLaplacian,
    bidiagonal_optimal_laplacian,
    diffusive_laplacian,
    matrix_from_json,
    matrix_to_json,
    matrix_to_matrix_market,
    place_eigenvalues,
    symmetric_3x3_feasible,
    synthesize,
)
from .tridiag import eigenvalues, null_vector

PRESETS = ("vdp32", "vdp64", "vdp128", "rossler64", "rossler_feasibility", "sym3x3")

# Default single-agent transient per model, long enough to settle on the
# attractor before perturbing.
_WARMUP_DEFAULTS = {"van_der_pol": 100.0, "rossler": 500.0}


class ConfigError(ValueError):
    """Malformed experiment configuration."""


class SystemExit2(RuntimeError):
    """Pipeline stop: no usable negative interval."""


@dataclass
class ExperimentConfig:
    model: str = "van_der_pol"
    agents: int = 32
    strategy: str = "linear"
    interval: object = (1.0, 10.0)      # [lo, hi] or the string "msf"
    coupling: str = "synthesized"       # synthesized | diffusive | bidiagonal
    sigma: float = 1.0
    bidiagonal_eigenvalue: float = 2.0
    h: float = 1e-3
    t_end: float = 300.0
    sample_stride: int = 100
    variance: float = 1.0
    seed: int = 2026
    msf_grid: tuple = (0.0, 0.5, 0.01)  # start, stop, step
    lyapunov: dict | None = None        # LyapunovSettings overrides
    warmup: float | None = None         # attractor transient override
    out_dir: str = "runs/out"
    threads: int = 1
    predict_rate: bool = True
    store_states: bool = False

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ConfigError(
                f"unknown model {self.model!r}; known: {', '.join(MODEL_NAMES)}"
            )
        if self.agents < 2:
            raise ConfigError("agents must be >= 2")
        if self.coupling not in ("synthesized", "diffusive", "bidiagonal"):
            raise ConfigError(f"unknown coupling source {self.coupling!r}")
        if isinstance(self.interval, str):
            if self.interval != "msf":
                raise ConfigError("interval must be [lo, hi] or the string 'msf'")
        else:
            self.interval = (float(self.interval[0]), float(self.interval[1]))
        self.msf_grid = tuple(float(v) for v in self.msf_grid)
        if len(self.msf_grid) != 3 or self.msf_grid[2] <= 0.0:
            raise ConfigError("msf_grid must be [start, stop, step] with step > 0")
        if self.h <= 0.0 or self.t_end <= 0.0 or self.sample_stride < 1:
            raise ConfigError("h, t_end must be positive and sample_stride >= 1")
        if self.variance < 0.0:
            raise ConfigError("variance must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        if not isinstance(out["interval"], str):
            out["interval"] = list(out["interval"])
        out["msf_grid"] = list(out["msf_grid"])
        return out

    def lyapunov_settings(self) -> LyapunovSettings:
        base = default_lyapunov_settings(self.model)
        if not self.lyapunov:
            return base
        values = asdict(base)
        unknown = set(self.lyapunov) - set(values)
        if unknown:
            raise ConfigError(f"unknown lyapunov keys: {', '.join(sorted(unknown))}")
        values.update(self.lyapunov)
        return LyapunovSettings(**values)

    def warmup_time(self) -> float:
        if self.warmup is not None:
            return float(self.warmup)
        return _WARMUP_DEFAULTS[self.model]


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- msf -------------------------------------------------------------------


def cmd_msf(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    m = model(cfg.model)
    start, stop, step = cfg.msf_grid
    grid = np.round(np.arange(start, stop + 0.5 * step, step), 12)
    curve = msf_scan(m, grid, cfg.lyapunov_settings(), threads=cfg.threads)
    _write(out / "msf.csv", curve_to_csv(curve))
    _write(out / "intervals.json", intervals_to_json(curve.negative_intervals) + "\n")
    if not curve.negative_intervals:
        print(f"no negative interval found on [{start}, {stop}]", file=sys.stderr)
        return 2
    pretty = ", ".join(f"[{lo:.4g}, {hi:.4g}]" for lo, hi in curve.negative_intervals)
    print(f"negative on {pretty}; wrote {out / 'msf.csv'}")
    return 0


# -- synthesize --------------------------------------------------------------


def _interval_from_msf(out: Path) -> tuple[float, float]:
    path = out / "intervals.json"
    if not path.exists():
        raise SystemExit2(
            f"interval 'msf' requested but {path} does not exist; run the msf "
            "command first"
        )
    intervals = json.loads(path.read_text())
    if not intervals:
        raise SystemExit2(
            "interval 'msf' requested but the recorded MSF scan found no "
            "negative interval; eigenvalues cannot be placed"
        )
    widest = max(intervals, key=lambda iv: iv["hi"] - iv["lo"])
    lo, hi = widest["lo"], widest["hi"]
    margin = 0.05 * (hi - lo)
    return (max(lo + margin, 1e-12), hi - margin)


def _warn_if_outside_recorded_intervals(out: Path, interval: tuple[float, float]) -> None:
    path = out / "intervals.json"
    if not path.exists():
        return
    recorded = [(iv["lo"], iv["hi"]) for iv in json.loads(path.read_text())]
    lo, hi = interval
    if not any(rlo <= lo and hi <= rhi for rlo, rhi in recorded):
        print(
            f"warning: eigenvalue interval [{lo:g}, {hi:g}] is not inside any "
            f"recorded negative MSF interval {recorded}",
            file=sys.stderr,
        )


def cmd_synthesize(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    if cfg.interval == "msf":
        interval = _interval_from_msf(out)
    else:
        interval = cfg.interval
        _warn_if_outside_recorded_intervals(out, interval)

    try:
        spec = place_eigenvalues(cfg.strategy, interval, cfg.agents - 1)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    try:
        lap, report = synthesize(spec)
    except SynthesisError as err:
        print(f"synthesis failed: {err}", file=sys.stderr)
        return 3

    dense_max = float(np.abs(lap.matrix.to_dense()).max())
    offdiag_max = float(max(np.abs(lap.matrix.sub).max(), np.abs(lap.matrix.super).max()))
    _write(out / "laplacian.json", matrix_to_json(lap.matrix) + "\n")
    _write(out / "laplacian.mtx", matrix_to_matrix_market(lap.matrix))
    _write(
        out / "report.json",
        _json_dumps(
            {
                "provenance": lap.provenance,
                "agents": cfg.agents,
                "spectrum": [float(v) for v in spec.values],
                "alphas": [float(v) for v in report.alphas],
                "similarity": [float(v) for v in report.similarity],
                "null_vector": [float(v) for v in report.null_vec],
                "row_sum_residual": report.row_sum_residual,
                "spectral_residual": report.spectral_residual,
                "offdiag_sign_ok": report.offdiag_sign_ok,
                "diag_positive_ok": report.diag_positive_ok,
                "max_abs_entry": dense_max,
                "max_abs_offdiag": offdiag_max,
            }
        ),
    )
    print(
        f"synthesized {cfg.agents}-node Laplacian, spectrum in "
        f"[{spec.values[1]:.4g}, {spec.values[-1]:.4g}], max |entry| "
        f"{dense_max:.4g}; wrote {out / 'laplacian.json'}"
    )
    return 0


# -- simulate ----------------------------------------------------------------


def _build_coupling(cfg: ExperimentConfig, out: Path):
    """Returns (matrix, mode eigenvalues for the rate prediction)."""
    if cfg.coupling == "synthesized":
        path = out / "laplacian.json"
        if path.exists():
            lap = TridiagonalLaplacian(matrix_from_json(path.read_text()), "file")
            lap.validate(row_sum_tol=1e-10)
            return lap.matrix, eigenvalues(lap.matrix)
        if cfg.interval == "msf":
            interval = _interval_from_msf(out)
        else:
            interval = cfg.interval
        spec = place_eigenvalues(cfg.strategy, interval, cfg.agents - 1)
        lap, _ = synthesize(spec)
        return lap.matrix, spec.values
    if cfg.coupling == "diffusive":
        lap, spec = diffusive_laplacian(cfg.sigma, cfg.agents)
        return lap.matrix, spec.values
    lam = cfg.bidiagonal_eigenvalue
    return bidiagonal_optimal_laplacian(lam, cfg.agents), np.array([0.0, lam])


def fit_decay_rate(times: np.ndarray, errors: np.ndarray):
    """Least-squares slope of log(sync error).

    The window starts once the error has dropped below 10% of its initial
    value (past the asymmetry transient) and ends when it reaches 1e-10 or the
    run ends.  Returns (rate, (t_start, t_stop)) or (None, None) when the
    window holds fewer than two usable samples.
    """
    errors = np.asarray(errors, dtype=float)
    times = np.asarray(times, dtype=float)
    started = np.where(errors < 0.1 * errors[0])[0]
    if started.size == 0:
        return None, None
    start = started[0]
    done = np.where(errors < 1e-10)[0]
    stop = int(done[0]) if done.size else errors.size - 1
    sel = slice(start, stop + 1)
    t, e = times[sel], errors[sel]
    keep = e > 0.0
    if keep.sum() < 2:
        return None, None
    slope = np.polyfit(t[keep], np.log(e[keep]), 1)[0]
    return float(slope), (float(t[0]), float(t[-1]))


def cmd_simulate(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    m = model(cfg.model)
    matrix, modes = _build_coupling(cfg, out)
    if matrix.n != cfg.agents:
        raise ConfigError(
            f"coupling matrix order {matrix.n} does not match agents={cfg.agents}"
        )
    sys_ = NetworkSystem(m, matrix)
    point = attractor_warmup(m, m.x0, cfg.warmup_time(), cfg.h)
    x0 = perturbed_sync_ic(point, cfg.agents, cfg.variance, cfg.seed)
    series = simulate_network(
        sys_, x0, cfg.h, cfg.t_end, cfg.sample_stride, store_states=cfg.store_states
    )
    _write(out / "sync.csv", series.to_csv())
    if cfg.store_states:
        _write(out / "states.csv", series.states_to_csv())

    fitted, window = fit_decay_rate(series.times, series.sync_error)
    predicted = None
    if cfg.predict_rate and series.blow_up_time is None:
        predicted = max_msf_over_modes(m, np.asarray(modes), cfg.lyapunov_settings())
    summary = {
        "model": cfg.model,
        "agents": cfg.agents,
        "coupling": cfg.coupling,
        "t_end": cfg.t_end,
        "h": cfg.h,
        "seed": cfg.seed,
        "variance": cfg.variance,
        "final_sync_error": float(series.sync_error[-1]),
        "min_sync_error": float(series.sync_error.min()),
        "fitted_decay_rate": fitted,
        "fit_window": list(window) if window else None,
        "predicted_decay_rate": predicted,
        "blow_up_time": series.blow_up_time,
    }
    _write(out / "summary.json", _json_dumps(summary))
    if series.blow_up_time is not None:
        print(f"network blew up at t = {series.blow_up_time:g}", file=sys.stderr)
        return 3
    rate = "n/a" if fitted is None else f"{fitted:.4f}"
    print(
        f"final sync error {summary['final_sync_error']:.3e}, fitted decay rate "
        f"{rate}; wrote {out / 'sync.csv'}"
    )
    return 0


# -- verify ------------------------------------------------------------------


def cmd_verify(path: str) -> int:
    target = Path(path)
    if target.is_dir():
        target = target / "laplacian.json"
    if not target.exists():
        print(f"no laplacian file at {target}", file=sys.stderr)
        return 1
    matrix = matrix_from_json(target.read_text())
    lap = TridiagonalLaplacian(matrix, "file")
    try:
        lap.validate(row_sum_tol=1e-10)
        eigs = eigenvalues(matrix)
        span = eigs[-1] - eigs[0]
        if abs(eigs[0]) > 1e-8 * max(span, 1.0):
            raise ValueError(f"lambda_1 = {eigs[0]:.3e} is not zero to tolerance")
        if eigs[1] <= 0.0:
            raise ValueError("lambda_2 is not positive")
        v = null_vector(matrix)
        flat = np.full(matrix.n, 1.0 / np.sqrt(matrix.n))
        if np.abs(v - flat).max() > 1e-8:
            raise ValueError("null vector is not aligned with the all-ones vector")
    except ValueError as err:
        print(f"verification FAILED: {err}", file=sys.stderr)
        return 3
    print(
        f"ok: order {matrix.n}, spectrum [{eigs[0]:.3e} .. {eigs[-1]:.4g}], "
        "structure and null vector verified"
    )
    return 0


# -- reproduce ---------------------------------------------------------------


def _preset_vdp32(out: Path, seed: int, threads: int) -> int:
    base = dict(model="van_der_pol", agents=32, seed=seed, threads=threads)
    cfg = ExperimentConfig.from_dict(
        {**base, "msf_grid": [0.0, 0.5, 0.01], "out_dir": str(out)}
    )
    code = cmd_msf(cfg)
    if code not in (0, 2):
        return code
    cfg = ExperimentConfig.from_dict(
        {**base, "strategy": "linear", "interval": [1.0, 10.0], "out_dir": str(out)}
    )
    code = cmd_synthesize(cfg)
    if code != 0:
        return code
    cfg = ExperimentConfig.from_dict(
        {**base, "interval": [1.0, 10.0], "t_end": 300.0, "out_dir": str(out)}
    )
    return cmd_simulate(cfg)


def _preset_vdp64(out: Path, seed: int, threads: int) -> int:
    runs = [
        ("linear", {"strategy": "linear", "interval": [1.0, 10.0]}),
        ("chebyshev", {"strategy": "chebyshev", "interval": [1.0, 10.0]}),
        ("bidiagonal_2", {"coupling": "bidiagonal", "bidiagonal_eigenvalue": 2.0}),
        ("bidiagonal_8", {"coupling": "bidiagonal", "bidiagonal_eigenvalue": 8.0}),
    ]
    for name, extra in runs:
        sub = out / name
        base = {
            "model": "van_der_pol",
            "agents": 64,
            "seed": seed,
            "threads": threads,
            "t_end": 400.0,
            "out_dir": str(sub),
            **extra,
        }
        if extra.get("coupling") != "bidiagonal":
            code = cmd_synthesize(ExperimentConfig.from_dict(base))
            if code != 0:
                return code
        code = cmd_simulate(ExperimentConfig.from_dict(base))
        if code not in (0, 3):  # a diverging bidiagonal transient is data, not an error
            return code
    return 0


def _preset_vdp128(out: Path, seed: int, threads: int) -> int:
    runs = [
        ("chebyshev", {"strategy": "chebyshev", "interval": [1.0, 50.0]}),
        ("bidiagonal_2", {"coupling": "bidiagonal", "bidiagonal_eigenvalue": 2.0}),
    ]
    for name, extra in runs:
        sub = out / name
        base = {
            "model": "van_der_pol",
            "agents": 128,
            "seed": seed,
            "threads": threads,
            "t_end": 500.0,
            "out_dir": str(sub),
            **extra,
        }
        if extra.get("coupling") != "bidiagonal":
            code = cmd_synthesize(ExperimentConfig.from_dict(base))
            if code != 0:
                return code
        code = cmd_simulate(ExperimentConfig.from_dict(base))
        if code not in (0, 3):
            return code
    return 0


def _preset_rossler64(out: Path, seed: int, threads: int) -> int:
    cfg = ExperimentConfig.from_dict(
        {
            "model": "rossler",
            "agents": 64,
            "seed": seed,
            "threads": threads,
            "msf_grid": [0.0, 5.0, 0.05],
            "out_dir": str(out),
        }
    )
    code = cmd_msf(cfg)
    if code not in (0, 2):
        return code
    # chaotic transients before the exponential decay regime run for a few
    # hundred time units, so the horizon is generous
    for name, strategy in (("linear", "linear"), ("chebyshev", "chebyshev")):
        sub = out / name
        base = {
            "model": "rossler",
            "agents": 64,
            "seed": seed,
            "threads": threads,
            "strategy": strategy,
            "interval": [0.5, 3.0],
            "t_end": 600.0,
            "out_dir": str(sub),
        }
        code = cmd_synthesize(ExperimentConfig.from_dict(base))
        if code != 0:
            return code
        code = cmd_simulate(ExperimentConfig.from_dict(base))
        if code != 0:
            return code
    return 0


def _preset_rossler_feasibility(out: Path) -> int:
    interval = (0.19, 4.61)
    rows = []
    first_infeasible = None
    for n in range(2, 17):
        res = diffusive_feasibility(interval, n)
        if not res.feasible and first_infeasible is None:
            first_infeasible = n
        rows.append(
            {
                "agents": n,
                "eigenvalue_ratio": res.ratio,
                "feasible": res.feasible,
                "sigma_lo": None if res.sigma_range is None else res.sigma_range[0],
                "sigma_hi": None if res.sigma_range is None else res.sigma_range[1],
            }
        )
    table = {
        "interval": list(interval),
        "interval_ratio": interval[1] / interval[0],
        "first_infeasible_agents": first_infeasible,
        "required_sigma_examples": {
            str(n): required_sigma(interval[0], n) for n in (8, 16, 64, 128)
        },
        "rows": rows,
    }
    _write(out / "feasibility.json", _json_dumps(table))
    lines = ["agents,eigenvalue_ratio,feasible,sigma_lo,sigma_hi"]
    for r in rows:
        lines.append(
            f"{r['agents']},{r['eigenvalue_ratio']!r},{str(r['feasible']).lower()},"
            f"{'' if r['sigma_lo'] is None else repr(r['sigma_lo'])},"
            f"{'' if r['sigma_hi'] is None else repr(r['sigma_hi'])}"
        )
    _write(out / "feasibility.csv", "\n".join(lines) + "\n")
    print(f"first infeasible agent count: {first_infeasible}")
    return 0


def _preset_sym3x3(out: Path) -> int:
    lam2_grid = np.linspace(0.5, 5.0, 10)
    ratio_grid = np.array([1.5, 2.0, 2.5, 3.0, 4.0, 6.0])
    lines = ["lam2,lam3,feasible,boundary,x1,y1,x2,y2"]
    for lam2 in lam2_grid:
        for ratio in ratio_grid:
            lam3 = lam2 * ratio
            res = symmetric_3x3_feasible(float(lam2), float(lam3))
            boundary = res.feasible and len(res.solutions) == 1
            cells = [repr(float(lam2)), repr(float(lam3)),
                     str(res.feasible).lower(), str(boundary).lower()]
            flat = [v for pair in res.solutions for v in pair]
            flat += [None] * (4 - len(flat))
            cells += ["" if v is None else repr(float(v)) for v in flat]
            lines.append(",".join(cells))
    _write(out / "sym3x3.csv", "\n".join(lines) + "\n")
    print(f"classified {lam2_grid.size * ratio_grid.size} spectra; wrote {out / 'sym3x3.csv'}")
    return 0


def cmd_reproduce(preset: str, out_dir: str, seed: int, threads: int) -> int:
    out = Path(out_dir) / preset
    if preset == "vdp32":
        return _preset_vdp32(out, seed, threads)
    if preset == "vdp64":
        return _preset_vdp64(out, seed, threads)
    if preset == "vdp128":
        return _preset_vdp128(out, seed, threads)
    if preset == "rossler64":
        return _preset_rossler64(out, seed, threads)
    if preset == "rossler_feasibility":
        return _preset_rossler_feasibility(out)
    if preset == "sym3x3":
        return _preset_sym3x3(out)
    raise ConfigError(f"unknown preset {preset!r}")


# -- entry point -------------------------------------------------------------


def _env_threads() -> int | None:
    raw = os.environ.get("SYNCFORGE_THREADS")
    if raw is None:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncforge",
        description="design nearest-neighbor couplings that stabilize synchronization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("msf", "scan the master stability function and record negative intervals"),
        ("synthesize", "build a tridiagonal Laplacian with prescribed spectrum"),
        ("simulate", "integrate the coupled network and record the sync error"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file (flags override fields)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="perturbation / tangent seed")
        p.add_argument("--threads", type=int, help="worker processes for MSF grids")
    p = sub.add_parser("reproduce", help="run a packaged experiment preset")
    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", type=int, default=2026)
    p.add_argument("--threads", type=int)
    p = sub.add_parser("verify", help="re-check an emitted laplacian.json")
    p.add_argument("path", help="laplacian.json or its directory")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return 1 if err.code not in (0, None) else 0

    threads = getattr(args, "threads", None) or _env_threads()
    try:
        if args.command == "verify":
            return cmd_verify(args.path)
        if args.command == "reproduce":
            return cmd_reproduce(args.preset, args.out, args.seed, threads or 1)
        overrides = {"out_dir": args.out, "seed": args.seed, "threads": threads}
        cfg = load_config(args.config, overrides)
        if args.command == "msf":
            return cmd_msf(cfg)
        if args.command == "synthesize":
            return cmd_synthesize(cfg)
        return cmd_simulate(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except SystemExit2 as err:
        print(str(err), file=sys.stderr)
        return 2
    except (BlowUpError, SynthesisError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
