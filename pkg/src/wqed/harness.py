"""Config-driven run orchestration, cross-engine comparison and export.

Configs are single flat TOML files (comments allowed).  All rates and
times are in units of the total decay rate, gamma = 1.  Recognized keys:

    engine            "scatter" | "mps" | "compare"
    mode              "symmetric" | "chiral"
    gamma_r, gamma_l  decay rates into the two directions
    delta             emitter detuning from the pulse carrier (chiral)
    n_photons         Fock number of the input pulse
    pulse_t_c         Gaussian pulse center
    pulse_sigma_t     Gaussian pulse duration
    t_start, dt,
    n_steps           output time grid
    observables       list out of "populations", "g1_XY", "g2_XY"
                      with X, Y in {R, L}
    out_dir           artifact directory
    prefix            artifact name prefix (default "<engine>_n<N>_<mode>")
    tolerance         pass threshold for compare mode
    n_max             per-bin photon cap, 0 = automatic
    chi_max, svd_cutoff, leak_tol, check_every, conservation_tol
                      time-bin engine knobs
    quad_tol          frequency-engine quadrature refinement tolerance
    fig3_sigmas, fig3_w_max, fig3_n_points
                      interference-map export controls

Artifacts are deterministic for a fixed config: CSV series and Re/Im map
files, every one carrying '#'-prefixed key=value metadata (engine,
parameters, grid, code version, tolerances).
"""

from __future__ import annotations

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import __version__
from .errors import AxisMismatch, ConfigError
from .grids import SimGrid
from .maps import ComplexMap2D
from .pulse import Gaussian, PulseSpec
from .scatter1 import Mode, SystemParams, g1_one_photon, tls_population_1ph
from .scatter2 import (
    QuadratureSpec,
    g1_two_photon,
    g2_two_photon,
    i_lin_map,
    i_nlin_map,
    tls_population_scatter,
)
from .timebin import (
    TimeBinConfig,
    build_fock_mps,
    evolve,
    measure_g1,
    measure_g2,
    measure_populations,
)

log = logging.getLogger("wqed.harness")

ENGINES = ("scatter", "mps", "compare")

#: floor for relative discrepancies on (near-)zero data
DISCREPANCY_FLOOR = 1e-12


@dataclass(frozen=True)
class RunConfig:
    engine: str
    params: SystemParams
    spec: PulseSpec
    grid: SimGrid
    observables: tuple
    out_dir: Path
    prefix: str
    tolerance: float
    timebin: TimeBinConfig
    quad: QuadratureSpec
    fig3_sigmas: tuple
    fig3_w_max: float
    fig3_n_points: int


def _takes(raw: dict, key: str, kind, default):
    if key not in raw:
        return default
    val = raw.pop(key)
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool):
        raise ConfigError(
            f"key '{key}': expected {kind.__name__}, got {type(val).__name__}"
        )
    return val


_OBSERVABLE_NAMES = ("populations", "g1_RR", "g1_RL", "g1_LR", "g1_LL",
                     "g2_RR", "g2_RL", "g2_LR", "g2_LL")


def load_config(path, out_dir_override=None) -> RunConfig:
    """Parse and validate a flat TOML run configuration."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc

    engine = _takes(raw, "engine", str, "scatter")
    if engine not in ENGINES:
        raise ConfigError(f"key 'engine': must be one of {ENGINES}, got {engine!r}")
    mode_name = _takes(raw, "mode", str, "symmetric")
    try:
        mode = Mode(mode_name)
    except ValueError:
        raise ConfigError(
            f"key 'mode': must be 'symmetric' or 'chiral', got {mode_name!r}"
        ) from None
    params = SystemParams(
        gamma_r=_takes(raw, "gamma_r", float, 0.5),
        gamma_l=_takes(raw, "gamma_l", float, 0.5),
        delta=_takes(raw, "delta", float, 0.0),
        mode=mode,
    )
    n_photons = _takes(raw, "n_photons", int, 1)
    spec = PulseSpec(
        n_photons,
        Gaussian(
            _takes(raw, "pulse_t_c", float, 3.0),
            _takes(raw, "pulse_sigma_t", float, 1.0),
        ),
    )
    grid = SimGrid(
        _takes(raw, "t_start", float, 0.0),
        _takes(raw, "dt", float, 0.02),
        _takes(raw, "n_steps", int, 600),
    )

    default_obs = ["populations", "g1_RR"] + (["g2_RR"] if n_photons >= 2 else [])
    observables = tuple(_takes(raw, "observables", list, default_obs))
    for name in observables:
        if name not in _OBSERVABLE_NAMES:
            raise ConfigError(
                f"key 'observables': unknown entry {name!r}"
                f" (choose from {_OBSERVABLE_NAMES})"
            )
        if "L" in name[3:] and mode is Mode.CHIRAL:
            raise ConfigError(
                f"key 'observables': {name!r} needs a left channel,"
                " but mode is chiral"
            )

    out_dir = Path(_takes(raw, "out_dir", str, "out"))
    if out_dir_override:
        out_dir = Path(out_dir_override)
    prefix = _takes(raw, "prefix", str, "") or f"{engine}_n{n_photons}_{mode.value}"
    tolerance = _takes(raw, "tolerance", float, 0.02)
    if not 0 < tolerance < 1:
        raise ConfigError(f"key 'tolerance': must be in (0, 1), got {tolerance}")

    n_max = _takes(raw, "n_max", int, 0)
    timebin = TimeBinConfig(
        params=params,
        grid=grid,
        n_max=None if n_max == 0 else n_max,
        chi_max=_takes(raw, "chi_max", int, 64),
        svd_cutoff=_takes(raw, "svd_cutoff", float, 1e-10),
        leak_tol=_takes(raw, "leak_tol", float, 1e-4),
        check_every=_takes(raw, "check_every", int, 50),
        conservation_tol=_takes(raw, "conservation_tol", float, 1e-4),
    )
    quad = QuadratureSpec(tol=_takes(raw, "quad_tol", float, 1e-6))
    fig3_sigmas = tuple(
        float(s) for s in _takes(raw, "fig3_sigmas", list, [0.5, 1.0, 5.0])
    )
    fig3_w_max = _takes(raw, "fig3_w_max", float, 4.0)
    fig3_n_points = _takes(raw, "fig3_n_points", int, 161)

    if raw:
        raise ConfigError(
            f"unknown config key(s): {', '.join(sorted(raw))}"
        )
    if engine == "compare" and n_photons > 2:
        raise ConfigError(
            "compare mode requires n_photons <= 2"
            " (the scattering engine stops at the pair level)"
        )
    if engine == "scatter" and n_photons > 2:
        raise ConfigError("the scattering engine supports n_photons <= 2")
    return RunConfig(
        engine=engine,
        params=params,
        spec=spec,
        grid=grid,
        observables=observables,
        out_dir=out_dir,
        prefix=prefix,
        tolerance=tolerance,
        timebin=timebin,
        quad=quad,
        fig3_sigmas=fig3_sigmas,
        fig3_w_max=fig3_w_max,
        fig3_n_points=fig3_n_points,
    )


# -- engine execution -----------------------------------------------------


@dataclass
class EngineResult:
    """In-memory observables of one engine run (native axes per series)."""

    label: str
    series: dict  # name -> (times, values)
    maps: dict  # observable name -> ComplexMap2D
    diagnostics: dict


def _map_channels(name: str) -> tuple:
    return (name[3], name[4])


def run_scatter(config: RunConfig, observables=None) -> EngineResult:
    """Frequency-domain engine run (Fock pulses with 1 or 2 photons)."""
    obs = config.observables if observables is None else observables
    spec, params, grid = config.spec, config.params, config.grid
    series, maps = {}, {}
    diagnostics = {}
    if "populations" in obs:
        pop = tls_population_scatter(spec, params, grid, quad=config.quad)
        series["n_tls"] = (pop.times, pop.n_tls)
        series["n_pulse"] = (pop.times, pop.n_pulse)
        for ch, flux in pop.n_out.items():
            series[f"n_{ch}"] = (pop.times, flux)
        diagnostics["total_emitted"] = float(pop.total_emitted)
    for name in obs:
        if name == "populations":
            continue
        kind, channels = name[:2], _map_channels(name)
        if kind == "g1":
            if spec.n_photons == 1:
                maps[name] = g1_one_photon(spec, params, grid, channels)
            else:
                maps[name] = g1_two_photon(
                    spec, params, grid, channels, quad=config.quad
                )
        else:
            if spec.n_photons == 1:
                # a single photon has no pair correlations
                zero = np.zeros((grid.n, grid.n), dtype=complex)
                maps[name] = ComplexMap2D(
                    grid.times, grid.times, zero,
                    {"observable": "g2", "engine": "scatter", "channels": name[3:]},
                )
            else:
                maps[name] = g2_two_photon(
                    spec, params, grid, channels, quad=config.quad
                )
    return EngineResult("scatter", series, maps, diagnostics)


def run_mps(config: RunConfig, observables=None) -> EngineResult:
    """Time-bin engine run (any supported photon number)."""
    obs = config.observables if observables is None else observables
    state = build_fock_mps(config.spec, config.timebin)
    record = evolve(state, config.timebin)
    pops = measure_populations(record)
    series, maps = {}, {}
    if "populations" in obs:
        series["n_tls"] = (pops.step_times, pops.n_tls)
        series["n_pulse"] = (pops.bin_times, pops.n_pulse)
        for ch, flux in pops.n_out.items():
            series[f"n_{ch}"] = (pops.bin_times, flux)
    for name in obs:
        if name == "populations":
            continue
        measure = measure_g1 if name[:2] == "g1" else measure_g2
        maps[name] = measure(state, _map_channels(name))
    diagnostics = {
        "truncation_error": float(pops.truncation_error),
        "excitation_drift": float(pops.excitation_drift),
        "closure_residual": float(pops.closure_residual),
        "max_bond_dim": int(max(state.mps.bond_dims, default=1)),
    }
    return EngineResult("mps", series, maps, diagnostics)


# -- artifact writing -----------------------------------------------------


def _base_meta(config: RunConfig, engine_label: str) -> dict:
    shape = config.spec.shape
    meta = {
        "version": __version__,
        "engine": engine_label,
        "units": "gamma=1",
        "mode": config.params.mode.value,
        "gamma_r": repr(config.params.gamma_r),
        "gamma_l": repr(config.params.gamma_l),
        "delta": repr(config.params.delta),
        "n_photons": repr(config.spec.n_photons),
        "grid_t0": repr(config.grid.t0),
        "grid_dt": repr(config.grid.dt),
        "grid_n": repr(config.grid.n),
    }
    if isinstance(shape, Gaussian):
        meta["pulse_t_c"] = repr(shape.t_c)
        meta["pulse_sigma_t"] = repr(shape.sigma_t)
    if engine_label == "mps":
        meta["chi_max"] = repr(config.timebin.chi_max)
        meta["svd_cutoff"] = repr(config.timebin.svd_cutoff)
    return meta


def write_series_csv(path, meta: dict, columns: dict):
    """CSV with '#' key=value header; deterministic %.17e rows."""
    names = list(columns)
    rows = np.column_stack([np.asarray(columns[c], dtype=float) for c in names])
    with open(path, "w") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}={val}\n")
        fh.write("# columns: " + ",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(f"{x:.17e}" for x in row) + "\n")


def read_series_csv(path):
    """Inverse of :func:`write_series_csv` -> (meta, {column: array})."""
    meta, names = {}, None
    data = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# columns:"):
                names = [c.strip() for c in line.split(":", 1)[1].split(",")]
            elif line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line:
                data.append([float(x) for x in line.split(",")])
    if names is None:
        raise ConfigError(f"{path}: missing '# columns:' header")
    arr = np.asarray(data)
    return meta, {name: arr[:, k] for k, name in enumerate(names)}


def _write_result(config: RunConfig, result: EngineResult, tag: str = "") -> list:
    """Write one engine result's artifacts; returns the paths."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    prefix = config.prefix + (f"_{tag}" if tag else "")
    written = []
    if result.series:
        meta = _base_meta(config, result.label)
        for key, val in sorted(result.diagnostics.items()):
            meta[key] = repr(val)
        if result.label == "mps":
            # fluxes and n_pulse are bin-centered: they live half a step
            # before the n_tls sample on the same row
            meta["flux_sample_offset"] = repr(-0.5 * config.grid.dt)
        names = ["n_tls", "n_pulse"] + sorted(
            k for k in result.series if k.startswith("n_") and k[2:] in ("R", "L")
        )
        tls_times = result.series["n_tls"][0]
        columns = {"time": tls_times}
        for name in names:
            columns[name] = result.series[name][1]
        path = config.out_dir / f"{prefix}_populations.csv"
        write_series_csv(path, meta, columns)
        written.append(path)
        log.info("wrote %s", path)
    for name in sorted(result.maps):
        cmap = result.maps[name]
        cmap.meta.setdefault("version", __version__)
        base = config.out_dir / f"{prefix}_{name}"
        cmap.save(base)
        written += [Path(f"{base}_re.dat"), Path(f"{base}_im.dat")]
        log.info("wrote %s_{re,im}.dat", base)
    return written


# -- comparison -----------------------------------------------------------


@dataclass(frozen=True)
class CompareEntry:
    name: str
    rel_linf: float
    rel_l2: float
    tolerance: float
    passed: bool


def discrepancy(a: np.ndarray, b: np.ndarray) -> tuple:
    """(relative L-inf, relative L2) with a 1e-12 scale floor."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise AxisMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), DISCREPANCY_FLOOR)
    linf = float(np.max(np.abs(a - b)) / scale)
    scale2 = max(
        float(np.linalg.norm(a.ravel())),
        float(np.linalg.norm(b.ravel())),
        DISCREPANCY_FLOOR,
    )
    l2 = float(np.linalg.norm((a - b).ravel()) / scale2)
    return linf, l2


def _axes_equal(a, b) -> bool:
    return a.shape == b.shape and np.allclose(a, b, rtol=0.0, atol=1e-9)


def compare_series(name, times_a, vals_a, times_b, vals_b, tolerance,
                   resample=None) -> CompareEntry:
    """Compare two time series; the first is resampled onto the second's
    axis when allowed (``resample='linear'``), else AxisMismatch."""
    if not _axes_equal(np.asarray(times_a), np.asarray(times_b)):
        if resample != "linear":
            raise AxisMismatch(
                f"series '{name}': incompatible time axes and no resample rule"
            )
        vals_a = np.interp(times_b, times_a, vals_a)
    linf, l2 = discrepancy(vals_a, vals_b)
    return CompareEntry(name, linf, l2, tolerance, linf <= tolerance)


def compare_maps(name, map_a: ComplexMap2D, map_b: ComplexMap2D, tolerance,
                 resample=None) -> CompareEntry:
    """Compare two maps (complex-aware), resampling a onto b's axes."""
    va = map_a.values
    if not (_axes_equal(map_a.axis1, map_b.axis1)
            and _axes_equal(map_a.axis2, map_b.axis2)):
        if resample != "linear":
            raise AxisMismatch(
                f"map '{name}': incompatible axes and no resample rule"
            )
        mesh = np.meshgrid(map_b.axis1, map_b.axis2, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        shape = (map_b.axis1.size, map_b.axis2.size)
        parts = []
        for comp in (map_a.values.real, map_a.values.imag):
            interp = RegularGridInterpolator(
                (map_a.axis1, map_a.axis2), comp,
                method="linear", bounds_error=False, fill_value=None,
            )
            parts.append(interp(pts).reshape(shape))
        va = parts[0] + 1j * parts[1]
    linf, l2 = discrepancy(va, map_b.values)
    return CompareEntry(name, linf, l2, tolerance, linf <= tolerance)


@dataclass
class CompareReport:
    entries: list
    meta: dict

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.meta.items()]
        lines.append("# columns: observable,rel_linf,rel_l2,tolerance,status")
        for e in self.entries:
            lines.append(
                f"{e.name},{e.rel_linf:.6e},{e.rel_l2:.6e},{e.tolerance:.6e},"
                + ("pass" if e.passed else "FAIL")
            )
        lines.append(f"# overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def run_compare(config: RunConfig) -> CompareReport:
    """Run both engines on the same pulse and compare all observables.

    The frequency-domain result is linearly resampled onto the time-bin
    axes (bin midpoints for fluxes and maps, step ends for n_TLS).
    """
    obs = set(config.observables) | {"populations"}
    scatter = run_scatter(config, obs)
    mps = run_mps(config, obs)
    tol = config.tolerance
    entries = []
    for name in ["n_tls"] + sorted(
        k for k in mps.series if k.startswith("n_") and k[2:] in ("R", "L")
    ):
        ta, va = scatter.series[name]
        tb, vb = mps.series[name]
        entries.append(compare_series(name, ta, va, tb, vb, tol, resample="linear"))
    for name in sorted(mps.maps):
        entries.append(
            compare_maps(name, scatter.maps[name], mps.maps[name], tol,
                         resample="linear")
        )
    meta = _base_meta(config, "scatter-vs-mps")
    for key, val in sorted(mps.diagnostics.items()):
        meta[f"mps_{key}"] = repr(val)
    meta["tolerance"] = repr(tol)
    report = CompareReport(entries, meta)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _write_result(config, scatter, tag="scatter")
    _write_result(config, mps, tag="mps")
    path = config.out_dir / f"{config.prefix}_report.txt"
    report.save(path)
    log.info("wrote %s", path)
    return report


def run(config: RunConfig):
    """Execute the configured engine; returns written paths (run modes)
    or the CompareReport (compare mode)."""
    if config.engine == "compare":
        return run_compare(config)
    if config.engine == "scatter":
        return _write_result(config, run_scatter(config))
    return _write_result(config, run_mps(config))


# -- interference-map export ----------------------------------------------


def _sigma_label(sigma: float) -> str:
    return f"{sigma:g}".replace(".", "p").replace("-", "m")


def export_fig3_maps(config: RunConfig, workers: int = 1) -> list:
    """Re/Im maps of the independent and saturation-induced parts of the
    pair spectrum, for each configured pulse duration (carrier-centered
    pulse, symmetric coupling)."""
    if config.params.mode is not Mode.SYMMETRIC:
        raise ConfigError("interference-map export is defined for symmetric mode")
    axis = np.linspace(-config.fig3_w_max, config.fig3_w_max, config.fig3_n_points)
    config.out_dir.mkdir(parents=True, exist_ok=True)

    def one(sigma: float) -> list:
        spec = PulseSpec(2, Gaussian(0.0, sigma))
        written = []
        for kind, cmap in (
            ("lin", i_lin_map(spec, config.params, axis)),
            ("nlin", i_nlin_map(spec, config.params, axis, config.quad)),
        ):
            cmap.meta["version"] = __version__
            base = config.out_dir / f"fig3_sigma{_sigma_label(sigma)}_{kind}"
            cmap.save(base)
            written += [Path(f"{base}_re.dat"), Path(f"{base}_im.dat")]
            log.info("wrote %s_{re,im}.dat", base)
        return written

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(one, config.fig3_sigmas))
    else:
        blocks = [one(s) for s in config.fig3_sigmas]
    return [p for block in blocks for p in block]
