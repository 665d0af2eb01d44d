"""Input pulse description: N-photon Fock pulses with a shared envelope.

The input state is an N-photon Fock state built from a single normalized
envelope f, i.e. (integral of f(t) b_in^dag(t))^N / sqrt(N!) acting on
vacuum.  Everything downstream only ever needs f on a grid, in time or
frequency, plus the incoming photon flux N*|f(t)|^2.

The Gaussian envelope is

    f(t) = pi^(-1/4) sigma_t^(-1/2) exp(-(t - t_c)^2 / (2 sigma_t^2))

whose spectrum (with the package transform convention, see grids.py) is

    f(w) = pi^(-1/4) sigma_t^(1/2) exp(-w^2 sigma_t^2 / 2) exp(+i w t_c).

On-grid envelopes are renormalized so that sum |f|^2 dt == 1 exactly;
for well-covered grids the renormalization factor is 1 to ~1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import GridTooNarrow, ShapeMismatch
from .grids import SimGrid

#: default ceiling on envelope probability mass falling outside the grid
DEFAULT_LEAK_TOL = 1e-8


@dataclass(frozen=True)
class Gaussian:
    """Gaussian envelope centered at ``t_c`` with duration ``sigma_t``."""

    t_c: float
    sigma_t: float

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")

    @property
    def peak_amplitude(self) -> float:
        """Continuum normalization constant pi^(-1/4)/sqrt(sigma_t)."""
        return math.pi ** -0.25 / math.sqrt(self.sigma_t)

    def time_values(self, t: np.ndarray) -> np.ndarray:
        u = (np.asarray(t, dtype=float) - self.t_c) / self.sigma_t
        return self.peak_amplitude * np.exp(-0.5 * u * u) + 0.0j

    def freq_values(self, w: np.ndarray) -> np.ndarray:
        """Analytic spectrum on arbitrary frequencies (continuum-normalized)."""
        w = np.asarray(w, dtype=float)
        amp = math.pi ** -0.25 * math.sqrt(self.sigma_t)
        return amp * np.exp(-0.5 * (w * self.sigma_t) ** 2) * np.exp(1j * w * self.t_c)

    def leaked_mass(self, grid: SimGrid) -> float:
        """Probability mass of |f(t)|^2 outside [t0, t0 + span]."""
        lo = (self.t_c - grid.t0) / self.sigma_t
        hi = (grid.t0 + grid.span - self.t_c) / self.sigma_t
        return 0.5 * (erfc(lo) + erfc(hi))


@dataclass(frozen=True)
class Sampled:
    """Envelope given by complex samples on the target grid (renormalized)."""

    values: tuple

    @staticmethod
    def from_array(values: np.ndarray) -> "Sampled":
        return Sampled(tuple(complex(v) for v in np.asarray(values).ravel()))


@dataclass(frozen=True)
class PulseSpec:
    """N-photon Fock pulse with envelope ``shape``."""

    n_photons: int
    shape: Gaussian | Sampled

    def __post_init__(self):
        if self.n_photons < 1:
            raise ValueError(f"n_photons must be >= 1, got {self.n_photons}")


def envelope_time(
    spec: PulseSpec, grid: SimGrid, leak_tol: float = DEFAULT_LEAK_TOL
) -> np.ndarray:
    """Normalized envelope samples f(t_k) on ``grid``.

    Raises GridTooNarrow when more than ``leak_tol`` of the envelope's
    probability mass falls outside the grid (for Sampled shapes the check
    is a boundary-density heuristic, since the off-grid mass is unknown).
    """
    shape = spec.shape
    if isinstance(shape, Gaussian):
        leak = shape.leaked_mass(grid)
        if leak > leak_tol:
            raise GridTooNarrow(
                f"envelope mass {leak:.3e} outside grid exceeds leak_tol={leak_tol:.1e}"
                f" (grid [{grid.t0}, {grid.t0 + grid.span}], t_c={shape.t_c},"
                f" sigma_t={shape.sigma_t})"
            )
        f = shape.time_values(grid.times)
    elif isinstance(shape, Sampled):
        f = np.asarray(shape.values, dtype=complex)
        if f.size != grid.n:
            raise ShapeMismatch(
                f"sampled envelope has {f.size} values but grid has {grid.n} points"
            )
        edge = max(abs(f[0]) ** 2, abs(f[-1]) ** 2) * grid.dt
        total = np.sum(np.abs(f) ** 2) * grid.dt
        if total <= 0:
            raise ValueError("sampled envelope is identically zero")
        if edge / total > leak_tol:
            raise GridTooNarrow(
                f"sampled envelope boundary density {edge / total:.3e} exceeds"
                f" leak_tol={leak_tol:.1e}"
            )
    else:  # pragma: no cover - guarded by PulseSpec type
        raise TypeError(f"unknown shape {type(shape)!r}")
    norm = math.sqrt(float(np.sum(np.abs(f) ** 2)) * grid.dt)
    return f / norm


def envelope_freq(
    spec: PulseSpec, grid: SimGrid, leak_tol: float = DEFAULT_LEAK_TOL
) -> np.ndarray:
    """Envelope spectrum f(w_j) on ``grid.freqs``.

    Gaussian shapes use the analytic formula; sampled shapes transform
    their time samples.  Normalized so that sum |f(w)|^2 dw == 1.
    """
    shape = spec.shape
    if isinstance(shape, Gaussian):
        leak = shape.leaked_mass(grid)
        if leak > leak_tol:
            raise GridTooNarrow(
                f"envelope mass {leak:.3e} outside grid exceeds leak_tol={leak_tol:.1e}"
            )
        f = shape.freq_values(grid.freqs)
        norm = math.sqrt(float(np.sum(np.abs(f) ** 2)) * grid.dw)
        return f / norm
    return grid.time_to_freq(envelope_time(spec, grid, leak_tol))


def pulse_flux(
    spec: PulseSpec, grid: SimGrid, leak_tol: float = DEFAULT_LEAK_TOL
) -> np.ndarray:
    """Incoming photon flux N*|f(t)|^2 on the grid (integrates to N)."""
    f = envelope_time(spec, grid, leak_tol)
    return spec.n_photons * np.abs(f) ** 2


def export_envelope(spec: PulseSpec, grid: SimGrid, path, leak_tol=DEFAULT_LEAK_TOL):
    """Write a '#'-headed CSV with t, Re f, Im f, |f|^2 and the flux."""
    f = envelope_time(spec, grid, leak_tol)
    flux = spec.n_photons * np.abs(f) ** 2
    data = np.column_stack([grid.times, f.real, f.imag, np.abs(f) ** 2, flux])
    header = (
        f"# n_photons={spec.n_photons}\n"
        f"# shape={type(spec.shape).__name__}\n"
        f"# t0={grid.t0!r} dt={grid.dt!r} n={grid.n}\n"
        "# columns=t,re_f,im_f,abs2_f,n_pulse"
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt="%.17e", delimiter=",")
