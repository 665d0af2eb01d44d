"""Uniform time grid and its conjugate frequency grid.

The whole package works in units where the total emitter decay rate sets
the time scale, so grids carry plain floats.  A grid of ``n`` samples with
spacing ``dt`` starting at ``t0`` has the conjugate (angular) frequency
grid ``2*pi*fftshift(fftfreq(n, dt))`` — centered on zero, spacing
``2*pi/(n*dt)``.  Frequencies are measured from the pulse carrier, so
``omega = 0`` is the center of the pulse spectrum.

Transform conventions (fixed package-wide):

    time_to_freq:  F(w) = dt/sqrt(2*pi) * sum_k x(t_k) exp(+i w t_k)
    freq_to_time:  x(t) = dw/sqrt(2*pi) * sum_j F(w_j) exp(-i w_j t)

These are exact inverses on the grid (``dt * dw * n = 2*pi``), i.e. a
unitary DFT pair up to the Riemann-sum measure factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid ``t_k = t0 + k*dt`` for ``k = 0 .. n-1``."""

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 samples, got n={self.n}")
        if not self.dt > 0:
            raise ValueError(f"grid spacing must be positive, got dt={self.dt}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_max(self) -> float:
        """Last grid point."""
        return self.t0 + self.dt * (self.n - 1)

    @property
    def span(self) -> float:
        """Full periodic span ``n*dt`` (one sample past t_max)."""
        return self.n * self.dt

    @property
    def dw(self) -> float:
        """Conjugate frequency spacing ``2*pi/(n*dt)``."""
        return 2.0 * np.pi / (self.n * self.dt)

    @property
    def freqs(self) -> np.ndarray:
        """Centered conjugate frequency grid (ascending, spacing ``dw``)."""
        return 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(self.n, self.dt))

    def padded(self, factor: int, shift: float = 0.0) -> "SimGrid":
        """Same origin and spacing, ``factor`` times as many samples.

        ``shift`` offsets the origin (used e.g. to sample at bin midpoints).
        """
        if factor < 1:
            raise ValueError("pad factor must be >= 1")
        return SimGrid(self.t0 + shift, self.dt, self.n * factor)

    def index_of(self, t: float) -> int:
        """Index of the grid point nearest to ``t`` (must lie on the grid)."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k >= self.n or abs(self.t0 + k * self.dt - t) > 1e-9 * self.dt:
            raise ValueError(f"t={t} is not on the grid")
        return k

    # -- transforms ------------------------------------------------------

    def time_to_freq(self, x: np.ndarray) -> np.ndarray:
        """Forward transform of samples on ``times`` onto ``freqs``."""
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ShapeMismatch(f"expected last axis {self.n}, got {x.shape}")
        raw = self.n * np.fft.ifft(x, axis=-1)
        raw = np.fft.fftshift(raw, axes=-1)
        phase = np.exp(1j * self.freqs * self.t0)
        return (self.dt / _SQRT_2PI) * phase * raw

    def freq_to_time(self, f: np.ndarray) -> np.ndarray:
        """Inverse transform of samples on ``freqs`` onto ``times``."""
        f = np.asarray(f)
        if f.shape[-1] != self.n:
            raise ShapeMismatch(f"expected last axis {self.n}, got {f.shape}")
        g = np.fft.ifftshift(f * np.exp(-1j * self.freqs * self.t0), axes=-1)
        return (self.dw / _SQRT_2PI) * np.fft.fft(g, axis=-1)
