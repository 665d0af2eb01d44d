"""Two-photon scattering: frequency-domain kernels and output observables.

The two-photon output amplitude in frequency space splits into a linear
part (each photon scattered independently) and a nonlinear part from
emitter saturation:

    F_{mu mu'}(w1, w2) = f(w1) chi_mu(w1) f(w2) chi_mu'(w2) + I_nl(w1, w2)

where chi_mu are the one-photon coefficients and I_nl is a frequency
integral of the input spectrum against a four-frequency kernel that
conserves the pair's total energy.  Both kernels in use here factorize
through the mean frequency wbar = (w1 + w2)/2:

    symmetric: I_nl = r(w1) r(w2) * J(wbar)
    chiral:    I_nl = (s(w1) + s(w2)) * J(wbar)

with J a 1D quadrature over the relative frequency of the incoming pair.
That reduces the nominal 4D integral to a cheap 1D table.

The unit-norm time-domain pair wavefunction is

    phi_{mu mu'}(t1, t2) = 1/(2 pi) * iint dw1 dw2 e^{-i w1 t1 - i w2 t2} F

(sum over channel pairs of its squared norm is 1 — checked at runtime),
and the physical intensity correlation measured by photon counters is
G2_{mu mu'} = 2 |phi_{mu mu'}|^2.  First-order coherence comes from
partially transforming F over one frequency only:

    Phi_{eta mu}(t, nu) = 1/sqrt(pi) * int dw e^{-i w t} F_{mu eta}(w, nu)
    G1_{mu mu'}(t, t') = sum_eta int dnu conj(Phi_{eta mu}(t, nu)) Phi_{eta mu'}(t', nu)

which also yields the outgoing flux n_mu(t) = G1_{mu mu}(t, t) and, by
excitation bookkeeping against the incoming flux, the emitter population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    ConfigError,
    NormalizationDrift,
    QuadratureNotConverged,
)
from .grids import SimGrid
from .maps import ComplexMap2D
from .pulse import Gaussian, PulseSpec
from .scatter1 import (
    DEFAULT_PAD,
    ENGINE_LEAK_TOL,
    Mode,
    PopulationResult,
    SystemParams,
    _population_from_fluxes,
    build_internal,
    channel_coefficient,
    internal_envelope,
    pole_amplitude,
    reflection_symmetric,
    tls_population_1ph,
)

#: unit-norm drift budget for the two-photon output wavefunction
NORM_TOL = 1e-4


# -- four-frequency kernels ---------------------------------------------


def kernel_symmetric(nu1, nu2, w1, w2, params: SystemParams) -> np.ndarray:
    """Energy-conserving part of the symmetric two-photon scattering kernel.

    Supports numpy broadcasting across all four frequency arguments; the
    pair (nu1, nu2) -> (w1, w2) must satisfy nu1+nu2 == w1+w2 for the
    kernel to be meaningful (the caller enforces it by construction).
    """
    g = params.gamma
    r = lambda w: reflection_symmetric(w, params)
    wbar = 0.5 * (np.asarray(w1) + np.asarray(w2))
    return (4.0 / (math.pi * g)) * r(nu1) * r(nu2) * r(w1) * r(w2) / r(wbar)


def kernel_chiral(nu1, nu2, w1, w2, params: SystemParams) -> np.ndarray:
    """Energy-conserving part of the chiral two-photon scattering kernel."""
    g = params.gamma
    s = lambda w: pole_amplitude(w, params)
    return (1j * math.sqrt(g) / math.pi) * s(nu1) * s(nu2) * (s(w1) + s(w2))


# -- quadrature ----------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls the 1D relative-frequency quadrature behind I_nl.

    step/span default to values matched to the frequency grid in use;
    with ``check`` on, the quadrature is re-done at half step and double
    span and QuadratureNotConverged is raised if the result moves by more
    than ``tol`` (relative to the table's max).
    """

    step: float | None = None
    span: float | None = None
    check: bool = True
    tol: float = 1e-6


def _j_quadrature(wbar, p_at, pref, h, span):
    """J(wbar) = pref(wbar) * trapz over dq of P(wbar - q) P(wbar + q)."""
    n_half = max(int(math.ceil(span / h)), 4)
    qs = h * np.arange(-n_half, n_half + 1)
    weights = np.ones(qs.size)
    weights[0] = weights[-1] = 0.5
    wb = np.asarray(wbar, dtype=float)[:, None]
    integral = np.einsum(
        "wq,q->w", p_at(wb - qs[None, :]) * p_at(wb + qs[None, :]), weights
    ) * h
    return pref(np.asarray(wbar, dtype=float)) * integral


def _j_table(wbar, p_at, pref, h, span, check, tol):
    base = _j_quadrature(wbar, p_at, pref, h, span)
    if check:
        scale = float(np.max(np.abs(base)))
        fine = _j_quadrature(wbar, p_at, pref, 0.5 * h, span)
        wide = _j_quadrature(wbar, p_at, pref, h, 2.0 * span)
        err = max(
            float(np.max(np.abs(fine - base))), float(np.max(np.abs(wide - base)))
        ) / max(scale, 1e-30)
        if err > tol:
            raise QuadratureNotConverged(
                f"relative-frequency quadrature moved by {err:.3e} (> {tol:.1e})"
                f" under refinement; step={h!r} span={span!r}"
            )
    return base


def _nl_prefactors(params: SystemParams):
    """wbar-dependent prefactor multiplying the relative-frequency integral."""
    g = params.gamma
    if params.mode is Mode.SYMMETRIC:
        pref = lambda wb: (2.0 / (math.pi * g)) / reflection_symmetric(wb, params)
    else:
        pref = lambda wb: np.full_like(
            np.asarray(wb, dtype=float), 1j * math.sqrt(g) / (2.0 * math.pi), dtype=complex
        )
    return pref


def _coupler(params: SystemParams, w_row, w_col):
    """Channel-carrying factor multiplying J(wbar) in I_nl."""
    if params.mode is Mode.SYMMETRIC:
        return np.outer(
            reflection_symmetric(w_row, params), reflection_symmetric(w_col, params)
        )
    s_row = pole_amplitude(w_row, params)
    s_col = pole_amplitude(w_col, params)
    return s_row[:, None] + s_col[None, :]


def _p_weight(params: SystemParams):
    if params.mode is Mode.SYMMETRIC:
        return lambda w: reflection_symmetric(w, params)
    return lambda w: pole_amplitude(w, params)


def _default_span(params: SystemParams, sigma_w: float) -> float:
    return max(20.0 * params.gamma, 8.0 * sigma_w)


# -- standalone interference maps (arbitrary uniform axis) ----------------


def _require_uniform(axis: np.ndarray) -> float:
    axis = np.asarray(axis, dtype=float)
    steps = np.diff(axis)
    if axis.size < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ConfigError("interference maps need a uniform frequency axis")
    return float(steps[0])


def _analytic_shape(spec: PulseSpec) -> Gaussian:
    if not isinstance(spec.shape, Gaussian):
        raise ConfigError(
            "standalone interference maps need a Gaussian envelope"
            " (sampled shapes are only supported by the grid engines)"
        )
    return spec.shape


def i_lin_map(
    spec: PulseSpec,
    params: SystemParams,
    axis: np.ndarray,
    channels: tuple = ("R", "R"),
) -> ComplexMap2D:
    """Independent-scattering part of F on axis x axis (analytic envelope)."""
    if spec.n_photons != 2:
        raise ConfigError("interference maps are two-photon objects")
    shape = _analytic_shape(spec)
    _require_uniform(axis)
    axis = np.asarray(axis, dtype=float)
    f = shape.freq_values(axis)
    mu, mup = channels
    row = f * channel_coefficient(axis, params, mu)
    col = f * channel_coefficient(axis, params, mup)
    meta = _map_meta(spec, params, "i_lin", f"{mu}{mup}")
    return ComplexMap2D(axis, axis, np.outer(row, col), meta)


def i_nlin_map(
    spec: PulseSpec,
    params: SystemParams,
    axis: np.ndarray,
    quad: QuadratureSpec = QuadratureSpec(),
) -> ComplexMap2D:
    """Saturation-induced part of F on axis x axis (analytic envelope).

    Channel-independent in symmetric mode (the same map adds to every
    channel pair); the chiral single channel carries its s(w1)+s(w2)
    structure explicitly.
    """
    if spec.n_photons != 2:
        raise ConfigError("interference maps are two-photon objects")
    shape = _analytic_shape(spec)
    step = _require_uniform(axis)
    axis = np.asarray(axis, dtype=float)
    if params.decoupled:
        meta = _map_meta(spec, params, "i_nlin", "shared")
        return ComplexMap2D(axis, axis, np.zeros((axis.size, axis.size), complex), meta)
    sigma_w = 1.0 / shape.sigma_t
    h = quad.step if quad.step is not None else min(0.5 * step, 0.1 * params.gamma)
    span = quad.span if quad.span is not None else _default_span(params, sigma_w)
    p_w = _p_weight(params)
    p_at = lambda w: shape.freq_values(w) * p_w(w)
    wbar_axis = axis[0] + 0.5 * step * np.arange(2 * axis.size - 1)
    j = _j_table(wbar_axis, p_at, _nl_prefactors(params), h, span, quad.check, quad.tol)
    idx = np.add.outer(np.arange(axis.size), np.arange(axis.size))
    values = _coupler(params, axis, axis) * j[idx]
    meta = _map_meta(spec, params, "i_nlin", "shared" if params.mode is Mode.SYMMETRIC else "RR")
    return ComplexMap2D(axis, axis, values, meta)


def _map_meta(spec, params, observable, channels):
    shape = spec.shape
    meta = {
        "observable": observable,
        "engine": "scatter",
        "n_photons": repr(spec.n_photons),
        "channels": channels,
        "gamma_r": repr(params.gamma_r),
        "gamma_l": repr(params.gamma_l),
        "delta": repr(params.delta),
        "mode": params.mode.value,
    }
    if isinstance(shape, Gaussian):
        meta["t_c"] = repr(shape.t_c)
        meta["sigma_t"] = repr(shape.sigma_t)
    return meta


# -- grid workspace -------------------------------------------------------


class _TwoPhotonWorkspace:
    """All grid-based two-photon machinery for one (pulse, params, grid).

    Everything heavy is computed once and cached on the instance; the
    public functions below pull maps/series out of a module-level LRU of
    these workspaces.
    """

    def __init__(self, spec, params, grid, pad, leak_tol, quad):
        if spec.n_photons != 2:
            raise ConfigError(
                f"two-photon engine needs n_photons=2, got {spec.n_photons}"
            )
        self.spec = spec
        self.params = params
        self.grid = grid
        self.quad = quad
        self.g_int, self.window = build_internal(spec, grid, pad)
        self.f_t = internal_envelope(spec, self.g_int, grid, leak_tol, self.window)
        # envelope spectrum on the half-step grid: exact lookups at all
        # mean/relative frequency combinations used below
        self.g_half = SimGrid(self.g_int.t0, self.g_int.dt, 2 * self.g_int.n)
        f_half_t = internal_envelope(spec, self.g_half, grid, leak_tol, self.window)
        self._f_half_w = self.g_half.time_to_freq(f_half_t)
        self._w_half = self.g_half.freqs
        self._dwh = self.g_half.dw

        freqs = self.g_int.freqs
        sigma_w = self._spectral_width()
        # nu window for the partial transforms: those feed observables that
        # are quadratic in the field, where the spectral tails are negligible
        w_lim = max(20.0 * params.gamma, 8.0 * sigma_w)
        self._win_idx = np.flatnonzero(np.abs(freqs) <= w_lim)
        self.w_win = freqs[self._win_idx]
        self._f_full = self._lookup_f(freqs)
        self._chi_full = {
            ch: channel_coefficient(freqs, params, ch) for ch in params.channels
        }
        # support of the mean-frequency table: the pulse spectrum sets it
        # exactly (both incoming legs must land inside the envelope support)
        dens = np.abs(self._f_half_w)
        live = np.flatnonzero(dens > 1e-13 * dens.max())
        edge = float(np.max(np.abs(self._w_half[live]))) if live.size else 0.0
        w_cap = 0.45 * abs(self._w_half[0])
        self._wbar_edge = min(max(edge, 2.0 * params.gamma), w_cap)
        self._span = _default_span(params, sigma_w)
        self._j = None
        self._phi_fields = None
        self._norm = None

    def _spectral_width(self) -> float:
        if isinstance(self.spec.shape, Gaussian):
            return 1.0 / self.spec.shape.sigma_t
        w = self.g_half.freqs
        dens = np.abs(self._f_half_w) ** 2
        dens = dens / np.sum(dens)
        mean = float(np.sum(w * dens))
        var = float(np.sum((w - mean) ** 2 * dens))
        return math.sqrt(max(var, 1e-12))

    def _lookup_f(self, w) -> np.ndarray:
        idx = np.rint((np.asarray(w) - self._w_half[0]) / self._dwh).astype(int)
        out = np.zeros(idx.shape, dtype=complex)
        ok = (idx >= 0) & (idx < self._w_half.size)
        out[ok] = self._f_half_w[idx[ok]]
        return out

    # -- frequency-domain pieces ----------------------------------------

    @property
    def j_table(self) -> np.ndarray:
        """Mean-frequency table on the sum-index axis of the full grid."""
        if self._j is None:
            wbar = self.wbar_axis
            self._j = np.zeros(wbar.size, dtype=complex)
            if not self.params.decoupled:
                live = np.abs(wbar) <= self._wbar_edge
                p_w = _p_weight(self.params)
                p_at = lambda w: self._lookup_f(w) * p_w(w)
                h = self.quad.step if self.quad.step is not None else self.g_int.dw
                # keep the widened convergence-check range on the half grid
                w_max = abs(self._w_half[0])
                span = self.quad.span if self.quad.span is not None else self._span
                span = min(span, 0.45 * (w_max - self._wbar_edge))
                self._j[live] = _j_table(
                    wbar[live], p_at, _nl_prefactors(self.params), h, span,
                    self.quad.check, self.quad.tol,
                )
        return self._j

    @property
    def wbar_axis(self) -> np.ndarray:
        n = self.g_int.n
        return self.g_int.freqs[0] + 0.5 * self.g_int.dw * np.arange(2 * n - 1)

    def pair_full(self, mu: str, mup: str) -> np.ndarray:
        """F_{mu mu'} on the full internal grid (w1 rows, w2 columns).

        The emitter-mediated part rides on the pulse's sum frequency but
        spreads along the anti-diagonal with slow algebraic tails; clipping
        it to a fixed box dents the pair correlation at the equal-time kink
        by O(gamma/w_box), so it is laid down banded over the whole grid.
        """
        w = self.g_int.freqs
        out = np.outer(
            self._f_full * self._chi_full[mu], self._f_full * self._chi_full[mup]
        )
        j = self.j_table
        k_nz = np.flatnonzero(j)
        if k_nz.size == 0:
            return out
        k0, k1 = int(k_nz[0]), int(k_nz[-1])
        n = w.size
        if self.params.mode is Mode.SYMMETRIC:
            u_row = reflection_symmetric(w, self.params)
            u_col = u_row
            combine = lambda a, b: a * b
        else:
            u_row = pole_amplitude(w, self.params)
            u_col = u_row
            combine = lambda a, b: a + b
        for i in range(max(k0 - n + 1, 0), min(k1, n - 1) + 1):
            lo, hi = max(k0 - i, 0), min(k1 - i, n - 1)
            sl = slice(lo, hi + 1)
            out[i, sl] += combine(u_row[i], u_col[sl]) * j[i + lo:i + hi + 1]
        return out

    @property
    def channel_pairs(self) -> list:
        chans = self.params.channels
        return [(a, b) for a in chans for b in chans]

    @property
    def norm(self) -> float:
        """Total squared norm of the pair wavefunction (Parseval, full horizon)."""
        if self._norm is None:
            dw = self.g_int.dw
            total = 0.0
            for mu, mup in self.channel_pairs:
                total += float(np.sum(np.abs(self.pair_full(mu, mup)) ** 2)) * dw * dw
            if abs(total - 1.0) > NORM_TOL:
                raise NormalizationDrift(
                    f"two-photon output norm {total!r} deviates from 1 beyond {NORM_TOL}"
                )
            self._norm = total
        return self._norm

    # -- time-domain outputs --------------------------------------------

    def phi2_window(self, mu: str, mup: str) -> np.ndarray:
        """Unit-norm pair wavefunction phi(t1, t2) on the output window."""
        self.norm  # validates unitarity before any map is produced
        full = self.pair_full(mu, mup)
        # transform w2 -> t2 (rows fixed), then w1 -> t1
        half = self.g_int.freq_to_time(full)
        phi = self.g_int.freq_to_time(half.T).T
        return phi[self.window, self.window]

    @property
    def phi_fields(self) -> dict:
        """Phi_{eta mu}(t, nu) on (full time grid) x (frequency window)."""
        if self._phi_fields is None:
            self.norm
            fields = {}
            for eta in self.params.channels:
                for mu in self.params.channels:
                    embed = self.pair_full(mu, eta)[:, self._win_idx].T  # (nu, w)
                    phi = math.sqrt(2.0) * self.g_int.freq_to_time(embed)  # (nu, t)
                    fields[(eta, mu)] = phi.T  # (t, nu)
            self._phi_fields = fields
        return self._phi_fields

    def g1_window(self, mu: str, mup: str) -> np.ndarray:
        dnu = self.g_int.dw
        out = np.zeros((self.grid.n, self.grid.n), dtype=complex)
        for eta in self.params.channels:
            a = self.phi_fields[(eta, mu)][self.window]
            b = self.phi_fields[(eta, mup)][self.window]
            out += np.conj(a) @ b.T * dnu
        return out

    def fluxes_full(self) -> dict:
        dnu = self.g_int.dw
        fluxes = {}
        for mu in self.params.channels:
            total = np.zeros(self.g_int.n)
            for eta in self.params.channels:
                total += np.sum(np.abs(self.phi_fields[(eta, mu)]) ** 2, axis=1) * dnu
            fluxes[mu] = total
        return fluxes


@lru_cache(maxsize=4)
def _workspace(spec, params, grid, pad, leak_tol, quad) -> _TwoPhotonWorkspace:
    return _TwoPhotonWorkspace(spec, params, grid, pad, leak_tol, quad)


# -- public two-photon API ------------------------------------------------


def project_out_2ph(
    spec: PulseSpec,
    params: SystemParams,
    grid: SimGrid,
    pad: int = DEFAULT_PAD,
    leak_tol: float = ENGINE_LEAK_TOL,
    quad: QuadratureSpec = QuadratureSpec(),
) -> dict:
    """Unit-norm two-photon output wavefunction per channel pair.

    Returns {(mu, mu'): ComplexMap2D over (t1, t2) on the output grid}.
    The summed squared norm over all pairs (integrated over the full
    internal horizon) is checked against 1 within 1e-4.
    """
    ws = _workspace(spec, params, grid, pad, leak_tol, quad)
    out = {}
    for mu, mup in ws.channel_pairs:
        meta = _map_meta(spec, params, "phi2", f"{mu}{mup}")
        meta["norm_total"] = repr(ws.norm)
        meta["prefactor"] = "1/(2*pi)"
        out[(mu, mup)] = ComplexMap2D(
            grid.times, grid.times, ws.phi2_window(mu, mup), meta
        )
    return out


def g2_two_photon(
    spec: PulseSpec,
    params: SystemParams,
    grid: SimGrid,
    channels: tuple = ("R", "R"),
    pad: int = DEFAULT_PAD,
    leak_tol: float = ENGINE_LEAK_TOL,
    quad: QuadratureSpec = QuadratureSpec(),
) -> ComplexMap2D:
    """Intensity correlation G2_{mu mu'}(t1, t2) = 2 |phi_{mu mu'}|^2."""
    ws = _workspace(spec, params, grid, pad, leak_tol, quad)
    mu, mup = channels
    if mu not in params.channels or mup not in params.channels:
        raise ConfigError(f"channels {channels!r} not available in {params.mode.value} mode")
    values = 2.0 * np.abs(ws.phi2_window(mu, mup)) ** 2
    meta = _map_meta(spec, params, "g2", f"{mu}{mup}")
    meta["norm_total"] = repr(ws.norm)
    return ComplexMap2D(grid.times, grid.times, values.astype(complex), meta)


def g1_two_photon(
    spec: PulseSpec,
    params: SystemParams,
    grid: SimGrid,
    channels: tuple = ("R", "R"),
    pad: int = DEFAULT_PAD,
    leak_tol: float = ENGINE_LEAK_TOL,
    quad: QuadratureSpec = QuadratureSpec(),
) -> ComplexMap2D:
    """First-order coherence G1_{mu mu'}(t, t') for the two-photon pulse."""
    ws = _workspace(spec, params, grid, pad, leak_tol, quad)
    mu, mup = channels
    if mu not in params.channels or mup not in params.channels:
        raise ConfigError(f"channels {channels!r} not available in {params.mode.value} mode")
    meta = _map_meta(spec, params, "g1", f"{mu}{mup}")
    meta["norm_total"] = repr(ws.norm)
    return ComplexMap2D(grid.times, grid.times, ws.g1_window(mu, mup), meta)


def tls_population_scatter(
    spec: PulseSpec,
    params: SystemParams,
    grid: SimGrid,
    pad: int = DEFAULT_PAD,
    leak_tol: float = ENGINE_LEAK_TOL,
    quad: QuadratureSpec = QuadratureSpec(),
) -> PopulationResult:
    """Emitter population and output fluxes from the scattering engine.

    Supports one- and two-photon pulses (the frequency-domain route has
    closed forms only up to the pair level).
    """
    if spec.n_photons == 1:
        return tls_population_1ph(spec, params, grid, pad, leak_tol)
    if spec.n_photons != 2:
        raise ConfigError(
            f"scattering engine supports n_photons <= 2, got {spec.n_photons}"
        )
    ws = _workspace(spec, params, grid, pad, leak_tol, quad)
    n_pulse = 2.0 * np.abs(ws.f_t) ** 2
    return _population_from_fluxes(
        ws.g_int.times, n_pulse, ws.fluxes_full(), ws.g_int.dt, ws.window, 2
    )
