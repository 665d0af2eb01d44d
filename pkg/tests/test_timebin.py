"""Time-bin engine vs dense brute-force oracles and analytic decay."""

import itertools
import math

import numpy as np
import pytest

from oracles import dense_collision_run, fock_amplitude, fock_state_dense
from wqed.errors import (
    BinStillInteracting,
    ConfigError,
    OccupationCapTooLow,
)
from wqed.grids import SimGrid
from wqed.pulse import Gaussian, PulseSpec, Sampled
from wqed.scatter1 import Mode, SystemParams, tls_population_1ph
from wqed.timebin import (
    TimeBinConfig,
    build_fock_mps,
    build_step_gate,
    evolve,
    measure_g1,
    measure_g2,
    measure_populations,
)

CHIRAL = SystemParams(1.0, 0.0, mode=Mode.CHIRAL)
EXACTISH = dict(chi_max=256, svd_cutoff=1e-15)


def _taper(rng, m):
    """Random complex envelope samples, tapered so nothing leaks off-grid."""
    vals = rng.normal(size=m) + 1j * rng.normal(size=m)
    return vals * np.sin(np.linspace(0, np.pi, m + 2))[1:-1]


def tapered_spec(seed, m, n_photons):
    rng = np.random.default_rng(seed)
    return PulseSpec(n_photons, Sampled.from_array(_taper(rng, m)))


class TestFockConstruction:
    def test_amplitudes_match_multinomial_formula(self):
        # every occupation pattern of a 2-photon pulse over 5 bins
        m, n = 5, 2
        spec = tapered_spec(12, m, n)
        config = TimeBinConfig(
            params=CHIRAL, grid=SimGrid(0.0, 0.1, m), leak_tol=1.0
        )
        state = build_fock_mps(spec, config)
        psi = state.mps.to_dense()  # axes: emitter, bins
        assert psi.shape == (2,) + (n + 1,) * m
        for pattern in itertools.product(range(n + 1), repeat=m):
            want = fock_amplitude(state.f_bins, pattern) if sum(pattern) == n else 0.0
            got = psi[(0,) + pattern]
            assert abs(got - want) < 1e-12

    def test_dense_reference_state(self):
        m, n = 6, 3
        spec = tapered_spec(7, m, n)
        config = TimeBinConfig(
            params=CHIRAL, grid=SimGrid(0.0, 0.05, m), leak_tol=1.0
        )
        state = build_fock_mps(spec, config)
        ref = fock_state_dense(state.f_bins, n, n)
        got = state.mps.to_dense()[0]
        np.testing.assert_allclose(got, ref, atol=1e-12)

    def test_norm_and_bond_dimension(self):
        spec = PulseSpec(3, Gaussian(3.0, 1.0))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 120))
        state = build_fock_mps(spec, config)
        assert abs(state.mps.norm() - 1.0) < 1e-12
        assert max(state.mps.bond_dims) == 4

    def test_cap_below_photon_number(self):
        # concentrating 3 photons into 2 bins with a 1-photon cap must fail
        spec = tapered_spec(3, 2, 3)
        config = TimeBinConfig(
            params=CHIRAL, grid=SimGrid(0.0, 0.3, 2), n_max=1, leak_tol=1.0
        )
        with pytest.raises(OccupationCapTooLow):
            build_fock_mps(spec, config)
        # the default cap (4) is harmless for N=5: five-fold single-bin
        # occupancy carries ~|f dt|^10 of weight
        spec = PulseSpec(5, Gaussian(6.0, 2.0))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.02, 600))
        state = build_fock_mps(spec, config)
        assert state.n_max == 4
        assert abs(state.mps.norm() - 1.0) < 1e-9

    def test_vacuum_with_excited_emitter(self):
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 4))
        state = build_fock_mps(None, config, emitter="excited")
        psi = state.mps.to_dense()
        nz = np.flatnonzero(np.abs(psi) > 1e-15)
        assert nz.size == 1
        assert psi.reshape(-1)[nz[0]] == pytest.approx(1.0)
        assert state.initial_excitation == 1.0


class TestStepGate:
    def test_single_excitation_rotation(self):
        # n_max=1, resonant chiral coupling: the one-excitation sector is
        # an exact rotation by sqrt(gamma dt)
        dt = 0.04
        gate = build_step_gate(CHIRAL, dt, 1)
        th = math.sqrt(dt)
        u = gate.matrix
        # basis (e, n): |e,0> = 2, |g,1> = 1
        assert u[2, 2] == pytest.approx(math.cos(th), abs=1e-14)
        assert u[1, 2] == pytest.approx(-1j * math.sin(th), abs=1e-14)
        assert u[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_conserves_excitation_number(self):
        d = 3
        nb = np.diag([0.0, 1.0, 2.0])
        ne = np.diag([0.0, 1.0])
        sym = build_step_gate(SystemParams(0.4, 0.4), 0.03, 2)
        n_tot = (
            np.kron(ne, np.eye(d * d))
            + np.kron(np.eye(2), np.kron(nb, np.eye(d)))
            + np.kron(np.eye(2), np.kron(np.eye(d), nb))
        )
        assert np.max(np.abs(sym.matrix @ n_tot - n_tot @ sym.matrix)) < 1e-13
        # detuned chiral gate conserves it too
        ch = build_step_gate(
            SystemParams(0.8, 0.0, delta=0.5, mode=Mode.CHIRAL), 0.03, 2
        )
        n_tot = np.kron(ne, np.eye(d)) + np.kron(np.eye(2), nb)
        assert np.max(np.abs(ch.matrix @ n_tot - n_tot @ ch.matrix)) < 1e-13

    def test_oracle_unitary_agrees(self):
        from oracles import collision_unitary

        gate = build_step_gate(SystemParams(0.45, 0.45), 0.05, 2)
        u_ref, dims = collision_unitary(0.45, 0.45, 0.0, 0.05, 2, True)
        assert dims == gate.dims
        np.testing.assert_allclose(gate.matrix, u_ref, atol=1e-13)
        gate = build_step_gate(
            SystemParams(0.9, 0.0, delta=-0.4, mode=Mode.CHIRAL), 0.05, 1
        )
        u_ref, dims = collision_unitary(0.9, 0.0, -0.4, 0.05, 1, False)
        assert dims == gate.dims
        np.testing.assert_allclose(gate.matrix, u_ref, atol=1e-13)


class TestDenseEvolutionOracle:
    def test_chiral_two_photon_run(self):
        m, n = 6, 2
        dt = 0.25
        spec = tapered_spec(21, m, n)
        config = TimeBinConfig(
            params=SystemParams(1.0, 0.0, delta=0.3, mode=Mode.CHIRAL),
            grid=SimGrid(0.0, dt, m),
            leak_tol=1.0,
            **EXACTISH,
        )
        state = build_fock_mps(spec, config)
        ref = dense_collision_run(
            state.f_bins, 1.0, 0.0, 0.3, dt, n, n, symmetric=False
        )
        record = evolve(state, config)
        got = state.mps.to_dense()  # sites: R1..Rm, E
        want = np.transpose(ref.psi, list(range(1, m + 1)) + [0])
        np.testing.assert_allclose(got, want, atol=1e-8)
        np.testing.assert_allclose(record.n_tls, ref.n_tls, atol=1e-10)
        np.testing.assert_allclose(record.n_r * dt, ref.occ_r, atol=1e-10)

    def test_symmetric_single_photon_run(self):
        m, n = 4, 1
        dt = 0.3
        spec = tapered_spec(33, m, n)
        config = TimeBinConfig(
            params=SystemParams(0.75, 0.75),
            grid=SimGrid(0.0, dt, m),
            leak_tol=1.0,
            **EXACTISH,
        )
        state = build_fock_mps(spec, config)
        ref = dense_collision_run(
            state.f_bins, 0.75, 0.75, 0.0, dt, n, n, symmetric=True
        )
        record = evolve(state, config)
        got = state.mps.to_dense()  # sites: R1, L1, .., Rm, Lm, E
        perm = []
        for k in range(m):
            perm += [1 + k, 1 + m + k]
        perm.append(0)
        want = np.transpose(ref.psi, perm)
        np.testing.assert_allclose(got, want, atol=1e-8)
        np.testing.assert_allclose(record.n_tls, ref.n_tls, atol=1e-10)
        np.testing.assert_allclose(record.n_r * dt, ref.occ_r, atol=1e-10)
        np.testing.assert_allclose(record.n_l * dt, ref.occ_l, atol=1e-10)

    @pytest.mark.filterwarnings("ignore:per-step generator norm")
    def test_symmetric_two_photon_excited_emitter(self):
        m, n = 3, 2
        dt = 0.4
        spec = tapered_spec(44, m, n)
        config = TimeBinConfig(
            params=SystemParams(0.5, 0.5),
            grid=SimGrid(0.0, dt, m),
            n_max=3,
            leak_tol=1.0,
            **EXACTISH,
        )
        state = build_fock_mps(spec, config, emitter="excited")
        ref = dense_collision_run(
            state.f_bins, 0.5, 0.5, 0.0, dt, 3, n,
            symmetric=True, emitter_excited=True,
        )
        record = evolve(state, config)
        perm = []
        for k in range(m):
            perm += [1 + k, 1 + m + k]
        perm.append(0)
        np.testing.assert_allclose(
            state.mps.to_dense(), np.transpose(ref.psi, perm), atol=1e-8
        )
        np.testing.assert_allclose(record.n_tls, ref.n_tls, atol=1e-10)


class TestDecayAndPopulations:
    def test_spontaneous_emission_curve(self):
        # excited emitter, no pulse: n_e(t) = exp(-gamma t) wherever the
        # population is above 1e-2
        grid = SimGrid(0.0, 0.01, 800)
        config = TimeBinConfig(params=SystemParams(0.5, 0.5), grid=grid)
        state = build_fock_mps(None, config, emitter="excited")
        record = evolve(state, config)
        exact = np.exp(-record.step_times)
        mask = exact >= 1e-2
        rel = np.abs(record.n_tls[mask] - exact[mask]) / exact[mask]
        assert np.max(rel) < 0.01
        pops = measure_populations(record)
        assert pops.closure_residual < 1e-10
        # branching into R vs L follows the rate asymmetry
        tot_r = np.sum(record.n_r) * grid.dt
        tot_l = np.sum(record.n_l) * grid.dt
        assert tot_r / (tot_r + tot_l) == pytest.approx(0.5, abs=1e-6)

    def test_two_photon_closure(self):
        spec = PulseSpec(2, Gaussian(3.0, 1.0))
        config = TimeBinConfig(
            params=SystemParams(0.5, 0.5), grid=SimGrid(0.0, 0.08, 150)
        )
        state = build_fock_mps(spec, config)
        record = evolve(state, config)
        pops = measure_populations(record)
        assert pops.excitation_drift < 1e-8
        assert pops.closure_residual < 1e-8
        # everything not yet emitted is still on the emitter
        emitted = (np.sum(pops.n_out["R"]) + np.sum(pops.n_out["L"])) * 0.08
        assert emitted + record.n_tls[-1] == pytest.approx(2.0, abs=1e-6)

    def test_single_photon_against_frequency_engine(self):
        grid = SimGrid(0.0, 0.02, 600)
        spec = PulseSpec(1, Gaussian(3.0, 1.0))
        config = TimeBinConfig(params=CHIRAL, grid=grid)
        state = build_fock_mps(spec, config)
        record = evolve(state, config)
        ref = tls_population_1ph(spec, CHIRAL, grid)
        interp = np.interp(record.step_times, ref.times, ref.n_tls)
        scale = np.max(ref.n_tls)
        assert np.max(np.abs(record.n_tls - interp)) / scale < 0.02


class TestCorrelators:
    def test_g1_diagonal_is_flux(self):
        spec = PulseSpec(1, Gaussian(2.0, 0.7))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 120))
        state = build_fock_mps(spec, config)
        record = evolve(state, config)
        g1 = measure_g1(state, ("R", "R"))
        np.testing.assert_allclose(np.diagonal(g1.values).real, record.n_r, atol=1e-10)
        assert np.max(np.abs(np.diagonal(g1.values).imag)) < 1e-12

    def test_g1_hermitian_and_unit_trace(self):
        spec = PulseSpec(1, Gaussian(2.0, 0.7))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 120))
        state = build_fock_mps(spec, config)
        record = evolve(state, config)
        g1 = measure_g1(state)
        np.testing.assert_allclose(g1.values, g1.values.conj().T, atol=1e-12)
        # trace = photon weight already in the waveguide; the rest is
        # still on the emitter
        trace = np.sum(np.diagonal(g1.values).real) * 0.1
        assert trace == pytest.approx(1.0 - record.n_tls[-1], abs=1e-12)
        assert trace == pytest.approx(1.0, abs=1e-3)

    def test_single_photon_g1_is_rank_one(self):
        spec = PulseSpec(1, Gaussian(2.0, 0.7))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 120))
        state = build_fock_mps(spec, config)
        evolve(state, config)
        g1 = measure_g1(state)
        w = np.linalg.eigvalsh(g1.values)
        assert w[-1] * 0.1 == pytest.approx(1.0, abs=1e-3)
        assert np.max(np.abs(w[:-1])) * 0.1 < 1e-10

    def test_single_photon_g2_vanishes(self):
        spec = PulseSpec(1, Gaussian(2.0, 0.7))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 120))
        state = build_fock_mps(spec, config)
        evolve(state, config)
        g2 = measure_g2(state)
        assert np.max(np.abs(g2.values)) < 1e-10

    def test_two_photon_g2_pair_count(self):
        dt = 0.08
        spec = PulseSpec(2, Gaussian(3.0, 1.0))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, dt, 200))
        state = build_fock_mps(spec, config)
        evolve(state, config)
        g2 = measure_g2(state)
        pairs = np.sum(g2.values).real * dt * dt
        assert pairs == pytest.approx(2.0, abs=1e-4)
        np.testing.assert_allclose(g2.values.imag, 0.0, atol=1e-10)

    def test_requires_finished_run(self):
        spec = PulseSpec(1, Gaussian(2.0, 0.7))
        config = TimeBinConfig(params=CHIRAL, grid=SimGrid(0.0, 0.1, 40))
        state = build_fock_mps(spec, config)
        with pytest.raises(BinStillInteracting):
            measure_g1(state)
        evolve(state, config)
        with pytest.raises(ConfigError):
            evolve(state, config)
        with pytest.raises(ConfigError):
            measure_g1(state, ("R", "L"))  # no left channel in a chiral chain
