"""Config parsing, comparison metrics, artifact formats, CLI exit codes."""

import numpy as np
import pytest

from wqed.cli import main as cli_main
from wqed.errors import AxisMismatch, ConfigError
from wqed.harness import (
    CompareEntry,
    CompareReport,
    compare_maps,
    compare_series,
    discrepancy,
    load_config,
    read_series_csv,
    run,
    run_scatter,
    write_series_csv,
)
from wqed.maps import ComplexMap2D
from wqed.scatter1 import Mode


def write_config(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(body)
    return path


MINIMAL = """
engine = "scatter"
mode = "chiral"
gamma_r = 1.0
gamma_l = 0.0
n_photons = 1
dt = 0.05
n_steps = 240
out_dir = "{out}"
"""


class TestConfig:
    def test_minimal_roundtrip(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, MINIMAL.format(out=tmp_path / "o"))
        )
        assert cfg.engine == "scatter"
        assert cfg.params.mode is Mode.CHIRAL
        assert cfg.grid.n == 240
        assert cfg.observables == ("populations", "g1_RR")
        assert cfg.prefix == "scatter_n1_chiral"

    def test_unknown_key_is_named(self, tmp_path):
        path = write_config(tmp_path, 'engine = "scatter"\nwat = 3\n')
        with pytest.raises(ConfigError, match="wat"):
            load_config(path)

    def test_type_errors_name_the_key(self, tmp_path):
        path = write_config(tmp_path, 'engine = "scatter"\ndt = "fast"\n')
        with pytest.raises(ConfigError, match="'dt'"):
            load_config(path)

    def test_invalid_toml(self, tmp_path):
        path = write_config(tmp_path, "engine = [unclosed\n")
        with pytest.raises(ConfigError, match="TOML"):
            load_config(path)

    def test_compare_needs_pair_limit(self, tmp_path):
        path = write_config(
            tmp_path,
            'engine = "compare"\nmode = "chiral"\ngamma_r = 1.0\n'
            "gamma_l = 0.0\nn_photons = 3\n",
        )
        with pytest.raises(ConfigError, match="n_photons"):
            load_config(path)

    def test_chiral_rejects_left_channel_observable(self, tmp_path):
        path = write_config(
            tmp_path,
            'engine = "scatter"\nmode = "chiral"\ngamma_r = 1.0\n'
            'gamma_l = 0.0\nobservables = ["g1_LL"]\n',
        )
        with pytest.raises(ConfigError, match="left channel"):
            load_config(path)

    def test_invalid_rates_surface_as_config_error(self, tmp_path):
        path = write_config(
            tmp_path, 'engine = "scatter"\nmode = "chiral"\ngamma_l = 0.5\n'
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_out_dir_override_wins(self, tmp_path):
        path = write_config(tmp_path, MINIMAL.format(out=tmp_path / "a"))
        cfg = load_config(path, out_dir_override=tmp_path / "b")
        assert cfg.out_dir == tmp_path / "b"


class TestMetrics:
    def test_discrepancy_floor_on_zero_data(self):
        linf, l2 = discrepancy(np.zeros(5), np.zeros(5))
        assert linf == 0.0 and l2 == 0.0

    def test_five_percent_scalar_offset(self):
        a = np.ones(10)
        linf, _ = discrepancy(a, 1.05 * a)
        assert linf == pytest.approx(0.05 / 1.05, rel=1e-12)

    def test_series_identical_pass(self):
        t = np.linspace(0, 1, 50)
        entry = compare_series("x", t, np.sin(t), t, np.sin(t), 0.02)
        assert entry.passed and entry.rel_linf == 0.0

    def test_series_axis_mismatch_without_rule(self):
        t = np.linspace(0, 1, 50)
        with pytest.raises(AxisMismatch):
            compare_series("x", t, np.sin(t), t + 0.5, np.sin(t), 0.02)

    def test_series_resample(self):
        t = np.linspace(0, 1, 201)
        shifted = t[:-1] + 0.0025
        entry = compare_series(
            "x", t, np.sin(t), shifted, np.sin(shifted), 0.001, resample="linear"
        )
        assert entry.passed  # linear interp error ~ (dt)^2

    def test_map_resample(self):
        ax = np.linspace(0.0, 1.0, 101)
        f = lambda x, y: np.exp(1j * x[:, None]) * np.cos(3 * y[None, :])
        a = ComplexMap2D(ax, ax, f(ax, ax), {})
        bx = np.linspace(0.0, 1.0, 41)
        b = ComplexMap2D(bx, bx, f(bx, bx), {})
        entry = compare_maps("m", a, b, 0.005, resample="linear")
        assert entry.passed
        with pytest.raises(AxisMismatch):
            compare_maps("m", a, b, 0.005)

    def test_report_text_is_deterministic(self):
        entries = [CompareEntry("n", 1e-3, 2e-4, 0.02, True)]
        rep = CompareReport(entries, {"version": "x"})
        assert rep.to_text() == rep.to_text()
        assert "overall: pass" in rep.to_text()
        rep.entries.append(CompareEntry("m", 0.5, 0.5, 0.02, False))
        assert not rep.passed
        assert "FAIL" in rep.to_text()


class TestArtifacts:
    def test_series_csv_round_trip(self, tmp_path):
        path = tmp_path / "s.csv"
        cols = {"time": np.linspace(0, 1, 7), "y": np.arange(7.0) ** 2}
        write_series_csv(path, {"engine": "scatter", "k": "v"}, cols)
        meta, back = read_series_csv(path)
        assert meta["engine"] == "scatter" and meta["k"] == "v"
        for name in cols:
            np.testing.assert_array_equal(back[name], cols[name])

    def test_run_writes_expected_files(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, MINIMAL.format(out=tmp_path / "art"))
        )
        paths = run(cfg)
        names = sorted(p.name for p in paths)
        assert names == [
            "scatter_n1_chiral_g1_RR_im.dat",
            "scatter_n1_chiral_g1_RR_re.dat",
            "scatter_n1_chiral_populations.csv",
        ]
        meta, cols = read_series_csv(paths[0])
        assert meta["version"]
        assert meta["units"] == "gamma=1"
        assert set(cols) == {"time", "n_tls", "n_pulse", "n_R"}
        # photon fully emitted on this horizon
        emitted = np.sum(cols["n_R"]) * cfg.grid.dt
        assert emitted == pytest.approx(1.0, abs=2e-3)

    def test_single_photon_g2_is_zero_map(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, MINIMAL.format(out=tmp_path / "z")),
        )
        result = run_scatter(cfg, ["g2_RR"])
        assert np.all(result.maps["g2_RR"].values == 0.0)


class TestCli:
    def test_exit_codes(self, tmp_path, capsys):
        good = write_config(tmp_path, MINIMAL.format(out=tmp_path / "cli"))
        assert cli_main(["run", str(good)]) == 0
        bad = write_config(tmp_path, 'engine = "warp"\n', name="bad.toml")
        assert cli_main(["run", str(bad)]) == 2
        assert "engine" in capsys.readouterr().err
        assert cli_main(["run", str(tmp_path / "missing.toml")]) == 2

    def test_out_dir_flag(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL.format(out=tmp_path / "ignored"))
        dest = tmp_path / "flagged"
        assert cli_main(["run", str(cfg), "-o", str(dest)]) == 0
        assert (dest / "scatter_n1_chiral_populations.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_fig3_export(self, tmp_path):
        body = (
            'engine = "scatter"\nmode = "symmetric"\n'
            "n_photons = 2\nfig3_sigmas = [0.5]\nfig3_n_points = 21\n"
            f'out_dir = "{tmp_path / "maps"}"\n'
        )
        cfg = write_config(tmp_path, body, name="fig3.toml")
        assert cli_main(["fig3", str(cfg), "-j", "2"]) == 0
        files = sorted(p.name for p in (tmp_path / "maps").glob("*.dat"))
        assert files == [
            "fig3_sigma0p5_lin_im.dat",
            "fig3_sigma0p5_lin_re.dat",
            "fig3_sigma0p5_nlin_im.dat",
            "fig3_sigma0p5_nlin_re.dat",
        ]
