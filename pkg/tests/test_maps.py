import numpy as np
import pytest

from wqed.errors import ShapeMismatch
from wqed.maps import ComplexMap2D


def _demo_map():
    ax1 = 0.5 + 0.1 * np.arange(7)
    ax2 = -2.0 + 0.25 * np.arange(5)
    rng = np.random.default_rng(42)
    vals = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
    return ComplexMap2D(ax1, ax2, vals, {"observable": "demo", "gamma": "1.0"})


def test_save_load_round_trip(tmp_path):
    m = _demo_map()
    base = str(tmp_path / "demo")
    paths = m.save(base)
    assert [p.endswith("_re.dat") or p.endswith("_im.dat") for p in paths] == [True, True]
    back = ComplexMap2D.load(base)
    assert back.same_axes(m)
    assert np.array_equal(back.values, m.values)  # %.17e round-trips doubles exactly
    assert back.meta["observable"] == "demo"
    assert back.meta["gamma"] == "1.0"


def test_save_deterministic_bytes(tmp_path):
    m = _demo_map()
    a = str(tmp_path / "a")
    b = str(tmp_path / "b")
    m.save(a)
    m.save(b)
    for part in ("_re.dat", "_im.dat"):
        assert open(a + part, "rb").read() == open(b + part, "rb").read()


def test_header_is_commented(tmp_path):
    m = _demo_map()
    base = str(tmp_path / "h")
    m.save(base)
    lines = open(base + "_re.dat").read().splitlines()
    assert lines[0].startswith("#")
    header = [ln for ln in lines if ln.startswith("#")]
    assert any("axis1_start" in ln for ln in header)
    assert any("observable=demo" in ln for ln in header)
    data_rows = [ln for ln in lines if not ln.startswith("#")]
    assert len(data_rows) == 7
    assert len(data_rows[0].split()) == 5


def test_shape_guard():
    with pytest.raises(ShapeMismatch):
        ComplexMap2D(np.arange(3.0), np.arange(4.0), np.zeros((4, 3)))


def test_nonuniform_axis_rejected_on_save(tmp_path):
    ax = np.array([0.0, 0.1, 0.3])
    m = ComplexMap2D(ax, ax, np.zeros((3, 3), complex))
    with pytest.raises(ValueError):
        m.save(str(tmp_path / "bad"))
