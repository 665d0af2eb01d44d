"""Dense 2D maps (correlation functions, kernels) and their file format.

A map is a complex matrix over two uniform axes.  On disk it becomes a
pair of plain-text files, one for the real part and one for the imaginary
part, each with a ``#``-comment header carrying the axes and arbitrary
key=value metadata, followed by dense rows (axis1 indexes rows, axis2
columns).  Writing is deterministic: the same map produces byte-identical
files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AxisMismatch, ShapeMismatch

_AXIS_RTOL = 1e-9


def _uniform_step(axis: np.ndarray) -> float:
    axis = np.asarray(axis, dtype=float)
    if axis.size < 2:
        raise ValueError("axis needs at least 2 points")
    steps = np.diff(axis)
    step = steps[0]
    if not np.allclose(steps, step, rtol=_AXIS_RTOL, atol=0.0):
        raise ValueError("map axes must be uniform")
    return float(step)


@dataclass
class ComplexMap2D:
    """Complex values over (axis1, axis2); values[i, j] at (axis1[i], axis2[j])."""

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis1 = np.asarray(self.axis1, dtype=float)
        self.axis2 = np.asarray(self.axis2, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.axis1.size, self.axis2.size):
            raise ShapeMismatch(
                f"values shape {self.values.shape} does not match axes"
                f" ({self.axis1.size}, {self.axis2.size})"
            )

    def abs2(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def same_axes(self, other: "ComplexMap2D", rtol: float = 1e-9) -> bool:
        return (
            self.axis1.size == other.axis1.size
            and self.axis2.size == other.axis2.size
            and np.allclose(self.axis1, other.axis1, rtol=rtol, atol=1e-12)
            and np.allclose(self.axis2, other.axis2, rtol=rtol, atol=1e-12)
        )

    # -- I/O -------------------------------------------------------------

    def save(self, path_base: str) -> list:
        """Write ``<base>_re.dat`` and ``<base>_im.dat``; returns the paths."""
        paths = []
        for part, comp in (("re", self.values.real), ("im", self.values.imag)):
            path = f"{path_base}_{part}.dat"
            with open(path, "w") as fh:
                fh.write(f"# part={part}\n")
                fh.write(
                    f"# axis1_start={float(self.axis1[0])!r}"
                    f" axis1_step={_uniform_step(self.axis1)!r}"
                    f" axis1_n={self.axis1.size}\n"
                )
                fh.write(
                    f"# axis2_start={float(self.axis2[0])!r}"
                    f" axis2_step={_uniform_step(self.axis2)!r}"
                    f" axis2_n={self.axis2.size}\n"
                )
                for key in self.meta:
                    fh.write(f"# {key}={self.meta[key]}\n")
                np.savetxt(fh, comp, fmt="%.17e")
            paths.append(path)
        return paths

    @staticmethod
    def load(path_base: str) -> "ComplexMap2D":
        parts = {}
        meta = {}
        axes = {}
        for part in ("re", "im"):
            path = f"{path_base}_{part}.dat"
            with open(path) as fh:
                lines = fh.readlines()
            header = [ln[1:].strip() for ln in lines if ln.startswith("#")]
            for ln in header:
                for tok in ln.split() if "axis" in ln.split("=", 1)[0] else [ln]:
                    key, _, val = tok.partition("=")
                    if key.startswith("axis"):
                        axes[key] = val
                    elif key != "part":
                        meta[key] = val
            parts[part] = np.loadtxt(path, comments="#")
        try:
            ax = [
                float(axes[f"axis{i}_start"])
                + float(axes[f"axis{i}_step"]) * np.arange(int(axes[f"axis{i}_n"]))
                for i in (1, 2)
            ]
        except KeyError as exc:
            raise AxisMismatch(f"map file missing axis header: {exc}") from exc
        values = np.atleast_2d(parts["re"]) + 1j * np.atleast_2d(parts["im"])
        return ComplexMap2D(ax[0], ax[1], values, meta)
