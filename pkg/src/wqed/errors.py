"""Shared exception types.

All errors raised by the simulation engines derive from :class:`WqedError`
so callers can catch one base class.  Config-file problems get their own
subtree (:class:`ConfigError`) because the CLI maps them to a distinct
exit code.
"""

from __future__ import annotations


class WqedError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WqedError):
    """Bad or inconsistent run configuration (unknown key, wrong type, ...)."""


class GridTooNarrow(WqedError):
    """Envelope mass outside the requested grid exceeds the leak tolerance."""


class UnsupportedDetuning(WqedError):
    """Closed-form symmetric coefficients require zero detuning."""


class QuadratureNotConverged(WqedError):
    """Refining the internal quadrature changed the result beyond tolerance."""


class NormalizationDrift(WqedError):
    """A wavefunction norm strayed from 1 beyond the allowed budget."""


class ConservationViolation(WqedError):
    """A conserved quantity (excitation number, probability) was not conserved."""


class ShapeMismatch(WqedError):
    """Tensor shapes passed to a contraction are inconsistent."""


class SvdFailure(WqedError):
    """SVD did not converge, even after the fallback path."""


class NonUnitaryGate(WqedError):
    """A gate matrix failed the unitarity check."""


class SiteOutOfRange(WqedError):
    """A site index does not exist in the chain."""


class OccupationCapTooLow(WqedError):
    """Truncating the per-bin occupation would discard too much weight."""


class StepTooLarge(WqedError):
    """The per-step Hamiltonian is too large for a meaningful gate."""


class BinStillInteracting(WqedError):
    """Requested a measurement on a bin that has not yet scattered."""


class TruncationBudgetExceeded(WqedError):
    """Accumulated SVD truncation error exceeded the configured budget."""


class AxisMismatch(WqedError):
    """Two series/maps cannot be compared because their axes differ."""
