"""Quantization conditions for even and odd Wigner components of a free particle.

A candidate component W is mapped to its two-momentum kernel
F(p1, p2) = integral W((p1 + p2)/2, q) exp(i (p1 - p2) q / hbar) dq, and the mixed
derivative d^2 ln F / dp1 dp2 is compared with the energy-dependent right-hand
sides.  Only these two conditions are checked; the report flags the check as
partial.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .phasegrid import PhaseGrid, UnitSystem, to_mixed
from .relkin import dispersion
from .starcalc import Symbol

__all__ = [
    "QuantizationReport",
    "NearZeroError",
    "SingularWindowError",
    "TwoPointKernel",
    "two_point_kernel",
    "log_mixed_second_derivative",
    "rhs_even",
    "rhs_odd",
    "verify",
]

NEAR_ZERO = 1e-6
ODD_BAND_STEPS = 4


class NearZeroError(ValueError):
    """The kernel nearly vanishes inside the test window."""


class SingularWindowError(ValueError):
    """The odd right-hand side diverges at the requested momenta."""


@dataclass
class TwoPointKernel:
    """F sampled on the rotated lattice: ``values[k, s]`` at p1 = p_k + P_s/2, p2 = p_k - P_s/2."""

    grid: PhaseGrid
    values: np.ndarray

    @property
    def p1(self):
        return self.grid.pair_momenta()[0]

    @property
    def p2(self):
        return self.grid.pair_momenta()[1]


@dataclass
class QuantizationReport:
    kind: str
    window: tuple
    tolerance: float
    max_abs_deviation: float
    passed: bool
    excluded_band: float = 0.0
    deviation_field: np.ndarray = field(default=None, repr=False)
    lhs_field: np.ndarray = field(default=None, repr=False)
    p1: np.ndarray = field(default=None, repr=False)
    p2: np.ndarray = field(default=None, repr=False)
    richardson: bool = True
    partial: bool = True

    def lhs_at(self, p1, p2) -> complex:
        """LHS at the tested cell nearest to (p1, p2)."""
        mask = np.isfinite(self.lhs_field)
        d = np.where(mask, (self.p1 - p1) ** 2 + (self.p2 - p2) ** 2, np.inf)
        idx = np.unravel_index(np.argmin(d), d.shape)
        return complex(self.lhs_field[idx])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "window": {"p_lo": self.window[0], "p_hi": self.window[1]},
            "tolerance": self.tolerance,
            "max_abs_deviation": self.max_abs_deviation,
            "pass": self.passed,
            "excluded_band": self.excluded_band,
            "richardson": self.richardson,
            "partial": self.partial,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def two_point_kernel(w: Symbol) -> TwoPointKernel:
    """One transform along q per midpoint momentum."""
    return TwoPointKernel(w.grid, to_mixed(w.values, w.grid))


def _second_diffs(F, step):
    """Mixed p1-p2 difference of ln F with momentum step ``step`` lattice spacings.

    Uses the cross stencil [ln F(+,+) + ln F(-,-) - ln F(+,-) - ln F(-,+)] / 4,
    which cancels any separable term f(p1) + g(p2) exactly.  Shifting both
    momenta moves the midpoint index k; shifting them apart moves the shift
    index s by two.  The logs are taken of one ratio, which follows the
    continuous branch as long as the phase moves by less than pi across the
    stencil.
    """
    n = F.shape[0]
    out = np.full(F.shape, np.nan + 0j)
    h = step
    rows = slice(h, n - h)
    cols = slice(2 * h, n - 2 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = F[2 * h:, cols] * F[:n - 2 * h, cols]
        den = F[rows, 4 * h:] * F[rows, :n - 4 * h]
        out[rows, cols] = 0.25 * np.log(num / den)
    return out


def log_mixed_second_derivative(F: TwoPointKernel, richardson=True) -> np.ndarray:
    """d^2 ln F / dp1 dp2 on the kernel lattice (NaN where the stencil leaves the array).

    Cross differences with momentum step dp; with ``richardson`` the step-2dp
    estimate removes the leading error term.
    """
    dp = F.grid.dp
    with np.errstate(divide="ignore", invalid="ignore"):
        fine = _second_diffs(F.values, 1) / dp**2
        if not richardson:
            return fine
        coarse = _second_diffs(F.values, 2) / (2 * dp) ** 2
        return (4 * fine - coarse) / 3


def _energies(p1, p2, units):
    units = units or UnitSystem()
    return dispersion(np.asarray(p1, float), units), dispersion(np.asarray(p2, float), units), units


def rhs_even(p1, p2, units=None):
    """-c^4 p1 p2 / (E1 E2 (E1 + E2)^2)."""
    e1, e2, u = _energies(p1, p2, units)
    out = -(u.c**4) * np.asarray(p1) * np.asarray(p2) / (e1 * e2 * (e1 + e2) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def rhs_odd(p1, p2, units=None):
    """-c^4 p1 p2 / (E1 E2 (E1 - E2)^2), as printed for the odd condition."""
    e1, e2, u = _energies(p1, p2, units)
    gap = np.abs(e1 - e2)
    if np.any(gap < 1e-6 * u.rest_energy):
        raise SingularWindowError("odd right-hand side is singular where E(p1) = E(p2)")
    out = -(u.c**4) * np.asarray(p1) * np.asarray(p2) / (e1 * e2 * (e1 - e2) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def _stencil_points(p1, p2, reach, dp):
    """All (p1, p2) read by a cross stencil of up to ``reach`` steps around each cell."""
    pts = []
    for a in range(-reach, reach + 1):
        pts.append((p1 + a * dp, p2 + a * dp))
        pts.append((p1 + a * dp, p2 - a * dp))
    return pts


def verify(w: Symbol, kind="even", window=(-1.0, 1.0), tolerance=1e-4, rhs="relativistic",
           richardson=True, literal_odd=False) -> QuantizationReport:
    """Test a candidate component against the quantization condition of ``kind``.

    ``rhs='nonrelativistic'`` compares against zero instead.  For ``kind='odd'``
    the default compares with the sign produced by the chi weight (the negative
    of :func:`rhs_odd`); ``literal_odd=True`` uses :func:`rhs_odd` as printed.
    """
    if kind not in ("even", "odd"):
        raise ValueError(f"kind must be 'even' or 'odd', got {kind!r}")
    if rhs not in ("relativistic", "nonrelativistic"):
        raise ValueError(f"rhs must be 'relativistic' or 'nonrelativistic', got {rhs!r}")
    p_lo, p_hi = float(window[0]), float(window[1])
    if not p_lo < p_hi:
        raise ValueError(f"malformed window: p_lo={p_lo} >= p_hi={p_hi}")
    g = w.grid
    units = g.units
    F = two_point_kernel(w)
    p1, p2 = F.p1, F.p2
    dp = g.dp

    lhs = log_mixed_second_derivative(F, richardson=richardson)
    inside = (p1 >= p_lo - 1e-12) & (p1 <= p_hi + 1e-12) & (p2 >= p_lo - 1e-12) & (p2 <= p_hi + 1e-12)
    inside &= np.isfinite(lhs)
    if not inside.any():
        raise ValueError("window contains no lattice cells with a full stencil")

    band = 0.0
    reach = 2 if richardson else 1
    if kind == "odd":
        band = ODD_BAND_STEPS * dp
        keep = (np.abs(p1 - p2) >= band) & (np.abs(p1 + p2) >= band)
        for a, b in _stencil_points(p1, p2, reach, dp):
            keep &= (np.abs(a - b) > 0.5 * dp) & (np.abs(a + b) > 0.5 * dp)
        inside &= keep
        if not inside.any():
            raise SingularWindowError("the excluded band covers the whole window")

    # Near-zero guard over every kernel sample a tested stencil reads.
    mag = np.abs(F.values)
    floor = NEAR_ZERO * mag.max()
    n = g.n
    touched = np.zeros_like(inside)
    ks, ss = np.nonzero(inside)
    for d in range(-reach, reach + 1):
        touched[np.clip(ks + d, 0, n - 1), ss] = True
        touched[ks, np.clip(ss + 2 * d, 0, n - 1)] = True
    if np.any(mag[touched] < floor):
        bad = np.abs(p1[touched & (mag < floor)]) + np.abs(p2[touched & (mag < floor)])
        raise NearZeroError(
            f"kernel falls below {NEAR_ZERO:g} of its maximum inside the window "
            f"(nearest at |p1|+|p2| = {bad.min():.4g}); shrink the window"
        )

    if rhs == "nonrelativistic":
        target = np.zeros(p1.shape)
    elif kind == "even":
        target = rhs_even(p1, p2, units)
    else:
        target = np.full(p1.shape, np.nan)
        target[inside] = rhs_odd(p1[inside], p2[inside], units)
        if not literal_odd:
            target = -target

    dev = np.full(p1.shape, np.nan)
    dev[inside] = np.abs(lhs[inside] - target[inside])
    lhs_field = np.where(inside, lhs, np.nan)
    max_dev = float(np.max(dev[inside]))
    return QuantizationReport(
        kind=kind,
        window=(p_lo, p_hi),
        tolerance=float(tolerance),
        max_abs_deviation=max_dev,
        passed=bool(max_dev <= tolerance),
        excluded_band=band,
        deviation_field=dev,
        lhs_field=lhs_field,
        p1=p1,
        p2=p2,
        richardson=richardson,
    )
