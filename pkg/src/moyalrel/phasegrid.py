"""Conjugate phase-space lattices, grid storage, spectral transforms and quadrature.

The lattice ties the momentum step to the position step through
``dq * dp * n == 2 * pi * hbar`` so that every discrete Fourier pair used by the
Wigner and star-product kernels is exact on the grid.  Boundaries are periodic
in both directions.

Arrays are indexed ``[p_index, q_index]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UnitSystem",
    "PhaseGrid",
    "GridField",
    "MomentumLine",
    "make_grid",
    "dft_q",
    "integrate",
    "half_grid",
    "to_mixed",
    "from_mixed",
]


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants. Natural units by default (lengths in Compton wavelengths)."""

    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0
    charge: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def rest_energy(self) -> float:
        return self.mass * self.c**2

    @property
    def compton_length(self) -> float:
        return self.hbar / (self.mass * self.c)


def _is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Periodic ``n x n`` lattice over the (p, q) plane.

    Use :func:`make_grid` rather than calling this directly; it derives the
    momentum extent from the conjugacy condition.
    """

    n: int
    q_min: float
    q_max: float
    p_min: float
    p_max: float
    units: UnitSystem = field(default_factory=UnitSystem)

    def __post_init__(self):
        if not _is_power_of_two(self.n) or self.n < 8:
            raise ValueError(f"n must be a power of two >= 8, got {self.n!r}")
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ValueError("grid extents must be positive")
        lhs = self.dq * self.dp * self.n
        if not math.isclose(lhs, 2 * math.pi * self.units.hbar, rel_tol=1e-12):
            raise ValueError(f"non-conjugate lattice: dq*dp*n = {lhs} != 2*pi*hbar")

    @property
    def hbar(self) -> float:
        return self.units.hbar

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n)

    @property
    def p_half(self) -> np.ndarray:
        """Momenta on the interleaved lattice of step dp/2 (length 2n)."""
        return self.p_min + 0.5 * self.dp * np.arange(2 * self.n)

    @property
    def P(self) -> np.ndarray:
        """Momentum differences conjugate to q, centred on zero."""
        return self.dp * (np.arange(self.n) - self.n // 2)

    @property
    def shift_index(self) -> np.ndarray:
        """Signed integer offsets s with P = s * dp."""
        return np.arange(self.n) - self.n // 2

    def mesh(self):
        """Return ``(P_mesh, Q_mesh)`` with shape ``(n, n)`` in [p, q] order."""
        return np.meshgrid(self.p, self.q, indexing="ij")

    def pair_momenta(self):
        """Bra and ket momenta ``p + P/2`` and ``p - P/2`` of the mixed representation.

        Values are literal (not wrapped), shape ``(n, n)`` indexed ``[p, s]``.
        """
        p = self.p[:, None]
        P = self.P[None, :]
        return p + 0.5 * P, p - 0.5 * P

    def pair_indices(self):
        """Half-grid indices (mod 2n) of the bra and ket momenta."""
        k = np.arange(self.n)[:, None]
        s = self.shift_index[None, :]
        two_n = 2 * self.n
        return (2 * k + s) % two_n, (2 * k - s) % two_n

    def compatible(self, other: "PhaseGrid") -> bool:
        return self == other


def make_grid(n, q_extent, p_center=0.0, units=None) -> PhaseGrid:
    """Build a grid centred at q = 0 and p = ``p_center``.

    >>> g = make_grid(8, 8.0)
    >>> g.dq, round(g.dp, 4)
    (1.0, 0.7854)
    """
    units = units or UnitSystem()
    if not _is_power_of_two(n) or n < 8:
        raise ValueError(f"n must be a power of two >= 8, got {n!r}")
    if not q_extent > 0:
        raise ValueError(f"q_extent must be positive, got {q_extent!r}")
    dq = q_extent / n
    dp = 2 * math.pi * units.hbar / (n * dq)
    half_p = 0.5 * n * dp
    return PhaseGrid(
        n=int(n),
        q_min=-0.5 * q_extent,
        q_max=0.5 * q_extent,
        p_min=p_center - half_p,
        p_max=p_center + half_p,
        units=units,
    )


class GridField:
    """Complex samples on a :class:`PhaseGrid`, indexed ``[p, q]``."""

    def __init__(self, grid: PhaseGrid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        self.grid = grid
        self.values = values

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def is_real(self, rtol=1e-10) -> bool:
        scale = np.max(np.abs(self.values))
        return bool(np.max(np.abs(self.values.imag)) <= rtol * scale) if scale else True

    def _check(self, other):
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n})"


class MomentumLine:
    """A 1-D momentum-representation wave function sampled on the grid momenta."""

    def __init__(self, grid: PhaseGrid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise ValueError(f"expected shape {(grid.n,)}, got {values.shape}")
        self.grid = grid
        self.values = values

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dp)

    def half_grid(self) -> np.ndarray:
        return half_grid(self.values, axis=0)

    def __repr__(self):
        return f"MomentumLine(n={self.grid.n})"


# --- spectral kernels -------------------------------------------------------


def _fourier(f, axis, x_min, dx, k_min, dk, hbar, sign):
    """Sum_j f_j exp(sign * i * k_m * x_j / hbar) along ``axis`` with x_j = x_min + j dx."""
    f = np.moveaxis(np.asarray(f, dtype=complex), axis, -1)
    n = f.shape[-1]
    j = np.arange(n)
    pre = np.exp(sign * 1j * k_min * dx * j / hbar)
    post = np.exp(sign * 1j * (k_min * x_min + dk * j * x_min) / hbar)
    if sign < 0:
        out = np.fft.fft(f * pre, axis=-1)
    else:
        out = np.fft.ifft(f * pre, axis=-1) * n
    return np.moveaxis(out * post, -1, axis)


def dft_q(field: GridField, direction="forward", density=False) -> GridField:
    """Fourier transform along the position axis.

    ``forward`` maps f(p, q) to F(p, P) = sum_q f exp(-i P q / hbar) dq on the
    centred P lattice; ``inverse`` undoes it exactly.  With ``density=True`` the
    forward transform carries the extra 1/(2 pi hbar) used by Wigner densities
    (and the inverse removes it).
    """
    g = field.grid
    hbar = g.hbar
    P0 = g.P[0]
    if direction == "forward":
        out = _fourier(field.values, 1, g.q_min, g.dq, P0, g.dp, hbar, -1) * g.dq
        if density:
            out = out / (2 * math.pi * hbar)
    elif direction == "inverse":
        out = _fourier(field.values, 1, P0, g.dp, g.q_min, g.dq, hbar, +1) * g.dp / (2 * math.pi * hbar)
        if density:
            out = out * (2 * math.pi * hbar)
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return GridField(g, out)


def integrate(field: GridField) -> complex:
    """Riemann sum over the whole lattice."""
    g = field.grid
    return complex(np.sum(field.values) * g.dq * g.dp)


def to_mixed(values, grid: PhaseGrid) -> np.ndarray:
    """Phase-space samples W(p, q) -> G(p, P) = sum_q W exp(+i P q / hbar) dq.

    G is the two-momentum kernel at bra ``p + P/2`` and ket ``p - P/2``.
    """
    return _fourier(values, 1, grid.q_min, grid.dq, grid.P[0], grid.dp, grid.hbar, +1) * grid.dq


def from_mixed(G, grid: PhaseGrid) -> np.ndarray:
    """Inverse of :func:`to_mixed`: W = (1/2 pi hbar) sum_P G exp(-i P q / hbar) dP."""
    return _fourier(G, 1, grid.P[0], grid.dp, grid.q_min, grid.dq, grid.hbar, -1) * (
        grid.dp / (2 * math.pi * grid.hbar)
    )


def half_grid(values, axis=0) -> np.ndarray:
    """Trigonometric interpolation onto the interleaved half-step lattice.

    Returns an array twice as long along ``axis``; even entries are the input,
    odd entries are the periodic band-limited interpolant half a step ahead.
    """
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, 0)
    n = values.shape[0]
    spec = np.fft.fft(values, axis=0)
    nu = np.fft.fftfreq(n, d=1.0 / n)
    factor = np.exp(1j * np.pi * nu / n)
    factor[n // 2] = np.cos(np.pi / 2)  # Nyquist term split symmetrically
    shifted = np.fft.ifft(spec * factor.reshape((n,) + (1,) * (values.ndim - 1)), axis=0)
    out = np.empty((2 * n,) + values.shape[1:], dtype=complex)
    out[0::2] = values
    out[1::2] = shifted
    return np.moveaxis(out, 0, axis)
