"""Wigner functions for charge-invariant observables.

All constructions go through the two-momentum kernel G(p, P) with left
momentum ``p - P/2`` and right momentum ``p + P/2``; the phase-space function
is W = (1/2 pi hbar) sum_P G exp(-i P q / hbar) dP (see
:func:`moyalrel.phasegrid.from_mixed`).  Half-step momenta come from the
periodic interpolant of each amplitude, so the construction is exact for
packets that fit inside the position window.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .phasegrid import MomentumLine, PhaseGrid, from_mixed, half_grid, integrate
from .relkin import EnergyRep, Spectrum, chi_factor, dispersion, epsilon_factor, free_spectrum
from .starcalc import Symbol

__all__ = [
    "WavePacketSpec",
    "WignerComponents",
    "cross_wigner",
    "decompose",
    "total",
    "mean_value",
    "coherent_state",
    "gaussian_wigner",
    "negativity_volume",
    "COMPONENT_NAMES",
]

COMPONENT_NAMES = ("even_plus", "even_minus", "odd_plus", "odd_minus")
TAIL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class WavePacketSpec:
    q0: float = 0.0
    p0: float = 0.0
    sigma_q: float = 1.0

    def __post_init__(self):
        if not self.sigma_q > 0:
            raise ValueError(f"sigma_q must be positive, got {self.sigma_q!r}")


@dataclass
class WignerComponents:
    """The two even (particle, antiparticle) and two odd (interference) pieces."""

    even_plus: Symbol
    even_minus: Symbol
    odd_plus: Symbol
    odd_minus: Symbol

    @property
    def grid(self) -> PhaseGrid:
        return self.even_plus.grid

    def items(self):
        return [(name, getattr(self, name)) for name in COMPONENT_NAMES]

    def branch_weights(self):
        return {
            "even_plus": integrate(self.even_plus).real,
            "even_minus": integrate(self.even_minus).real,
        }

    def norm(self) -> float:
        w = self.branch_weights()
        return w["even_plus"] + w["even_minus"]

    def map(self, fn):
        return WignerComponents(*(fn(name, s) for name, s in self.items()))


def _pair_values(line_half, grid):
    right_idx, left_idx = grid.pair_indices()
    return line_half[right_idx], line_half[left_idx]


def cross_wigner(a: MomentumLine, b: MomentumLine) -> Symbol:
    """(1/2 pi hbar) integral a*(p + P/2) b(p - P/2) exp(-i P q / hbar) dP."""
    if not a.grid.compatible(b.grid):
        raise ValueError("grid mismatch")
    g = a.grid
    ar, _ = _pair_values(a.half_grid(), g)
    _, bl = _pair_values(b.half_grid(), g)
    return Symbol(g, from_mixed(np.conj(ar) * bl, g))


def pair_weights(grid: PhaseGrid, units=None):
    """Energy factors on the two-momentum lattice.

    Returns ``(eps, chi_lr)`` where ``eps = epsilon(E_left, E_right)`` and
    ``chi_lr = chi(E_left, E_right)``, both shape ``(n, n)`` indexed [p, P].
    """
    units = units or grid.units
    right, left = grid.pair_momenta()
    El, Er = dispersion(left, units), dispersion(right, units)
    return epsilon_factor(El, Er), chi_factor(El, Er)


def component_kernels(rep: EnergyRep, spec: Spectrum = None):
    """Two-momentum kernels of the four components, in :data:`COMPONENT_NAMES` order."""
    spec = spec or free_spectrum(rep.grid.units)
    if spec.kind != "free":
        raise ValueError("decompose needs the free spectrum")
    g = rep.grid
    pr, pl = _pair_values(rep.c_plus.half_grid(), g)
    mr, ml = _pair_values(rep.c_minus.half_grid(), g)
    eps, chi_lr = pair_weights(g, spec.units)
    return (
        eps * np.conj(pr) * pl,
        eps * np.conj(mr) * ml,
        chi_lr * np.conj(pr) * ml,
        -chi_lr * np.conj(mr) * pl,
    )


def decompose(rep: EnergyRep, spec: Spectrum = None) -> WignerComponents:
    """Even and odd Wigner components of a state given by its branch amplitudes.

    The energy factors multiply the two-momentum kernel before the transform to
    phase space: epsilon for the even pieces, chi for the interference pieces.
    """
    norm = rep.norm()
    if abs(norm - 1.0) > 1e-8:
        warnings.warn(f"EnergyRep is not normalised (norm = {norm:.12g}); proceeding", stacklevel=2)
    g = rep.grid
    kernels = component_kernels(rep, spec)
    parity = ("even", "even", "odd", "odd")
    return WignerComponents(*(Symbol(g, from_mixed(k, g), parity=par) for k, par in zip(kernels, parity)))


def total(comp: WignerComponents) -> Symbol:
    """Sum of the four components."""
    v = sum(s.values for _, s in comp.items())
    return Symbol(comp.grid, v)


def mean_value(observable: Symbol, w: Symbol) -> float:
    """Phase-space average of a charge-invariant observable."""
    if not observable.grid.compatible(w.grid):
        raise ValueError("grid mismatch")
    val = integrate(Symbol(w.grid, observable.values * w.values))
    return float(val.real)


def coherent_state(packet: WavePacketSpec, grid: PhaseGrid, spec: Spectrum = None) -> EnergyRep:
    """Gaussian positive-branch packet with C_- = 0, normalised on the lattice."""
    spec = spec or free_spectrum(grid.units)
    hbar = grid.hbar
    p = grid.p
    sig = packet.sigma_q
    amp = np.exp(-((p - packet.p0) ** 2) * sig**2 / (2 * hbar**2)) * np.exp(-1j * p * packet.q0 / hbar)
    # Tails: momentum edge and position edge (position envelope has width sigma_q).
    edge_p = math.exp(-(min(packet.p0 - grid.p_min, grid.p_max - packet.p0) ** 2) * sig**2 / (2 * hbar**2))
    dist_q = min(packet.q0 - grid.q_min, grid.q_max - packet.q0)
    edge_q = math.exp(-(dist_q**2) / (2 * sig**2)) if dist_q > 0 else 1.0
    # Kernel pairs more than half the momentum period apart alias onto each other.
    span = grid.p_max - grid.p_min
    pair_tail = math.exp(-((0.25 * span * sig / hbar) ** 2))
    # The energy weights decay only as exp(-2 |q| / compton length) in position.
    compton_tail = math.exp(-2.0 * dist_q / grid.units.compton_length) if dist_q > 0 else 1.0
    if max(edge_p, edge_q, pair_tail, compton_tail) > TAIL_TOLERANCE:
        raise ValueError(
            "packet does not fit the grid: "
            f"momentum tail {edge_p:.2e}, position tail {edge_q:.2e}, pair tail {pair_tail:.2e}, "
            f"Compton tail {compton_tail:.2e}"
        )
    amp = amp / math.sqrt(np.sum(np.abs(amp) ** 2) * grid.dp)
    return EnergyRep(MomentumLine(grid, amp), MomentumLine(grid, np.zeros_like(amp)))


def gaussian_wigner(packet: WavePacketSpec, grid: PhaseGrid) -> Symbol:
    """Closed-form non-relativistic Wigner function of the Gaussian packet."""
    hbar = grid.hbar
    P, Q = grid.mesh()
    s = packet.sigma_q
    w = np.exp(-((Q - packet.q0) ** 2) / s**2 - s**2 * (P - packet.p0) ** 2 / hbar**2) / (math.pi * hbar)
    return Symbol(grid, w)


def negativity_volume(w: Symbol) -> float:
    """Integral of the negative part, max(0, -W)."""
    g = w.grid
    return float(np.sum(np.maximum(0.0, -w.values.real)) * g.dq * g.dp)
