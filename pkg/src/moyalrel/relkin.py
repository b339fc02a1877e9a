"""Relativistic kinematics and the two-component (Feshbach-Villars) machinery.

Everything here acts mode by mode in the momentum representation and is exact;
it serves as the reference against which the phase-space evolution is checked.

Eigenvectors of the 2x2 Hamiltonian are normalised with the tau_3 pseudo-metric,
``u^dagger tau_3 u = tau_3``::

    u_+ = ( mc^2 + E,   mc^2 - E ) / (2 sqrt(mc^2 E))
    u_- = ( E - mc^2, -(E + mc^2)) / (2 sqrt(mc^2 E))

The sign of ``u_-`` is chosen so that the even/odd relation between charge
blocks of a charge-invariant operator reads
``{A}_nm = (E_m - E_n) / (E_m + E_n) tau_1 [A]_nm``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .phasegrid import MomentumLine, PhaseGrid, UnitSystem

__all__ = [
    "TAU",
    "ChargeMatrix",
    "TwoComponentState",
    "EnergyRep",
    "Spectrum",
    "free_spectrum",
    "oscillator_spectrum",
    "relativistic_level",
    "dispersion",
    "epsilon_factor",
    "chi_factor",
    "fv_hamiltonian",
    "fv_eigenvectors",
    "from_klein_gordon",
    "to_klein_gordon",
    "fv_split",
    "fv_unsplit",
    "fv_evolve",
    "position_operator",
    "momentum_operator",
    "to_energy_basis",
    "check_even_odd_constraint",
    "is_charge_invariant",
    "fv_hamiltonian_matrix",
]

TAU = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}


class ChargeMatrix:
    """2x2 matrix acting on the (phi, chi) charge components."""

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (2, 2) or not np.all(np.isfinite(entries)):
            raise ValueError("charge matrix must be a finite 2x2 array")
        self.entries = entries

    @classmethod
    def from_tau(cls, a0=0.0, a1=0.0, a2=0.0, a3=0.0):
        return cls(a0 * TAU[0] + a1 * TAU[1] + a2 * TAU[2] + a3 * TAU[3])

    def tau_coefficients(self):
        """(a0, a1, a2, a3) with M = a0 + sum a_i tau_i."""
        return tuple(0.5 * np.trace(TAU[i] @ self.entries) for i in range(4))

    def eigenvalues(self):
        return np.linalg.eigvals(self.entries)

    def trace(self):
        return complex(np.trace(self.entries))


@dataclass
class TwoComponentState:
    phi: MomentumLine
    chi: MomentumLine

    @property
    def grid(self) -> PhaseGrid:
        return self.phi.grid

    def pseudo_norm(self) -> float:
        """Generalised norm of (|phi|^2 - |chi|^2) dp; +-1 for charge-definite states."""
        dp = self.grid.dp
        return float(np.sum(np.abs(self.phi.values) ** 2 - np.abs(self.chi.values) ** 2) * dp)

    def as_array(self):
        return np.stack([self.phi.values, self.chi.values])


@dataclass
class EnergyRep:
    """Branch amplitudes C_+(p), C_-(p) in the energy representation."""

    c_plus: MomentumLine
    c_minus: MomentumLine

    @property
    def grid(self) -> PhaseGrid:
        return self.c_plus.grid

    def norm(self) -> float:
        return self.c_plus.norm2() + self.c_minus.norm2()

    def pseudo_norm(self) -> float:
        return self.c_plus.norm2() - self.c_minus.norm2()


@dataclass
class Spectrum:
    """Free dispersion or a discrete non-relativistic level ladder e(n)."""

    kind: str = "free"
    units: UnitSystem = field(default_factory=UnitSystem)
    levels: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("free", "discrete"):
            raise ValueError(f"spectrum kind must be 'free' or 'discrete', got {self.kind!r}")
        if self.kind == "discrete" and self.levels is None:
            raise ValueError("discrete spectrum needs a levels function e(n)")

    def energy(self, p):
        if self.kind != "free":
            raise ValueError("dispersion is defined for the free spectrum only")
        return dispersion(p, self.units)

    def nonrelativistic(self, p):
        return np.asarray(p) ** 2 / (2 * self.units.mass)


def free_spectrum(units=None) -> Spectrum:
    return Spectrum("free", units or UnitSystem())


def oscillator_spectrum(omega, units=None) -> Spectrum:
    """Discrete ladder e(n) = hbar omega (n + 1/2)."""
    units = units or UnitSystem()
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return Spectrum("discrete", units, lambda n: units.hbar * omega * (np.asarray(n) + 0.5))


def relativistic_level(spec: Spectrum, n, sign=+1):
    """Two-band level +- mc^2 sqrt(1 + 2 e(n) / mc^2)."""
    if spec.kind != "discrete":
        raise ValueError("relativistic_level needs a discrete spectrum")
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("level index must be non-negative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    mc2 = spec.units.rest_energy
    e = spec.levels(n)
    out = sign * mc2 * np.sqrt(1.0 + 2.0 * e / mc2)
    return float(out) if out.ndim == 0 else out


def dispersion(p, units=None):
    units = units or UnitSystem()
    m, c = units.mass, units.c
    out = np.sqrt((m * c**2) ** 2 + (c * np.asarray(p, dtype=float)) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def _check_energies(e1, e2):
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if np.any(e1 <= 0) or np.any(e2 <= 0):
        raise ValueError("energy factors need positive energies")
    return e1, e2


def epsilon_factor(e1, e2):
    """(E1 + E2) / (2 sqrt(E1 E2)); >= 1 with equality only on the diagonal."""
    e1, e2 = _check_energies(e1, e2)
    out = (e1 + e2) / (2.0 * np.sqrt(e1 * e2))
    return float(out) if out.ndim == 0 else out


def chi_factor(e1, e2):
    """(E1 - E2) / (2 sqrt(E1 E2)); antisymmetric."""
    e1, e2 = _check_energies(e1, e2)
    out = (e1 - e2) / (2.0 * np.sqrt(e1 * e2))
    return float(out) if out.ndim == 0 else out


def fv_hamiltonian(p=None, spec: Spectrum = None, level=None) -> ChargeMatrix:
    """(tau_3 + i tau_2) e + tau_3 mc^2 for a given kinetic energy e.

    ``e`` is p^2 / 2m for the free spectrum, or ``level`` when supplied.
    """
    spec = spec or free_spectrum()
    mc2 = spec.units.rest_energy
    if level is None:
        if p is None:
            raise ValueError("give a momentum or a level value")
        level = float(spec.nonrelativistic(p))
    e = float(level)
    return ChargeMatrix((TAU[3] + 1j * TAU[2]) * e + TAU[3] * mc2)


def fv_eigenvectors(p, units=None):
    """Pseudo-orthonormal eigenvectors u_+, u_- as arrays of shape (2, len(p))."""
    units = units or UnitSystem()
    mc2 = units.rest_energy
    E = dispersion(p, units)
    norm = 1.0 / (2.0 * np.sqrt(mc2 * E))
    u_plus = np.stack([(mc2 + E) * norm, (mc2 - E) * norm])
    u_minus = np.stack([(E - mc2) * norm, -(E + mc2) * norm])
    return u_plus, u_minus


def from_klein_gordon(psi: MomentumLine, dpsi_dt: MomentumLine, units=None) -> TwoComponentState:
    """phi, chi = (Psi +- i hbar dPsi/dt / mc^2) / sqrt 2."""
    if not psi.grid.compatible(dpsi_dt.grid):
        raise ValueError("grid mismatch")
    units = units or psi.grid.units
    w = 1j * units.hbar / units.rest_energy * dpsi_dt.values
    r2 = math.sqrt(2.0)
    g = psi.grid
    return TwoComponentState(
        MomentumLine(g, (psi.values + w) / r2),
        MomentumLine(g, (psi.values - w) / r2),
    )


def to_klein_gordon(state: TwoComponentState, units=None):
    """Inverse of :func:`from_klein_gordon`, returning (Psi, dPsi/dt)."""
    units = units or state.grid.units
    g = state.grid
    r2 = math.sqrt(2.0)
    psi = (state.phi.values + state.chi.values) / r2
    dpsi = (state.phi.values - state.chi.values) * units.rest_energy / (1j * units.hbar * r2)
    return MomentumLine(g, psi), MomentumLine(g, dpsi)


def fv_split(state: TwoComponentState, spec: Spectrum = None) -> EnergyRep:
    """Project onto the energy branches: C_+ = u_+^dag tau_3 psi, C_- = -u_-^dag tau_3 psi."""
    spec = spec or free_spectrum(state.grid.units)
    if spec.kind != "free":
        raise ValueError("fv_split needs the free spectrum")
    g = state.grid
    up, um = fv_eigenvectors(g.p, spec.units)
    phi, chi = state.phi.values, state.chi.values
    c_plus = up[0] * phi - up[1] * chi
    c_minus = -(um[0] * phi - um[1] * chi)
    return EnergyRep(MomentumLine(g, c_plus), MomentumLine(g, c_minus))


def fv_unsplit(rep: EnergyRep, spec: Spectrum = None) -> TwoComponentState:
    """psi = C_+ u_+ + C_- u_-."""
    spec = spec or free_spectrum(rep.grid.units)
    g = rep.grid
    up, um = fv_eigenvectors(g.p, spec.units)
    cp, cm = rep.c_plus.values, rep.c_minus.values
    return TwoComponentState(
        MomentumLine(g, cp * up[0] + cm * um[0]),
        MomentumLine(g, cp * up[1] + cm * um[1]),
    )


def fv_evolve(state: TwoComponentState, t: float, spec: Spectrum = None) -> TwoComponentState:
    """Exact propagator exp(-i H(p) t / hbar) applied mode by mode.

    Uses H(p)^2 = E(p)^2, so exp(-i H t / hbar) = cos(E t / hbar) - i sin(E t / hbar) H / E.
    """
    spec = spec or free_spectrum(state.grid.units)
    if spec.kind != "free":
        raise ValueError("fv_evolve needs the free spectrum")
    g = state.grid
    units = spec.units
    mc2 = units.rest_energy
    E = dispersion(g.p, units)
    e = spec.nonrelativistic(g.p)
    h11, h12, h21, h22 = e + mc2, e, -e, -e - mc2
    phase = E * t / units.hbar
    cs, sn = np.cos(phase), np.sin(phase) / E
    phi, chi = state.phi.values, state.chi.values
    new_phi = cs * phi - 1j * sn * (h11 * phi + h12 * chi)
    new_chi = cs * chi - 1j * sn * (h21 * phi + h22 * chi)
    return TwoComponentState(MomentumLine(g, new_phi), MomentumLine(g, new_chi))


# --- operators in the charge and energy bases -------------------------------


def momentum_operator(grid: PhaseGrid) -> np.ndarray:
    return np.diag(grid.p).astype(complex)


def position_operator(grid: PhaseGrid) -> np.ndarray:
    """Periodic q = i hbar d/dp on the momentum lattice, built from the DFT."""
    n = grid.n
    # <p_k | x_j> up to normalisation; columns are position eigenvectors.
    F = np.exp(-1j * np.outer(grid.p, grid.q) / grid.hbar) / math.sqrt(n)
    return F @ np.diag(grid.q).astype(complex) @ F.conj().T


def _charge_lift(op):
    """A -> A (x) 1 with index order (momentum, charge)."""
    return np.kron(np.asarray(op, dtype=complex), TAU[0])


def is_charge_invariant(big, atol=1e-12) -> bool:
    """True when a (momentum x charge) matrix commutes with every tau_i (x) 1 lift."""
    dim = big.shape[0] // 2
    for i in (1, 2, 3):
        t = np.kron(np.eye(dim), TAU[i])
        if np.max(np.abs(big @ t - t @ big)) > atol:
            return False
    return True


def fv_hamiltonian_matrix(grid: PhaseGrid, spec: Spectrum = None) -> np.ndarray:
    """Block-diagonal two-component Hamiltonian on the momentum lattice."""
    spec = spec or free_spectrum(grid.units)
    blocks = [fv_hamiltonian(p, spec).entries for p in grid.p]
    out = np.zeros((2 * grid.n, 2 * grid.n), complex)
    for i, b in enumerate(blocks):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b
    return out


def to_energy_basis(op, grid: PhaseGrid, spec: Spectrum = None):
    """Transform a charge-basis operator to the energy basis.

    ``op`` is either an n x n momentum-space operator (lifted as A (x) 1) or a
    2n x 2n matrix with index order (momentum, charge).  Returns the 2n x 2n
    matrix U^{-1} A U with U^{-1} = tau_3 U^dag tau_3 and columns ordered
    (momentum, branch +/-).
    """
    spec = spec or free_spectrum(grid.units)
    op = np.asarray(op, dtype=complex)
    if op.shape == (grid.n, grid.n):
        op = _charge_lift(op)
    if op.shape != (2 * grid.n, 2 * grid.n):
        raise ValueError("operator dimension does not match the grid")
    up, um = fv_eigenvectors(grid.p, spec.units)
    U = np.zeros((2 * grid.n, 2 * grid.n), complex)
    for i in range(grid.n):
        U[2 * i : 2 * i + 2, 2 * i] = up[:, i]
        U[2 * i : 2 * i + 2, 2 * i + 1] = um[:, i]
    T3 = np.kron(np.eye(grid.n), TAU[3])
    return T3 @ U.conj().T @ T3 @ op @ U


def check_even_odd_constraint(op, grid: PhaseGrid, spec: Spectrum = None, tol=1e-8):
    """Compare the odd charge blocks with (E_m - E_n)/(E_m + E_n) tau_1 [A]_nm.

    ``op`` is a charge-invariant momentum operator (n x n) or its lift.
    Returns a dict with the maximum deviation and the pass flag.
    """
    spec = spec or free_spectrum(grid.units)
    Ae = to_energy_basis(op, grid, spec)
    n = grid.n
    blocks = Ae.reshape(n, 2, n, 2).transpose(0, 2, 1, 3)  # [n, m, a, b]
    even = np.zeros_like(blocks)
    even[:, :, 0, 0] = blocks[:, :, 0, 0]
    even[:, :, 1, 1] = blocks[:, :, 1, 1]
    odd = blocks - even
    E = dispersion(grid.p, spec.units)
    ratio = (E[None, :] - E[:, None]) / (E[None, :] + E[:, None])
    predicted = ratio[:, :, None, None] * np.einsum("ab,nmbc->nmac", TAU[1], even)
    dev = float(np.max(np.abs(odd - predicted)))
    return {"max_deviation": dev, "pass": dev <= tol, "tolerance": tol}
