"""Liouville evolution of the even and odd Wigner components.

Even parts follow +-{E, W}_M, odd parts -+[E, W]_anti, with E the effective
Hamiltonian symbol.  For a momentum-only E both generators are diagonal in the
two-momentum representation, which gives the exact ``exact-mixed`` scheme; the
``split-step`` scheme integrates the same right-hand sides with classical RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .phasegrid import from_mixed, integrate, to_mixed
from .starcalc import Symbol, anti_moyal_bracket, mixed_rate, moyal_bracket
from .wigner import COMPONENT_NAMES, WignerComponents, mean_value, total

__all__ = [
    "EvolutionConfig",
    "Trajectory",
    "StabilityError",
    "liouville_rhs_even",
    "liouville_rhs_odd",
    "evolve",
    "propagate",
    "stability_bound",
    "diagnostics",
    "SNAPSHOT_MEMORY_CAP",
]

SNAPSHOT_MEMORY_CAP = 256 * 2**20  # bytes

# (bracket kind, branch sign) for each component.
_GENERATORS = {
    "even_plus": ("moyal", +1.0),
    "even_minus": ("moyal", -1.0),
    "odd_plus": ("anti", +1.0),
    "odd_minus": ("anti", -1.0),
}


class StabilityError(ValueError):
    def __init__(self, dt, dt_max):
        super().__init__(f"dt = {dt:g} exceeds the split-step stability bound {dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_final: float
    scheme: str = "exact-mixed"
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("exact-mixed", "split-step"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(abs(self.t_final) / self.dt))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def final(self) -> WignerComponents:
        return self.snapshots[-1]


def liouville_rhs_even(w: Symbol, ham: Symbol, sign=+1) -> Symbol:
    """sign * {ham, w}_M."""
    out = moyal_bracket(ham, w)
    return Symbol(w.grid, sign * out.values, parity="even")


def liouville_rhs_odd(w: Symbol, ham: Symbol, sign=+1) -> Symbol:
    """-sign * [ham, w]_anti."""
    out = anti_moyal_bracket(ham, w)
    return Symbol(w.grid, -sign * out.values, parity="odd")


def _rhs(name, w, ham):
    kind, sign = _GENERATORS[name]
    if kind == "moyal":
        return liouville_rhs_even(w, ham, sign)
    return liouville_rhs_odd(w, ham, sign)


def stability_bound(ham: Symbol) -> float:
    """Largest split-step dt, hbar / (4 max|E|) over the two-momentum lattice."""
    g = ham.grid
    if ham.is_p_only():
        right, left = g.pair_momenta()
        emax = float(max(np.max(np.abs(ham.p_profile_at(right))), np.max(np.abs(ham.p_profile_at(left)))))
    else:
        emax = float(np.max(np.abs(ham.values)))
    return g.hbar / (4.0 * emax)


def diagnostics(comp: WignerComponents) -> dict:
    g = comp.grid
    w = total(comp)
    P, Q = g.mesh()
    return {
        "norm_even": integrate(comp.even_plus).real + integrate(comp.even_minus).real,
        "norm_odd": float(np.sum(np.abs(comp.odd_plus.values)) * g.dq * g.dp),
        "mean_q": mean_value(Symbol(g, Q), w),
        "mean_p": mean_value(Symbol(g, P), w),
    }


def _mixed_rates(ham):
    rates = {}
    for name in COMPONENT_NAMES:
        kind, sign = _GENERATORS[name]
        factor = sign if kind == "moyal" else -sign
        rates[name] = factor * mixed_rate(ham, kind)
    return rates


def propagate(comp: WignerComponents, ham: Symbol, t: float) -> WignerComponents:
    """Exact propagation to time ``t`` for a momentum-only Hamiltonian symbol."""
    if not ham.is_p_only():
        raise ValueError("exact propagation needs a q-independent Hamiltonian")
    g = comp.grid
    rates = _mixed_rates(ham)
    out = []
    for name, sym in comp.items():
        G = to_mixed(sym.values, g) * np.exp(rates[name] * t)
        out.append(Symbol(g, from_mixed(G, g), parity=sym.parity))
    return WignerComponents(*out)


def _rk4_step(comp, ham, dt):
    def f(c):
        return [_rhs(name, s, ham).values for name, s in c.items()]

    def shift(c, k, h):
        return WignerComponents(*(Symbol(s.grid, s.values + h * kk, parity=s.parity) for (_, s), kk in zip(c.items(), k)))

    k1 = f(comp)
    k2 = f(shift(comp, k1, 0.5 * dt))
    k3 = f(shift(comp, k2, 0.5 * dt))
    k4 = f(shift(comp, k3, dt))
    return WignerComponents(
        *(
            Symbol(s.grid, s.values + dt / 6.0 * (a + 2 * b + 2 * c + d), parity=s.parity)
            for (_, s), a, b, c, d in zip(comp.items(), k1, k2, k3, k4)
        )
    )


def evolve(comp: WignerComponents, ham: Symbol, cfg: EvolutionConfig) -> Trajectory:
    """Evolve all four components and record snapshots every ``record_every`` steps.

    Negative ``t_final`` runs backwards in time.
    """
    g = comp.grid
    n_steps = cfg.n_steps
    direction = math.copysign(1.0, cfg.t_final) if cfg.t_final else 1.0
    record = list(range(0, n_steps + 1, int(cfg.record_every)))
    if record[-1] != n_steps:
        record.append(n_steps)
    mem = len(record) * 4 * g.n**2 * 16
    if mem > SNAPSHOT_MEMORY_CAP:
        raise MemoryError(f"trajectory would hold {mem / 2**20:.0f} MiB of snapshots (cap 256 MiB)")

    traj = Trajectory()
    traj.times.append(0.0)
    traj.snapshots.append(comp)
    traj.diagnostics.append(diagnostics(comp))

    if cfg.scheme == "exact-mixed":
        if not ham.is_p_only():
            raise ValueError("exact-mixed scheme needs a q-independent Hamiltonian")
        rates = _mixed_rates(ham)
        G0 = {name: to_mixed(s.values, g) for name, s in comp.items()}
        for step in record[1:]:
            t = direction * step * cfg.dt
            snap = WignerComponents(
                *(
                    Symbol(g, from_mixed(G0[name] * np.exp(rates[name] * t), g), parity=s.parity)
                    for name, s in comp.items()
                )
            )
            traj.times.append(t)
            traj.snapshots.append(snap)
            traj.diagnostics.append(diagnostics(snap))
        return traj

    dt_max = stability_bound(ham)
    if cfg.dt > dt_max:
        raise StabilityError(cfg.dt, dt_max)
    h = direction * cfg.dt
    state = comp
    wanted = set(record[1:])
    for step in range(1, n_steps + 1):
        state = _rk4_step(state, ham, h)
        if step in wanted:
            traj.times.append(step * h)
            traj.snapshots.append(state)
            traj.diagnostics.append(diagnostics(state))
    return traj
