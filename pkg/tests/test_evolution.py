import numpy as np
import pytest

from moyalrel.evolution import (
    EvolutionConfig,
    StabilityError,
    diagnostics,
    evolve,
    liouville_rhs_even,
    liouville_rhs_odd,
    propagate,
    stability_bound,
)
from moyalrel.phasegrid import MomentumLine, from_mixed, integrate, make_grid, to_mixed
from moyalrel.relkin import EnergyRep, dispersion, fv_evolve, fv_split, fv_unsplit
from moyalrel.starcalc import Symbol, anti_moyal_bracket
from moyalrel.wigner import WavePacketSpec, coherent_state, decompose


def free_ham(g):
    return Symbol.from_p_function(g, lambda p: dispersion(p, g.units))


def packet(g, q0, p0, weight=1.0):
    amp = np.exp(-((g.p - p0) ** 2) / 2 - 1j * g.p * q0)
    return MomentumLine(g, np.sqrt(weight) * amp / np.sqrt(np.sum(np.abs(amp) ** 2) * g.dp))


@pytest.fixture
def mixed_rep(packet_grid):
    return EnergyRep(packet(packet_grid, 0.0, 0.5, 0.7), packet(packet_grid, 1.0, -0.5, 0.3))


def single_mode(g, k, s):
    G = np.zeros((g.n, g.n), complex)
    G[k, s] = 1.0
    return Symbol(g, from_mixed(G, g))


def oracle_components(rep, t):
    return decompose(fv_split(fv_evolve(fv_unsplit(rep), t)))


# --- right-hand sides -------------------------------------------------------


def test_even_rhs_vanishes_for_q_independent(packet_grid):
    w = Symbol.from_p_function(packet_grid, lambda p: np.exp(-(p**2)))
    assert np.max(np.abs(liouville_rhs_even(w, free_ham(packet_grid)).values)) < 1e-15


def test_even_rhs_nonrelativistic_transport(packet_grid):
    g = packet_grid
    ham = Symbol.from_polynomial(g, {(0, 0): 1.0, (0, 2): 0.5})
    P, Q = g.mesh()
    w = Symbol(g, np.exp(-((Q - 0.5) ** 2) - (P - 0.3) ** 2))
    k = 2 * np.pi * np.fft.fftfreq(g.n, d=g.dq)
    dq_w = np.fft.ifft(1j * k[None, :] * np.fft.fft(w.values, axis=1), axis=1)
    assert np.max(np.abs(liouville_rhs_even(w, ham).values - (-P * dq_w))) < 1e-6


@pytest.mark.parametrize("k, s", [(64, 70), (50, 60), (80, 64)])
def test_single_mode_eigenvalues(packet_grid, k, s):
    g = packet_grid
    ham = free_ham(g)
    right, left = g.pair_momenta()
    el, er = dispersion(left[k, s]), dispersion(right[k, s])
    w = single_mode(g, k, s)
    G0 = to_mixed(w.values, g)
    for sign in (+1, -1):
        even = to_mixed(liouville_rhs_even(w, ham, sign).values, g)
        assert even[k, s] == pytest.approx(sign * (el - er) / 1j * G0[k, s], abs=1e-12)
        odd = to_mixed(liouville_rhs_odd(w, ham, sign).values, g)
        assert odd[k, s] == pytest.approx(-sign * (el + er) / 1j * G0[k, s], abs=1e-12)
        mask = np.ones(G0.shape, bool)
        mask[k, s] = False
        assert np.max(np.abs(even[mask])) < 1e-12 and np.max(np.abs(odd[mask])) < 1e-12


def test_odd_rhs_constant_energy(packet_grid):
    e0 = 1.7
    P, Q = packet_grid.mesh()
    w = Symbol(packet_grid, np.exp(-(P**2) - Q**2) * (1 + 0.5j))
    ham = Symbol.constant(packet_grid, e0)
    for sign in (+1, -1):
        out = liouville_rhs_odd(w, ham, sign).values
        assert np.max(np.abs(out - (-sign * 2 * e0 / 1j * w.values))) < 1e-13 * np.max(np.abs(out))


def test_odd_generator_is_symmetric(packet_grid):
    ham = free_ham(packet_grid)
    w = decompose(EnergyRep(packet(packet_grid, 0, 0.5, 0.5), packet(packet_grid, 0, -0.5, 0.5))).odd_plus
    assert np.array_equal(anti_moyal_bracket(ham, w).values, anti_moyal_bracket(w, ham).values)


def test_odd_flow_keeps_mode_moduli(mixed_rep):
    comp = decompose(mixed_rep)
    g = comp.grid
    later = propagate(comp, free_ham(g), 3.0)
    for name in ("odd_plus", "odd_minus"):
        before = np.abs(to_mixed(getattr(comp, name).values, g))
        after = np.abs(to_mixed(getattr(later, name).values, g))
        assert np.max(np.abs(before - after)) < 1e-12


# --- stepping ---------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.0, t_final=1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.1, t_final=1.0, scheme="leapfrog")
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.1, t_final=1.0, record_every=0)
    assert EvolutionConfig(dt=0.1, t_final=-1.0).n_steps == 10


def test_stability_bound_value(packet_grid):
    right, left = packet_grid.pair_momenta()
    emax = max(dispersion(right).max(), dispersion(left).max())
    assert stability_bound(free_ham(packet_grid)) == pytest.approx(1 / (4 * emax))


def test_split_step_refuses_large_dt(mixed_rep):
    comp = decompose(mixed_rep)
    with pytest.raises(StabilityError) as err:
        evolve(comp, free_ham(comp.grid), EvolutionConfig(dt=0.5, t_final=1.0, scheme="split-step"))
    assert err.value.dt_max == pytest.approx(stability_bound(free_ham(comp.grid)))
    assert "stability bound" in str(err.value)


def test_exact_scheme_needs_momentum_only_hamiltonian(mixed_rep):
    comp = decompose(mixed_rep)
    P, Q = comp.grid.mesh()
    ham = Symbol(comp.grid, 1 + P**2 + 0.1 * np.exp(-(Q**2)))
    with pytest.raises(ValueError, match="q-independent"):
        evolve(comp, ham, EvolutionConfig(dt=0.1, t_final=1.0))


def test_snapshot_memory_cap(mixed_rep):
    comp = decompose(mixed_rep)
    cfg = EvolutionConfig(dt=1e-4, t_final=1.0)
    with pytest.raises(MemoryError):
        evolve(comp, free_ham(comp.grid), cfg)


def test_recording_schedule(mixed_rep):
    comp = decompose(mixed_rep)
    traj = evolve(comp, free_ham(comp.grid), EvolutionConfig(dt=0.1, t_final=1.0, record_every=3))
    assert traj.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    assert traj.snapshots[0] is comp
    assert len(traj.diagnostics) == len(traj.snapshots)
    assert set(traj.diagnostics[0]) == {"norm_even", "norm_odd", "mean_q", "mean_p"}


def test_backwards_time(mixed_rep):
    comp = decompose(mixed_rep)
    traj = evolve(comp, free_ham(comp.grid), EvolutionConfig(dt=0.5, t_final=-2.0))
    assert traj.times == pytest.approx([0.0, -0.5, -1.0, -1.5, -2.0])
    ref = oracle_components(mixed_rep, -2.0)
    for (_, a), (_, b) in zip(traj.final().items(), ref.items()):
        assert np.max(np.abs(a.values - b.values)) < 1e-8


def test_exact_scheme_matches_oracle(mixed_rep):
    comp = decompose(mixed_rep)
    final = evolve(comp, free_ham(comp.grid), EvolutionConfig(dt=1.0, t_final=1.0)).final()
    ref = oracle_components(mixed_rep, 1.0)
    for (_, a), (_, b) in zip(final.items(), ref.items()):
        assert np.max(np.abs(a.values - b.values)) < 1e-8


def test_time_reversal(mixed_rep):
    comp = decompose(mixed_rep)
    ham = free_ham(comp.grid)
    there = evolve(comp, ham, EvolutionConfig(dt=1.0, t_final=4.0)).final()
    back = evolve(there, ham, EvolutionConfig(dt=1.0, t_final=-4.0)).final()
    for (_, a), (_, b) in zip(back.items(), comp.items()):
        assert np.max(np.abs(a.values - b.values)) < 1e-9


def test_split_step_is_fourth_order(mixed_rep):
    comp = decompose(mixed_rep)
    ham = free_ham(comp.grid)
    exact = propagate(comp, ham, 0.5)
    gaps = []
    for dt in (0.0125, 0.00625):
        final = evolve(comp, ham, EvolutionConfig(dt=dt, t_final=0.5, scheme="split-step", record_every=1000)).final()
        gaps.append(max(np.max(np.abs(a.values - b.values)) for (_, a), (_, b) in zip(final.items(), exact.items())))
    assert gaps[0] / gaps[1] >= 14.0


def test_split_step_keeps_even_norm_and_reality(mixed_rep):
    comp = decompose(mixed_rep)
    traj = evolve(comp, free_ham(comp.grid), EvolutionConfig(dt=0.01, t_final=1.0, scheme="split-step", record_every=25))
    norms = [d["norm_even"] for d in traj.diagnostics]
    assert max(norms) - min(norms) < 1e-12
    final = traj.final()
    assert np.max(np.abs(final.even_plus.values.imag)) < 1e-10
    assert np.max(np.abs(final.even_minus.values.imag)) < 1e-10


def test_mean_position_drift(packet_grid):
    rep = coherent_state(WavePacketSpec(0.0, 0.5, 1.0), packet_grid)
    comp = decompose(rep)
    traj = evolve(comp, free_ham(packet_grid), EvolutionConfig(dt=5.0, t_final=5.0))
    p = packet_grid.p
    velocity = np.sum(p / dispersion(p) * np.abs(rep.c_plus.values) ** 2) * packet_grid.dp
    drift = traj.diagnostics[-1]["mean_q"] - traj.diagnostics[0]["mean_q"]
    assert drift == pytest.approx(5.0 * velocity, abs=1e-5)
    assert traj.diagnostics[-1]["mean_p"] == pytest.approx(traj.diagnostics[0]["mean_p"], abs=1e-10)


def test_interference_phase(packet_grid):
    # Two narrow-ish peaks: the odd kernel at the pair (p1, p2) rotates by exp(i (E1 + E2) t).
    g = packet_grid
    rep = EnergyRep(packet(g, 0.0, 1.0, 0.5), packet(g, 0.0, -1.0, 0.5))
    comp = decompose(rep)
    t = 2.5
    later = propagate(comp, free_ham(g), t)
    G0 = to_mixed(comp.odd_plus.values, g)
    G1 = to_mixed(later.odd_plus.values, g)
    k, s = np.unravel_index(np.argmax(np.abs(G0)), G0.shape)
    right, left = g.pair_momenta()
    phase = np.exp(1j * (dispersion(left[k, s]) + dispersion(right[k, s])) * t)
    assert G1[k, s] / G0[k, s] == pytest.approx(phase, abs=1e-12)
    oracle = to_mixed(oracle_components(rep, t).odd_plus.values, g)
    assert oracle[k, s] / G0[k, s] == pytest.approx(phase, abs=1e-6)


def test_diagnostics_of_initial_packet(packet_grid):
    comp = decompose(coherent_state(WavePacketSpec(0.4, 0.5, 1.0), packet_grid))
    d = diagnostics(comp)
    assert d["norm_even"] == pytest.approx(1.0, abs=1e-10)
    assert d["norm_odd"] == 0.0
    assert d["mean_q"] == pytest.approx(0.4, abs=1e-8)
    assert d["mean_p"] == pytest.approx(0.5, abs=1e-8)
    assert integrate(comp.even_plus).real == pytest.approx(d["norm_even"])
