import numpy as np
import pytest

from csespm.errors import ParameterError
from csespm.params import DiscretizationConfig
from csespm.simulate import (AffinePropagator, LoadProfile, SolverConfig,
                             cc_profile, cycle_profile, initial_state,
                             mass_audit, read_result_csv, simulate,
                             synthetic_dynamic_profile)
from csespm import systems


def test_load_profile_validation():
    with pytest.raises(ParameterError):
        LoadProfile(np.array([0.0]), np.array([1.0]))
    with pytest.raises(ParameterError):
        LoadProfile(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ParameterError):
        LoadProfile(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    p = LoadProfile(np.array([0.0, 10.0, 20.0]), np.array([1.0, -2.0, -2.0]))
    assert p.current_at(5.0) == 1.0
    assert p.current_at(15.0) == -2.0
    assert list(p.segments()) == [(0.0, 10.0, 1.0), (10.0, 20.0, -2.0)]


def test_profile_csv_round_trip(tmp_path, params):
    p = synthetic_dynamic_profile(params, duration=200.0)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    back = LoadProfile.from_csv(path)
    assert np.allclose(back.times, p.times)
    assert np.allclose(back.currents, p.currents)


def test_affine_propagator_matches_expm():
    import scipy.linalg
    rng = np.random.default_rng(3)
    A = -np.eye(4) * rng.uniform(0.5, 2.0, 4)
    A += np.diag(rng.uniform(0.1, 0.3, 3), 1)
    A += np.diag(rng.uniform(0.1, 0.3, 3), -1)
    b = rng.standard_normal(4)
    x = rng.standard_normal(4)
    h = 0.7
    E = scipy.linalg.expm(A * h)
    phi = np.linalg.solve(A, E - np.eye(4))
    want = E @ x + phi @ b
    got = AffinePropagator(A).step(x, b, h)
    assert np.allclose(got, want, rtol=1e-10)


def test_zero_current_is_fixed_point(params, disc4):
    init = initial_state(params, disc4, 0.7, "dis")
    prof = LoadProfile(np.array([0.0, 50.0]), np.zeros(2))
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    assert np.allclose(res.neg_c[-1], res.neg_c[0], rtol=1e-14)
    assert np.allclose(res.pos_c[-1], res.pos_c[0], rtol=1e-14)
    assert np.ptp(res.voltage) < 1e-12
    assert np.ptp(res.r_p) == 0.0


def test_euler_single_step_mass_exact(params, disc4):
    """One Euler step of the negative electrode: the volume-weighted mass
    change equals flux * dt exactly."""
    sysm = systems.build_one_phase_solid_system(params, "neg", disc4.N_r)
    v = systems.cell_volumes(params.R_s_n, disc4.N_r)
    c = np.full(disc4.N_r, 0.5 * params.c_s_max_n)
    current, dt = 20.0, 1.0
    c1 = c + dt * sysm.rhs(c, current)
    flux = systems.molar_flux_density(params, "neg", current) * 4 * np.pi * params.R_s_n**2
    assert float(v @ (c1 - c)) == pytest.approx(flux * dt, rel=1e-12)


def test_rk4_against_fine_euler(params, disc4):
    """RK4 at dt = 1 s tracks a dt = 0.01 s Euler reference within 0.5 mV RMS
    over a one-phase C/4 window."""
    prof = cc_profile(params, 0.25, "dis", duration=300.0)
    init = initial_state(params, disc4, 1.0, "dis")
    coarse = simulate(prof, init, params, disc4,
                      SolverConfig(dt=1.0, method="rk4", cutoffs_enabled=False))
    fine = simulate(prof, init, params, disc4,
                    SolverConfig(dt=0.01, method="euler", cutoffs_enabled=False))
    v_fine = np.interp(coarse.time, fine.time, fine.voltage)
    rms = 1e3 * np.sqrt(np.mean((coarse.voltage - v_fine) ** 2))
    assert rms < 0.5


def test_methods_agree(params, disc4):
    """All three integrators agree on a smooth one-phase segment."""
    prof = cc_profile(params, 0.25, "dis", duration=200.0)
    init = initial_state(params, disc4, 0.9, "dis")
    outs = {}
    for method in ("rk4", "euler", "exact"):
        outs[method] = simulate(prof, init, params, disc4,
                                SolverConfig(method=method, cutoffs_enabled=False))
    for method in ("rk4", "euler"):
        dv = outs[method].voltage - outs["exact"].voltage
        assert 1e3 * np.sqrt(np.mean(dv**2)) < 0.2


def test_determinism_bit_identical(params, disc4):
    prof = cc_profile(params, 1.0, "dis", duration=700.0)
    init = initial_state(params, disc4, 1.0, "dis")
    a = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    b = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    assert np.array_equal(a.voltage, b.voltage)
    assert np.array_equal(a.r_p, b.r_p)
    assert np.array_equal(a.pos_c, b.pos_c)


def test_checkpoint_replay(params, disc4):
    """Restarting from a logged state reproduces the suffix trajectory."""
    prof = cc_profile(params, 1.0, "dis", duration=900.0)
    init = initial_state(params, disc4, 1.0, "dis")
    full = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    k = 700  # inside two-phase
    assert full.regime[k] == "two_phase"
    t_k = float(full.time[k])
    rest = LoadProfile(np.array([t_k, prof.times[-1]]),
                       np.array([full.current[k]] * 2))
    replay = simulate(rest, full.state_at(k), params, disc4,
                      SolverConfig(cutoffs_enabled=False))
    n = len(replay)
    assert np.allclose(replay.voltage[1:], full.voltage[k + 1:k + n], atol=1e-12)
    assert np.allclose(replay.r_p[1:], full.r_p[k + 1:k + n], atol=1e-14)


def test_cutoff_termination(params, disc4):
    prof = cc_profile(params, 1.0, "dis")
    init = initial_state(params, disc4, 1.0, "dis")
    res = simulate(prof, init, params, disc4, SolverConfig())
    assert res.status == "cutoff_low"
    assert res.voltage[-1] < 2.0
    assert res.time[-1] < prof.times[-1]


def test_coulomb_consistency_at_all_times(params, disc4):
    prof = cc_profile(params, 1.0, "dis", duration=1200.0)
    init = initial_state(params, disc4, 1.0, "dis")
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    rep = mass_audit(res, params)
    assert rep.res_pos_rel.max() < 1e-9
    assert rep.res_neg_rel.max() < 1e-9
    assert rep.res_elec_rel.max() < 1e-9


def test_multi_cycle_peaks_constant(params, disc4):
    """Peak electrode lithium repeats across equal-Ah cycles (3x 1C here;
    the acceptance suite runs the C/4 protocol)."""
    prof = cycle_profile(params, 1.0, 3)
    init = initial_state(params, disc4, 0.0, "ch")
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    half = 3600.0
    peaks_pos, peaks_neg = [], []
    for k in range(3):
        i0 = np.searchsorted(res.time, 2 * k * half)
        i1 = np.searchsorted(res.time, 2 * (k + 1) * half)
        peaks_pos.append(res.mass_pos[i0:i1].max())
        peaks_neg.append(res.mass_neg[i0:i1].max())
    assert np.ptp(peaks_pos) / peaks_pos[0] < 1e-6
    assert np.ptp(peaks_neg) / peaks_neg[0] < 1e-6


def test_result_csv_round_trip(tmp_path, params, disc4):
    prof = cc_profile(params, 1.0, "dis", duration=120.0)
    init = initial_state(params, disc4, 0.8, "dis")
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    path = tmp_path / "result.csv"
    res.to_csv(path)
    back = read_result_csv(path)
    assert np.allclose(back["time_s"], res.time)
    assert np.allclose(back["voltage_V"], res.voltage)
    assert np.allclose(back["r_p_over_R"], res.r_p)
    assert back["regime"] == list(res.regime)


def test_stiff_subsystem_fallback(params):
    """The identified C/2 negative diffusivity makes an explicit step
    unstable at dt = 1 s; the integrator must fall back to the exact
    propagator and stay finite."""
    from csespm.params import params_for_rate
    p2 = params_for_rate(params, "C/2")
    disc = DiscretizationConfig(N_r=4, N_e=6)
    prof = cc_profile(p2, 0.5, "dis", duration=400.0)
    init = initial_state(p2, disc, 1.0, "dis")
    res = simulate(prof, init, p2, disc, SolverConfig(method="rk4"))
    assert res.status in ("completed", "cutoff_low")
    assert np.isfinite(res.voltage).all()


def test_dynamic_profile_runs_through_flips(params, disc4):
    prof = synthetic_dynamic_profile(params, duration=600.0)
    init = initial_state(params, disc4, 0.6, "dis")
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    rep = mass_audit(res, params)
    assert rep.max_drift_rel < 1e-9
    assert np.isfinite(res.voltage).all()


def test_zero_current_zero_drift(params, disc4):
    prof = LoadProfile(np.array([0.0, 40.0]), np.zeros(2))
    init = initial_state(params, disc4, 0.5, "dis")
    res = simulate(prof, init, params, disc4, SolverConfig(cutoffs_enabled=False))
    # identically zero up to the quadrature rounding of the audit itself
    assert mass_audit(res, params).max_drift_rel < 1e-14


def test_grid_convergence_toward_reference(params):
    """Voltage and front trajectories at N_r in {2,4,8,16} approach the
    committed N_r = 200 reference with shrinking differences."""
    from pathlib import Path
    from csespm.params import params_for_rate
    golden = np.genfromtxt(Path(__file__).parent / "data" /
                           "golden_nr200_1c_discharge.csv",
                           delimiter=",", names=True)
    p_rate = params_for_rate(params, "1C")
    v_err, f_err = [], []
    for N in (2, 4, 8, 16):
        disc = DiscretizationConfig(N_r=N, N_e=6)
        prof = cc_profile(p_rate, 1.0, "dis")
        init = initial_state(p_rate, disc, 1.0, "dis")
        res = simulate(prof, init, p_rate, disc, SolverConfig())
        n = min(len(res), len(golden))
        v_err.append(np.sqrt(np.mean((res.voltage[:n] - golden["voltage_V"][:n])**2)))
        f_err.append(np.abs(res.r_p[:n]**3 - golden["r_p_over_R"][:n]**3).max())
    assert all(a > b for a, b in zip(v_err, v_err[1:]))
    assert all(a > b for a, b in zip(f_err, f_err[1:]))
