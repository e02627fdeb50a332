import itertools

import numpy as np
import pytest

from sdcollapse.dynamics import (
    IntegrationError,
    TrajectoryConfig,
    asymptotic_outcome,
    integrate,
    liouvillian,
    master_rhs,
    propagate,
    rk4_step,
)
from sdcollapse.linalg import projector, trace_distance, validate
from sdcollapse.model import (
    HiddenVariables,
    MeasurementContext,
    SigmaCascade,
    build_lindblad_set,
    predict_outcome,
    sample_disk,
)
from sdcollapse.oracle import SingletParams, n4_singlet_solution, singlet_state

from conftest import random_density, random_hermitian, random_state


def literal_diagonal_rates(rho, up):
    """d rho_JJ / dt / kappa for N = 4, transcribed element by element."""
    t = {m: float(up[m - 2]) for m in (2, 3, 4)}
    d = {m: 1.0 - t[m] for m in (2, 3, 4)}
    r = np.real(np.diag(rho))
    r11, r22, r33, r44 = r
    return np.array([
        d[2] * r22 + d[3] * r33 + d[4] * r44 - (t[2] + t[3] + t[4]) * r11,
        t[2] * r11 - (d[2] + t[3] + t[4]) * r22 + d[3] * r33 + d[4] * r44,
        t[3] * r11 + t[3] * r22 - (2 * d[3] + t[4]) * r33 + d[4] * r44,
        t[4] * r11 + t[4] * r22 + t[4] * r33 - 3 * d[4] * r44,
    ])


def sign_pattern(up):
    return SigmaCascade(np.where(np.asarray(up), 0.5, -0.5))


# -- right-hand side ----------------------------------------------------------

def test_rhs_without_dissipation_is_von_neumann(rng):
    ctx0 = MeasurementContext(3)
    rho = random_density(rng, 3)
    lset = build_lindblad_set(SigmaCascade(np.array([0.2, -0.1])))
    np.testing.assert_array_equal(master_rhs(rho, ctx0, lset, kappa=0.0), np.zeros((3, 3)))
    h = random_hermitian(rng, 3)
    ctx = MeasurementContext(3, hamiltonian=h)
    np.testing.assert_allclose(master_rhs(rho, ctx, lset, kappa=0.0), -1j * (h @ rho - rho @ h), atol=1e-14)


def test_rhs_single_damping_channel():
    ctx = MeasurementContext(2, kappa=2.5)
    lset = build_lindblad_set(SigmaCascade(np.array([0.3])))
    np.testing.assert_allclose(master_rhs(np.diag([1.0, 0.0]), ctx, lset), 2.5 * np.diag([-1.0, 1.0]))


@pytest.mark.parametrize("up", list(itertools.product([False, True], repeat=3)))
def test_rhs_diagonal_matches_rate_equations(up, rng):
    ctx = MeasurementContext(4)
    rho = random_density(rng, 4)
    got = np.real(np.diag(master_rhs(rho, ctx, build_lindblad_set(sign_pattern(up)))))
    np.testing.assert_allclose(got, literal_diagonal_rates(rho, up), atol=1e-14)


def test_rhs_singlet_rates():
    q = 0.5
    ctx = MeasurementContext(4)
    rho = projector(singlet_state(q))
    for s2 in (0.4, -0.4):
        lset = build_lindblad_set(SigmaCascade(np.array([s2, -0.2, -0.9])))
        got = np.real(np.diag(master_rhs(rho, ctx, lset)))
        th, thm = float(s2 > 0), float(s2 <= 0)
        rho11, rho22 = q * q, 1 - q * q
        expected_11 = thm * rho22 - th * rho11
        assert got[0] == pytest.approx(expected_11, abs=1e-15)
        assert got[1] == pytest.approx(-expected_11, abs=1e-15)


def test_rhs_hermitian_traceless_and_matches_superoperator(rng):
    for n in (2, 3, 5):
        ctx = MeasurementContext(n, hamiltonian=random_hermitian(rng, n), kappa=1.7)
        lset = build_lindblad_set(SigmaCascade(rng.uniform(-1, 1, n - 1)))
        rho = random_density(rng, n)
        d = master_rhs(rho, ctx, lset)
        assert np.max(np.abs(d - d.conj().T)) <= 1e-12
        assert abs(np.trace(d)) <= 1e-12
        np.testing.assert_allclose(liouvillian(ctx, lset) @ rho.reshape(-1), d.reshape(-1), atol=1e-13)


def test_rhs_dimension_mismatch():
    with pytest.raises(ValueError):
        master_rhs(np.eye(3) / 3, MeasurementContext(2), build_lindblad_set(SigmaCascade(np.array([0.1]))))


def test_rk4_step_local_error():
    for h in (0.1, 0.05):
        err = abs(rk4_step(lambda y: -y, 1.0, h) - np.exp(-h))
        assert err == pytest.approx(h**5 / 120, rel=0.1)


# -- integration --------------------------------------------------------------

def test_config_guards():
    with pytest.raises(ValueError):
        TrajectoryConfig(kappa=1.0, t_end=1.0, step=0.2)
    with pytest.raises(ValueError):
        TrajectoryConfig(kappa=1.0, t_end=0.0, step=0.01)
    with pytest.raises(ValueError):
        TrajectoryConfig(kappa=1.0, t_end=1.0, step=0.01, record_every=0)
    with pytest.raises(ValueError):
        TrajectoryConfig(kappa=1.0, t_end=1.0, step=0.03).n_steps


def test_two_level_collapse_from_basis_state():
    ctx = MeasurementContext(2, kappa=3.0)
    cfg = TrajectoryConfig.in_kappa_units(3.0, t_end=20)
    traj = integrate(np.diag([1.0, 0.0]), ctx, None, cfg, sigma=SigmaCascade(np.array([0.5])))
    assert trace_distance(traj.final, np.diag([0.0, 1.0])) <= 1e-6
    assert traj.final[0, 0].real == pytest.approx(np.exp(-20), rel=1e-9)


def test_no_dissipation_no_hamiltonian_is_static(rng):
    ctx = MeasurementContext(3)
    rho0 = random_density(rng, 3)
    cfg = TrajectoryConfig.in_kappa_units(1.0, t_end=2, step=1e-2, record_every=10)
    lset = build_lindblad_set(SigmaCascade(np.array([0.2, 0.3])))
    _, states = propagate(rho0, liouvillian(ctx, lset, kappa=0.0), cfg)
    assert np.max(np.abs(states - rho0)) <= 1e-12


@pytest.mark.parametrize("positive", [True, False])
def test_singlet_matches_oracle(positive):
    q = 0.5
    ctx = MeasurementContext(4)
    cfg = TrajectoryConfig.in_kappa_units(1.0, t_end=10, step=1e-3, record_every=50)
    sig = SigmaCascade(np.array([0.3 if positive else -0.3, -0.5, -0.1]))
    traj = integrate(projector(singlet_state(q)), ctx, None, cfg, sigma=sig)
    oracle = np.array([n4_singlet_solution(SingletParams(q, 1.0, positive), t) for t in traj.times])
    assert np.max(np.abs(traj.states - oracle)) <= 1e-8


def test_times_and_recording():
    cfg = TrajectoryConfig(kappa=1.0, t_end=1.05, step=0.01, record_every=10)
    traj = integrate(np.diag([0.5, 0.5]), MeasurementContext(2), HiddenVariables([0.5]), cfg)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == pytest.approx(1.05)
    assert len(traj.times) == 12


def test_validation_failure_reports_time():
    # kappa-scale step, but the Hamiltonian makes explicit RK4 unstable
    h = 200.0 * np.array([[0, 1], [1, 0]])
    ctx = MeasurementContext(2, hamiltonian=h)
    cfg = TrajectoryConfig(kappa=1.0, t_end=5.0, step=0.1, record_every=1, include_hamiltonian=True)
    with pytest.raises(IntegrationError) as exc:
        integrate(projector([1, 0]), ctx, HiddenVariables([0.5]), cfg)
    assert 0 < exc.value.time <= 5.0


def test_kappa_mismatch_rejected():
    with pytest.raises(ValueError):
        integrate(np.diag([1.0, 0]), MeasurementContext(2, kappa=2.0), HiddenVariables([0.5]),
                  TrajectoryConfig.in_kappa_units(1.0, t_end=1))


# -- asymptotics --------------------------------------------------------------

def test_asymptotic_outcome_cases():
    ctx = MeasurementContext(2)
    psi = np.array([1, 1]) / np.sqrt(2)
    hv = HiddenVariables([0.9])
    long = integrate(projector(psi), ctx, hv, TrajectoryConfig.in_kappa_units(1.0))
    assert asymptotic_outcome(long) == long.outcome_predicted == 2
    short = integrate(projector(psi), ctx, hv, TrajectoryConfig.in_kappa_units(1.0, t_end=0.1, record_every=10))
    assert asymptotic_outcome(short) is None


def test_fixed_point_stays_collapsed():
    ctx = MeasurementContext(3)
    sig = SigmaCascade(np.array([0.4, -0.3]))
    assert predict_outcome(sig) == 2
    traj = integrate(np.diag([0.0, 1.0, 0.0]), ctx, None,
                     TrajectoryConfig.in_kappa_units(1.0, t_end=5, record_every=250), sigma=sig)
    for i in range(len(traj.times)):
        assert asymptotic_outcome(traj, index=i) == 2


def test_predicted_outcome_four_levels():
    sig = SigmaCascade(np.array([0.2, -0.1, -0.4]))
    assert predict_outcome(sig) == 2
    traj = integrate(projector(np.full(4, 0.5)), MeasurementContext(4), None,
                     TrajectoryConfig.in_kappa_units(1.0, t_end=20, record_every=1000), sigma=sig)
    assert trace_distance(traj.final, np.diag([0, 1, 0, 0])) <= 1e-4
    assert abs(traj.final[1, 1] - 1) <= 1e-8


def test_coherence_limits_collapse_time():
    """Coherences decay at kappa/2, so kappa*t = 20 leaves ~|a_1 a_2| e^-10."""
    ctx = MeasurementContext(2)
    psi = np.array([1, 1]) / np.sqrt(2)
    traj = integrate(projector(psi), ctx, HiddenVariables([0.9]), TrajectoryConfig.in_kappa_units(1.0, t_end=20))
    assert trace_distance(traj.final, np.diag([0, 1])) == pytest.approx(0.5 * np.exp(-10), rel=1e-6)


def test_cascade_equivalence_sample(rng):
    for n in (2, 3, 4):
        ctx = MeasurementContext(n)
        cfg = TrajectoryConfig.in_kappa_units(1.0, t_end=40, record_every=4000)
        for _ in range(30):
            psi = random_state(rng, n)
            traj = integrate(projector(psi), ctx, HiddenVariables(sample_disk(rng, n - 1)), cfg)
            assert asymptotic_outcome(traj) == traj.outcome_predicted


def test_trajectories_remain_valid_with_hamiltonian(rng):
    for n in (2, 3, 4):
        ctx = MeasurementContext(n, hamiltonian=random_hermitian(rng, n, 0.5))
        cfg = TrajectoryConfig.in_kappa_units(1.0, t_end=5, step=1e-3, record_every=20, include_hamiltonian=True)
        traj = integrate(random_density(rng, n), ctx, HiddenVariables(sample_disk(rng, n - 1)), cfg)
        for rho in traj.states:
            rep = validate(rho)
            assert rep.trace_defect <= 1e-9 and rep.hermiticity_defect <= 1e-9 and rep.min_eigenvalue >= -1e-8
