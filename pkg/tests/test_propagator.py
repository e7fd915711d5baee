import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pairtunnel.effective import Verdict, quasienergies
from pairtunnel.model import Channel, SystemParams, build_hamiltonian, interaction_energies
from pairtunnel.propagator import (
    ConvergenceWarning,
    IntegratorConfig,
    floquet_multipliers,
    integrate,
    make_state,
    monodromy,
    quasienergies_from_monodromy,
    read_trajectory_csv,
    time_avg_probability,
)

SC_SUB = (5, 7, 2)


def reference_solution(params, psi0, times):
    """Adaptive high-order solution of i dc/dt = H(t) c."""

    def rhs(t, y):
        return -1j * build_hamiltonian(params, t) @ y

    sol = solve_ivp(rhs, (0, times[-1]), psi0, method="DOP853", t_eval=times, rtol=1e-12, atol=1e-13)
    return sol.y.T


def test_matches_adaptive_reference(generic):
    psi0 = make_state({"0020": 0.6, "1001": 0.8j})
    cfg = IntegratorConfig(t_end=20 * generic.period, sample_stride=1024)
    traj = integrate(generic, psi0, cfg)
    ref = reference_solution(generic, psi0, traj.times)
    np.testing.assert_allclose(traj.amplitudes, ref, atol=1e-8)


def test_hermitian_propagation_is_unitary():
    p = SystemParams(alpha=0.3, delta=1.0, f=10.0, u1=31.0, u2=9.0)
    traj = integrate(p, "0020", IntegratorConfig(t_end=50.0))
    np.testing.assert_allclose(traj.total, 1.0, atol=1e-10)


def test_linearity(generic):
    cfg = IntegratorConfig(steps_per_period=256, t_end=3.0, sample_stride=64)
    a, b = make_state("2000"), make_state("0110")
    ta = integrate(generic, a, cfg).amplitudes
    tb = integrate(generic, b, cfg).amplitudes
    mix = integrate(generic, (2 - 1j) * a + 0.5 * b, cfg, allow_unnormalized=True).amplitudes
    np.testing.assert_allclose(mix, (2 - 1j) * ta + 0.5 * tb, atol=1e-12)


def test_monodromy_reproduces_one_period(generic):
    n = 512
    m = monodromy(generic, cfg=IntegratorConfig(steps_per_period=n))
    psi0 = make_state({"1100": 1, "0101": 1})
    traj = integrate(generic, psi0, IntegratorConfig(steps_per_period=n, t_end=generic.period, sample_stride=n))
    np.testing.assert_allclose(traj.amplitudes[-1], m @ psi0, atol=1e-12)


def test_subspace_agrees_with_full(far_sc):
    cfg = IntegratorConfig(t_end=20.0, sample_stride=1024)
    full = integrate(far_sc, "0020", cfg)
    sub = integrate(far_sc, "0020", cfg, subspace=SC_SUB)
    np.testing.assert_allclose(sub.amplitudes, full.amplitudes, atol=1e-10)
    assert np.all(sub.amplitudes[:, [0, 2, 3, 5, 7, 8, 9]] == 0)


def test_pure_gain_grows_exponentially():
    # no hopping: a doublon in well 1 only picks up 2*beta1 per unit time in the amplitude exponent
    p = SystemParams(nu=0.0, f=5.0, beta1=0.03, beta2=0.07)
    traj = integrate(p, "2000", IntegratorConfig(t_end=10.0))
    np.testing.assert_allclose(traj.total, np.exp(4 * 0.03 * traj.times), rtol=1e-9)
    traj = integrate(p, "0011", IntegratorConfig(t_end=10.0))
    np.testing.assert_allclose(traj.total, np.exp(-4 * 0.07 * traj.times), rtol=1e-9)


def test_decoupled_monodromy_is_diagonal():
    p = SystemParams(nu=0.0, f=5.0, u1=13.0, u2=4.0, beta1=0.01, beta2=0.02)
    m = monodromy(p)
    np.testing.assert_allclose(m, np.diag(np.diag(m)), atol=1e-12)
    wells = np.array([[1, 1, 1, 0, 0, 0, 0.5, 0.5, 0.5, 0.5]]).ravel()
    expected = interaction_energies(p) + 1j * (2 * 0.01 * wells - 2 * 0.02 * (1 - wells))
    e = quasienergies_from_monodromy(m, p.omega, targets=expected)
    np.testing.assert_allclose(e, expected, atol=1e-9)


def test_unstable_verdict_has_growing_multiplier(far_sc):
    p = far_sc.replace(beta1=0.5, beta2=0.5)
    assert quasienergies(Channel.INTERWELL_SPIN_CONSERVING, p).verdict is Verdict.UNSTABLE
    lam, _ = floquet_multipliers(monodromy(p, SC_SUB))
    assert np.max(np.abs(lam)) > 1.0


def test_quasienergy_pairing_shifts_by_drive_frequency():
    omega = 10.0
    energies = np.array([1.0 + 0.1j, -3.0, 24.0 - 0.05j])
    m = np.diag(np.exp(-1j * energies * 2 * math.pi / omega))
    folded = quasienergies_from_monodromy(m, omega)
    assert np.all(np.abs(folded.real) <= omega / 2)
    np.testing.assert_allclose(quasienergies_from_monodromy(m, omega, targets=energies), energies, atol=1e-12)


def test_csv_round_trip(tmp_path, far_sc):
    traj = integrate(far_sc, "0020", IntegratorConfig(t_end=2.0, sample_stride=512), subspace=SC_SUB)
    text = traj.to_csv(tmp_path / "t.csv")
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["t", "P1", "P2"] and header[11] == "Ptotal" and header[12:14] == ["Re_c1", "Im_c1"]
    assert len(header) == 1 + 10 + 1 + 20
    back = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.times, traj.times)
    np.testing.assert_array_equal(back.amplitudes, traj.amplitudes)


def test_time_average():
    p = SystemParams(nu=0.0)
    traj = integrate(p, "0020", IntegratorConfig(t_end=5.0))
    assert time_avg_probability(traj, "0020") == pytest.approx(1.0, abs=1e-9)
    assert time_avg_probability(traj, 7) == 0.0
    assert time_avg_probability(traj, 5, window=(1.0, 2.0)) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        time_avg_probability(traj, 5, window=(2.0, 2.0))
    with pytest.raises(ValueError):
        time_avg_probability(traj, 5, window=(1.0, 9.0))


def test_input_checks(far_sc):
    with pytest.raises(ValueError, match="normalized"):
        integrate(far_sc, 2 * make_state("0020"))
    with pytest.raises(ValueError, match="outside"):
        integrate(far_sc, "1100", subspace=SC_SUB)
    with pytest.raises(ValueError):
        IntegratorConfig(steps_per_period=8)
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=0.0)


def test_step_halving_check(far_sc):
    coarse = IntegratorConfig(steps_per_period=32, t_end=5.0, sample_stride=8, convergence_tol=1e-12)
    with pytest.warns(ConvergenceWarning):
        traj = integrate(far_sc, "0020", coarse, subspace=SC_SUB)
    assert traj.convergence_error > 1e-12
    fine = IntegratorConfig(t_end=5.0, convergence_tol=1e-6)
    assert integrate(far_sc, "0020", fine, subspace=SC_SUB).convergence_error < 1e-6


def test_far_resonance_average_frozen(far_sc):
    # stable to ~1e-7 under step halving and under 4x finer sampling
    traj = integrate(far_sc, "0020", IntegratorConfig(t_end=400.0), subspace=SC_SUB)
    assert time_avg_probability(traj, 7) == pytest.approx(0.0051106, abs=2e-6)


@pytest.mark.parametrize(
    "params, sub",
    [
        (SystemParams(f=32.0, u1=22.0, beta1=0.01, beta2=0.01), SC_SUB),
        (SystemParams(alpha=0.5, omega_z=200.0, f=236.6, u1=28.0, beta1=0.01, beta2=0.01), (5, 9, 3)),
        (SystemParams(u1=70.0, f=78.2841680359023, beta1=0.005, beta2=0.015), SC_SUB),
    ],
)
def test_default_resolution_is_converged(params, sub):
    cfg = IntegratorConfig(t_end=400.0, convergence_tol=1e-6)
    traj = integrate(params, "0020", cfg, subspace=sub)
    assert traj.convergence_error < 1e-6


def test_default_resolution_full_basis_intrawell():
    p = SystemParams(delta=1.0, f=110.0, u1=51.501377578852384, u2=24.0, beta2=0.1)
    traj = integrate(p, {"0020": 1, "2000": 1}, IntegratorConfig(t_end=60.0, convergence_tol=1e-6))
    assert traj.convergence_error < 1e-6
