import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qenergy.measurement import entanglement_eigenvalues
from qenergy.models.spin_protocol import (
    BASIS, ProtocolParams, analytic_state, asymptotic_entanglement,
    asymptotic_state, coupling_integrals_closed, coupling_integrals_numeric,
    energy_eigenvalues, expected_spin_energy, feasibility_report,
    field_hamiltonian, hamiltonian_fn, initial_state, instantaneous_hamiltonian,
    integrated_hamiltonian, larmor_frequency, maximal_entangled_final_state,
    protocol_params, run_protocol, sinc, sweep_point, theta_infinity,
    trajectory_rows, tune_max_entanglement)
from qenergy.propagators import (evolve_magnus1, integrate_hamiltonian,
                                 time_grid)
from qenergy.utils.errors import ContractError

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2.0
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2.0
SZ = np.diag([0.5, -0.5]).astype(complex)

UNIT = ProtocolParams(1.0, 1.0, 1.0, 0.0, 0.0, -200.0, 200.0)


def max_entangled(omega=1e4, phi0=0.0, n=0):
    tuned = tune_max_entanglement(1.0, n)
    return protocol_params(tuned['g'], tuned['b'], tuned['v'], omega, phi0)


def relative_error(numeric, exact, scale):
    return abs(numeric - exact) / (abs(exact) + 1e-4 * scale)


def test_params_validation():
    with pytest.raises(ContractError):
        protocol_params(1.0, 1.0, 1.0)
    with pytest.raises(ContractError):
        protocol_params(1.0, 0.0, 0.5)
    with pytest.raises(ContractError):
        protocol_params(-1.0, 1.0, 0.5)
    with pytest.raises(ContractError):
        protocol_params(1.0, 1.0, 0.5, t0=3.0, tf=3.0)
    p = protocol_params(1.0, 2.0, 0.5)
    assert (p.t0, p.tf) == (-800.0, 800.0)


def test_closed_form_at_closest_approach():
    integrals = coupling_integrals_closed(UNIT, 0.0)
    assert integrals.theta == pytest.approx(1.0)
    assert integrals.xi == pytest.approx(1.0 + 2.0j)
    assert integrals.omega_t == 0.0


def test_closed_form_late_and_early_limits():
    late = coupling_integrals_closed(UNIT, 1e6)
    assert late.theta == pytest.approx(2.0, abs=1e-9)
    assert late.xi == pytest.approx(2.0, abs=1e-5)
    early = coupling_integrals_closed(UNIT, -1e6)
    assert early.theta == pytest.approx(0.0, abs=1e-9)
    assert early.xi == pytest.approx(0.0, abs=1e-5)


def test_theta_is_nondecreasing():
    p = protocol_params(0.7, 1.3, 0.4)
    thetas = [coupling_integrals_closed(p, t, True).theta
              for t in np.linspace(p.t0, p.tf, 201)]
    assert np.all(np.diff(thetas) >= -1e-15)
    assert thetas[-1] == pytest.approx(theta_infinity(p), rel=1e-4)


def test_finite_window_starts_at_zero():
    p = protocol_params(1.0, 1.0, 0.5, omega=3.0)
    integrals = coupling_integrals_closed(p, p.t0, finite_window=True)
    assert integrals == (0.0, 0j, 0.0)


@pytest.mark.parametrize('t', [-1.0, 0.0, 1.0, 10.0])
def test_quadrature_matches_closed_form(t):
    p = ProtocolParams(1.0, 1.0, 1.0, 0.0, 0.0, -1e4, 1e4)
    numeric = coupling_integrals_numeric(p, t)
    exact = coupling_integrals_closed(p, t, finite_window=True)
    scale = theta_infinity(p)
    assert relative_error(numeric.theta, exact.theta, scale) < 1e-8
    assert relative_error(numeric.xi, exact.xi, scale) < 1e-8


def test_quadrature_trivial_cases():
    p = protocol_params(0.0, 1.0, 0.5, omega=2.0)
    assert coupling_integrals_numeric(p, 3.0) == (0.0, 0j, 2.0 * (3.0 - p.t0))
    q = protocol_params(1.0, 1.0, 0.5)
    assert coupling_integrals_numeric(q, q.t0).theta == 0.0
    with pytest.raises(ContractError):
        coupling_integrals_numeric(q, q.t0 - 1.0)


def test_quadrature_tail_is_small():
    near = ProtocolParams(1.0, 1.0, 1.0, 0.0, 0.0, -2e3, 2e3)
    far = near._replace(t0=-4e3)
    first = coupling_integrals_numeric(near, 5.0)
    second = coupling_integrals_numeric(far, 5.0)
    scale = theta_infinity(near)
    assert abs(first.theta - second.theta) < 1e-6 * scale
    assert abs(first.xi - second.xi) < 1e-6 * scale


def test_integrated_hamiltonian_without_coupling():
    p = protocol_params(0.0, 1.0, 0.5, omega=2.0)
    h = integrated_hamiltonian(p, 1.0, finite_window=True)
    big_omega = 2.0 * (1.0 - p.t0)
    np.testing.assert_allclose(h.entries,
                               np.diag([2, 2, -2, -2]) * big_omega / 4.0)


def test_integrated_hamiltonian_middle_block():
    h = integrated_hamiltonian(UNIT, 0.0).entries
    quarter = 0.25
    np.testing.assert_allclose(h[1:3, 1:3], -quarter * np.ones((2, 2)))
    assert h[0, 0] == pytest.approx(quarter)
    assert h[3, 3] == pytest.approx(quarter)
    assert h[3, 0] == pytest.approx((1.0 + 2.0j) / 4.0)
    assert h[0, 3] == pytest.approx((1.0 - 2.0j) / 4.0)


def test_integrated_hamiltonian_matches_simpson():
    p = protocol_params(1.0, 1.0, 0.5, omega=1.0, phi0=0.3,
                        t0=-100.0, tf=100.0)
    numeric = integrate_hamiltonian(hamiltonian_fn(p),
                                    time_grid(p.t0, 3.0, 100000))
    exact = integrated_hamiltonian(p, 3.0, finite_window=True)
    np.testing.assert_allclose(numeric.entries, exact.entries, atol=1e-8)


@pytest.mark.parametrize('t', [-2.0, 0.0, 0.7, 5.0])
def test_instantaneous_is_derivative_of_integrated(t):
    p = protocol_params(1.0, 1.0, 0.5, omega=1.5)
    step = 1e-4
    derivative = (integrated_hamiltonian(p, t + step).entries -
                  integrated_hamiltonian(p, t - step).entries) / (2.0 * step)
    np.testing.assert_allclose(derivative,
                               instantaneous_hamiltonian(p, t).entries,
                               atol=1e-6)


def test_instantaneous_at_closest_approach():
    p = protocol_params(1.0, 2.0, 0.5)
    s1 = [np.kron(op, np.eye(2)) for op in (SX, SY, SZ)]
    s2 = [np.kron(np.eye(2), op) for op in (SX, SY, SZ)]
    dipole = (sum(a @ b for a, b in zip(s1, s2)) - 3.0 * s1[1] @ s2[1])
    np.testing.assert_allclose(instantaneous_hamiltonian(p, 0.0).entries,
                               dipole / p.b ** 3, atol=1e-15)


def test_instantaneous_without_coupling_and_far_away():
    p = protocol_params(0.0, 1.0, 0.5, omega=2.0)
    np.testing.assert_array_equal(instantaneous_hamiltonian(p, 1.0).entries,
                                  field_hamiltonian(p).entries)
    q = protocol_params(1.0, 1.0, 0.5, omega=2.0)
    np.testing.assert_allclose(instantaneous_hamiltonian(q, 1e6).entries,
                               field_hamiltonian(q).entries, atol=1e-12)


def test_hamiltonian_fn_stack_matches_pointwise():
    p = protocol_params(1.0, 1.0, 0.5, omega=2.0)
    times = np.array([-3.0, 0.0, 0.25, 9.0])
    stack = hamiltonian_fn(p).stack(times)
    for t, entries in zip(times, stack):
        np.testing.assert_allclose(entries,
                                   instantaneous_hamiltonian(p, t).entries,
                                   rtol=1e-14, atol=1e-16)


def test_sinc():
    assert sinc(0.0) == 1.0
    assert sinc(1e-9) == pytest.approx(1.0, abs=1e-16)
    assert sinc(np.pi / 2.0) == pytest.approx(2.0 / np.pi)
    assert sinc(2e-8) == pytest.approx(np.sin(2e-8) / 2e-8, rel=1e-15)


@given(st.floats(min_value=0.0, max_value=2.0),
       st.floats(min_value=0.5, max_value=2.0),
       st.floats(min_value=0.2, max_value=0.9),
       st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=0.0, max_value=2.0 * np.pi),
       st.floats(min_value=-5.0, max_value=5.0))
@settings(max_examples=50, deadline=None)
def test_analytic_state_matches_magnus1(g, b, v, omega, phi0, scaled_t):
    p = protocol_params(g, b, v, omega, phi0)
    t = scaled_t * b / v
    psi0 = initial_state(p)
    integrated = integrated_hamiltonian(p, t)
    magnus = evolve_magnus1(hamiltonian_fn(p), time_grid(p.t0, p.tf, 1),
                            psi0, integrated)
    np.testing.assert_allclose(analytic_state(p, t).amps, magnus.amps,
                               atol=1e-10)


def test_analytic_state_at_start_is_initial_state():
    p = protocol_params(1.0, 1.0, 0.5, omega=2.0, phi0=0.4)
    np.testing.assert_allclose(analytic_state(p, p.t0, True).amps,
                               initial_state(p).amps, atol=1e-15)
    q = protocol_params(1.0, 1.0, 0.5, phi0=0.4)
    phase = np.exp(0.4j)
    np.testing.assert_allclose(analytic_state(q, -1e7).amps,
                               np.array([1, 1, phase, phase]) / 2.0,
                               atol=1e-6)


def test_initial_state_has_no_spin_energy():
    p = protocol_params(1.0, 1.0, 0.5, omega=2.0, phi0=1.1)
    assert expected_spin_energy(p, initial_state(p)) == \
        pytest.approx(0.0, abs=1e-15)


def test_late_state_is_asymptotic_state():
    p = max_entangled()
    t = 1e3 * p.b / p.v
    psi = analytic_state(p, t)
    np.testing.assert_allclose(np.abs(psi.amps), 0.5, atol=1e-6)
    np.testing.assert_allclose(psi.amps, asymptotic_state(p, t).amps,
                               atol=1e-5)


def test_maximal_entangled_state_is_asymptotic_state():
    for phi0 in (0.0, np.pi / 3.0, 7.0):
        p = max_entangled(omega=2.0, phi0=phi0)
        t = 1e3 * p.b / p.v
        np.testing.assert_allclose(maximal_entangled_final_state(p, t).amps,
                                   asymptotic_state(p, t).amps, atol=1e-12)


def test_asymptotic_entanglement_examples():
    theta_inf, k_minus, k_plus = asymptotic_entanglement(max_entangled())
    assert theta_inf == pytest.approx(np.pi)
    assert (k_minus, k_plus) == (pytest.approx(0.5), pytest.approx(0.5))

    theta_inf, k_minus, k_plus = asymptotic_entanglement(
        protocol_params(1.0, 1.0, 1.0 / np.pi))
    assert theta_inf == pytest.approx(2.0 * np.pi)
    assert k_minus == pytest.approx(0.0, abs=1e-15)
    assert k_plus == pytest.approx(1.0)

    theta_inf, k_minus, k_plus = asymptotic_entanglement(UNIT)
    assert theta_inf == 2.0
    assert k_minus == pytest.approx(0.5 * (1.0 - np.cos(1.0)))
    assert k_plus == pytest.approx(0.5 * (1.0 + np.cos(1.0)))


@pytest.mark.parametrize('phi0', [0.0, np.pi / 3.0, np.pi, 7.0])
def test_asymptotic_entanglement_matches_late_state(phi0):
    p = protocol_params(1.0, 1.0, 0.5, omega=1e4, phi0=phi0)
    psi = analytic_state(p, 1e3 * p.b / p.v)
    _, k_minus, k_plus = asymptotic_entanglement(p)
    numeric = entanglement_eigenvalues(psi, '1')
    np.testing.assert_allclose(numeric, (k_minus, k_plus), atol=1e-6)


def test_tune_max_entanglement():
    tuned = tune_max_entanglement(1.0, 0, 'b', 1.0)
    assert tuned == {'g': 1.0, 'b': 1.0, 'v': pytest.approx(2.0 / np.pi)}
    tuned = tune_max_entanglement(1.0, 0, 'v', 1.0)
    assert tuned['b'] == pytest.approx(np.sqrt(2.0 / np.pi))
    third = tune_max_entanglement(1.0, 1)
    assert third['v'] == pytest.approx(2.0 / (3.0 * np.pi))
    for n in range(4):
        p = max_entangled(n=n)
        assert theta_infinity(p) == pytest.approx((2 * n + 1) * np.pi)


def test_tune_max_entanglement_errors():
    with pytest.raises(ContractError):
        tune_max_entanglement(-1.0)
    with pytest.raises(ContractError):
        tune_max_entanglement(1.0, fix='g')
    with pytest.raises(ContractError):
        tune_max_entanglement(1.0, 0, 'b', 0.1)


def test_run_protocol_shifts_energy_by_half_omega():
    omega = 1e4
    p = max_entangled(omega=omega)
    seen = set()
    for seed in range(64):
        run = run_protocol(p, 'magnus1', seed=seed)
        assert run.outcome.probability == pytest.approx(0.5, abs=1e-6)
        sign = 1.0 if run.outcome.label == '+y' else -1.0
        assert run.delta_e == pytest.approx(sign * omega / 2.0, rel=1e-6)
        seen.add(run.outcome.label)
    assert seen == {'+y', '-y'}


def test_run_protocol_leaves_spin_one_in_z_eigenstate():
    p = max_entangled(omega=1e4)
    run = run_protocol(p, 'magnus1', seed=3)
    post = run.outcome.post_state
    k_minus, _ = entanglement_eigenvalues(post, '1')
    assert k_minus < 1e-10
    up = abs(post.amps[0]) ** 2 + abs(post.amps[1]) ** 2
    expected = 1.0 if run.outcome.label == '+y' else 0.0
    assert up == pytest.approx(expected, abs=1e-6)


def test_run_protocol_ledger():
    p = max_entangled(omega=2.0)
    run = run_protocol(p, 'magnus1', seed=11)
    events = [entry.event for entry in run.ledger.entries]
    assert events == ['evolve', 'collapse']
    evolve, collapse_entry = run.ledger.entries
    assert evolve.energy_before == pytest.approx(0.0, abs=1e-15)
    assert collapse_entry.subsystem_energies['spin2'] == 0.0
    assert run.delta_e == pytest.approx(evolve.delta + collapse_entry.delta)
    assert abs(run.delta_e) == pytest.approx(1.0, abs=1e-4)
    assert run.residual is None
    assert run.propagator == 'magnus1'


@pytest.mark.parametrize('phi0', [0.0, np.pi / 3.0, np.pi, 7.0])
def test_max_entanglement_probabilities_independent_of_phase(phi0):
    p = max_entangled(omega=1e4, phi0=phi0)
    run = run_protocol(p, 'magnus1', seed=0)
    assert run.outcome.probability == pytest.approx(0.5, abs=1e-8)


def test_no_entanglement_at_two_pi():
    omega = 1e4
    # long window so the accumulated rotation sits at 2π
    p = protocol_params(1.0, 1.0, 1.0 / np.pi, omega=omega,
                        t0=-1e4 * np.pi, tf=1e4 * np.pi)
    run = run_protocol(p, 'magnus1', seed=0)
    k_minus, _ = entanglement_eigenvalues(run.final_state, '1')
    assert k_minus < 1e-6
    assert abs(run.delta_e) < 1e-5 * omega


def test_run_protocol_ordered():
    p = protocol_params(1.0, 1.0, 0.5, omega=1.0, t0=-40.0, tf=40.0)
    run = run_protocol(p, 'ordered', steps=20000, seed=1)
    assert run.propagator == 'ordered'
    assert run.residual < 1e-3
    assert run.delta_e == pytest.approx(
        sum(entry.delta for entry in run.ledger.entries))
    with pytest.raises(ContractError):
        run_protocol(p, 'rk4')


def test_energy_helpers():
    assert larmor_frequency(2.0, -3.0) == 6.0
    p = protocol_params(1.0, 1.0, 0.5, omega=-2.0)
    assert energy_eigenvalues(p) == (-1.0, 1.0)
    np.testing.assert_array_equal(np.diag(field_hamiltonian(p).entries),
                                  [-1.0, -1.0, 1.0, 1.0])


def test_feasibility_report():
    report = feasibility_report(0.557)
    assert report['b_sqrt_v_gev_inv'] == pytest.approx(0.5955, abs=1e-4)
    assert report['b_sqrt_v_cm'] == pytest.approx(1.175e-14, rel=1e-3)
    assert 6.0 < report['ratio'] < 6.6


def test_trajectory_rows():
    p = protocol_params(1.0, 1.0, 2.0 / np.pi, omega=2.0)
    rows = trajectory_rows(p, np.linspace(p.t0, p.tf, 7))
    assert len(rows) == 7
    first, last = rows[0], rows[-1]
    assert first[1:4] == (0.0, 0.0, 0.0)
    assert first[4] == pytest.approx(0.0, abs=1e-12)
    assert first[6] == pytest.approx(0.0, abs=1e-10)
    assert last[1] == pytest.approx(np.pi, rel=1e-4)
    assert len(last) == 7


def test_sweep_point():
    b, v, theta_inf, k_minus, k_plus, entropy, delta_e = sweep_point(
        (1.0, 1.0, 2.0 / np.pi, 2.0, 0.0))
    assert (b, v) == (1.0, 2.0 / np.pi)
    assert theta_inf == pytest.approx(np.pi)
    assert (k_minus, k_plus) == (pytest.approx(0.5), pytest.approx(0.5))
    assert entropy == pytest.approx(np.log(2.0))
    assert delta_e == pytest.approx(1.0)


def test_basis_order():
    assert [sub.name for sub in BASIS] == ['1', '2']
