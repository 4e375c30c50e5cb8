import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qenergy.measurement import (born_probabilities, closed_form_entanglement,
                                 collapse, energy_basis,
                                 entanglement_eigenvalues,
                                 entropy_of_eigenvalues, expected_post_energy,
                                 fix_global_phase, ledger_record,
                                 ledger_total_delta, measurement_basis,
                                 new_ledger, project, select_outcome,
                                 spin_y_basis, uniform_draw,
                                 von_neumann_entropy)
from qenergy.propagators import evolve_static
from qenergy.quantum_core import (basis_state, density_matrix, expectation,
                                  hermitian, pure_density, spin_half, state,
                                  subsystem, tensor_product)
from qenergy.utils.errors import ContractError, StructureError

ONE = spin_half('1')
TWO = spin_half('2')

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False,
                   allow_infinity=False)


def energy_superposition(e1=0.0, e2=1.0):
    '''(|E1⟩ + |E2⟩)/√2 and its Hamiltonian.'''
    h = hermitian(ONE, np.diag([e1, e2]))
    return h, state(ONE, [1.0, 1.0], normalize=True)


def test_measurement_basis_must_be_complete():
    with pytest.raises(ContractError):
        measurement_basis(ONE, [np.diag([1.0, 0.0])])
    with pytest.raises(StructureError):
        measurement_basis(ONE, [np.eye(3)])


def test_measurement_basis_must_be_orthogonal():
    plus = np.full((2, 2), 0.5)
    up = np.diag([1.0, 0.0])
    # sums to the identity, but the first two overlap
    with pytest.raises(ContractError):
        measurement_basis(ONE, [up, plus, np.diag([0.0, 1.0]) - plus])


def test_y_basis_probabilities_on_spin_up():
    probabilities = born_probabilities(basis_state(ONE, '↑'),
                                       spin_y_basis(ONE))
    np.testing.assert_allclose(probabilities, [0.5, 0.5], atol=1e-15)


def test_eigenstate_probabilities():
    h = hermitian(ONE, np.diag([0.0, 1.0]))
    np.testing.assert_allclose(
        born_probabilities(basis_state(ONE, 1), energy_basis(h)), [0.0, 1.0],
        atol=1e-15)


def test_energy_basis_groups_degenerate_levels():
    h = hermitian((ONE, TWO), np.diag([1.0, 2.0, 2.0, 3.0]))
    mbasis = energy_basis(h)
    np.testing.assert_allclose(mbasis.values, [1.0, 2.0, 3.0])
    assert mbasis.labels == ('E=1', 'E=2', 'E=3')


def test_select_outcome():
    probabilities = [0.0, 0.3, 0.7]
    assert select_outcome(probabilities, 0.0) == 1
    assert select_outcome(probabilities, 0.3) == 1
    assert select_outcome(probabilities, 0.31) == 2
    assert select_outcome(probabilities, 1.0) == 2
    # round-off shortfall of the cumulative sum falls back to the last
    # outcome with nonzero probability
    assert select_outcome([0.5, 0.5 - 1e-15, 0.0], 1.0) == 1


def test_uniform_draw():
    assert uniform_draw(42) == uniform_draw(42)
    assert uniform_draw(42) != uniform_draw(43)
    assert 0.0 <= uniform_draw(2 ** 64 - 1) < 1.0
    with pytest.raises(ContractError):
        uniform_draw(-1)
    with pytest.raises(ContractError):
        uniform_draw(2 ** 64)


def test_fix_global_phase():
    amps = fix_global_phase([0.0, 1j / np.sqrt(2), -1j / np.sqrt(2)])
    np.testing.assert_allclose(amps, [0.0, 1 / np.sqrt(2), -1 / np.sqrt(2)])


def test_project_zero_probability_outcome():
    h = hermitian(ONE, np.diag([0.0, 1.0]))
    with pytest.raises(ContractError):
        project(basis_state(ONE, '↑'), energy_basis(h), 1)


def test_collapse_eigenstate():
    h = hermitian(ONE, np.diag([0.0, 1.0]))
    for seed in range(20):
        record = collapse(basis_state(ONE, '↓'), energy_basis(h), seed)
        assert record.outcome == 1
        assert record.probability == 1.0
        np.testing.assert_array_equal(record.post_state.amps, [0.0, 1.0])


def test_collapse_is_deterministic_per_seed():
    h, psi = energy_superposition()
    first = collapse(psi, energy_basis(h), 123)
    second = collapse(psi, energy_basis(h), 123)
    assert first.outcome == second.outcome
    np.testing.assert_array_equal(first.post_state.amps,
                                  second.post_state.amps)
    assert first.rng_seed == 123


def test_collapse_frequencies_follow_born_rule():
    h, psi = energy_superposition()
    mbasis = energy_basis(h)
    outcomes = [collapse(psi, mbasis, seed).outcome for seed in range(10000)]
    assert np.mean(outcomes) == pytest.approx(0.5, abs=0.02)


def test_collapse_is_idempotent():
    h, psi = energy_superposition()
    mbasis = energy_basis(h)
    first = collapse(psi, mbasis, 5)
    again = collapse(first.post_state, mbasis, 6)
    assert again.outcome == first.outcome
    assert again.probability == pytest.approx(1.0, abs=1e-15)


def test_collapse_of_one_subsystem():
    psi = tensor_product(basis_state(ONE, '↑'), basis_state(TWO, '↑'))
    record = collapse(psi, spin_y_basis(TWO), 0)
    assert record.probability == pytest.approx(0.5)
    sign = 1.0 if record.label == '+y' else -1.0
    np.testing.assert_allclose(record.post_state.amps,
                               [1 / np.sqrt(2), sign * 1j / np.sqrt(2), 0, 0],
                               atol=1e-15)
    with pytest.raises(StructureError):
        collapse(psi, spin_y_basis(spin_half('3')), 0)


def test_collapse_changes_energy_both_ways():
    h, psi = energy_superposition(e1=0.0, e2=1.0)
    mbasis = energy_basis(h)
    before = expectation(h, psi)
    deltas = set()
    for outcome in (0, 1):
        post, prob = project(psi, mbasis, outcome)
        assert prob == pytest.approx(0.5)
        deltas.add(round(expectation(h, post) - before, 12))
    assert deltas == {-0.5, 0.5}


@given(st.lists(finite, min_size=8, max_size=8),
       st.lists(finite, min_size=16, max_size=16))
@settings(max_examples=100, deadline=None)
def test_energy_basis_conserves_expected_energy(psi_values, h_values):
    amps = np.array(psi_values[:4]) + 1j * np.array(psi_values[4:])
    if np.linalg.norm(amps) < 0.1:
        return
    psi = state((ONE, TWO), amps, normalize=True)
    raw = np.array(h_values[:16]).reshape(4, 4)
    h = hermitian((ONE, TWO), raw + raw.T)
    assert expected_post_energy(psi, energy_basis(h), h) == \
        pytest.approx(expectation(h, psi), abs=1e-10)


def test_entanglement_of_bell_and_product_states():
    bell = state((ONE, TWO), [1.0, 0.0, 0.0, 1.0], normalize=True)
    k_minus, k_plus = entanglement_eigenvalues(bell, '1')
    assert k_minus == pytest.approx(0.5, abs=1e-12)
    assert k_plus == pytest.approx(0.5, abs=1e-12)

    product = tensor_product(state(ONE, [0.6, 0.8j]),
                             state(TWO, [1.0, 1.0], normalize=True))
    k_minus, k_plus = entanglement_eigenvalues(product, '2')
    assert k_minus == pytest.approx(0.0, abs=1e-12)
    assert k_plus == pytest.approx(1.0, abs=1e-12)


def test_entanglement_matches_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(50):
        psi = state((ONE, TWO), rng.normal(size=4) + 1j * rng.normal(size=4),
                    normalize=True)
        numeric = entanglement_eigenvalues(psi, '1')
        np.testing.assert_allclose(numeric, closed_form_entanglement(psi),
                                   atol=1e-6)


def test_entanglement_needs_two_spins():
    env = subsystem('e', ('0', '1', '2'))
    psi = tensor_product(basis_state(ONE, 0), basis_state(env, '0'))
    with pytest.raises(StructureError):
        entanglement_eigenvalues(psi, '1')


def test_von_neumann_entropy():
    mixed = density_matrix(ONE, np.eye(2) / 2.0)
    assert von_neumann_entropy(mixed) == pytest.approx(np.log(2.0))
    pure = pure_density(state(ONE, [0.6, 0.8]))
    assert von_neumann_entropy(pure) == pytest.approx(0.0, abs=1e-12)


def test_entropy_of_protocol_eigenvalues():
    # k = ½(1 ± cos π/4) for a late-time rotation of π/2
    c = np.cos(np.pi / 4.0)
    k = np.array([0.5 * (1.0 - c), 0.5 * (1.0 + c)])
    expected = -np.sum(k * np.log(k))
    assert entropy_of_eigenvalues(k) == pytest.approx(expected, rel=1e-12)
    assert entropy_of_eigenvalues([0.0, 1.0]) == 0.0


def test_ledger_evolve_entry_conserves_energy():
    h = hermitian(ONE, [[1.0, 0.3], [0.3, -0.5]])
    psi0 = state(ONE, [0.6, 0.8j])
    ledger = new_ledger()
    for t in (0.5, 1.0, 7.0):
        psi = evolve_static(h, t, psi0)
        ledger = ledger_record(ledger, h, psi0, psi, 'evolve', t)
    assert len(ledger.entries) == 3
    for entry in ledger.entries:
        assert abs(entry.delta) < 1e-10
        assert entry.event == 'evolve'


def test_ledger_collapse_entry():
    h, psi = energy_superposition(e1=0.0, e2=1.0)
    post, _ = project(psi, energy_basis(h), 1)
    ledger = ledger_record(new_ledger(), h, psi, post, 'collapse', 1.0,
                           {'system': h})
    entry = ledger.entries[0]
    assert entry.energy_before == pytest.approx(0.5)
    assert entry.total_energy == pytest.approx(1.0)
    assert entry.delta == pytest.approx(0.5)
    assert entry.subsystem_energies == {'system': pytest.approx(1.0)}
    assert ledger_total_delta(ledger) == pytest.approx(0.5)


def test_ledger_rejects_unknown_event():
    h, psi = energy_superposition()
    with pytest.raises(ContractError):
        ledger_record(new_ledger(), h, psi, psi, 'decay', 0.0)
