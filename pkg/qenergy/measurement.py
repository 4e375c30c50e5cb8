'''Projective measurement, collapse and the energy ledger.

The ledger is the audit trail of ⟨H⟩ across evolve, branch and collapse
events; a collapse entry's delta is the energy the textbook recipe creates or
destroys.
'''
import numpy as np
from scipy.special import entr
from utlz import namedtuple

from qenergy.quantum_core import (as_basis, basis_dim, clip_eigenvalues,
                                  eigenspaces, embed, expectation, max_abs,
                                  partial_trace, state)
from qenergy.utils.errors import ContractError, InvariantError, StructureError
from qenergy.utils.logger import logger

COMPLETENESS_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-10
PROBABILITY_TOL = 1e-12
AMPLITUDE_FLOOR = 1e-12
ENTANGLEMENT_TOL = 1e-10

LEDGER_EVENTS = ('evolve', 'branch', 'collapse')

MeasurementBasis = namedtuple(
    typename='MeasurementBasis',
    field_names=[
        'basis',       # tuple of Subsystem the projectors act on
        'projectors',  # tuple of read-only d x d ndarrays
        'labels',      # outcome names, e.g. ('+y', '-y')
        'values=None',  # eigenvalue per outcome for energy bases
    ]
)

OutcomeRecord = namedtuple(
    typename='OutcomeRecord',
    field_names=[
        'outcome',      # index into the measurement basis
        'label',
        'probability',
        'post_state',   # normalized StateVector
        'rng_seed',
    ]
)

LedgerEntry = namedtuple(
    typename='LedgerEntry',
    field_names=[
        'time',
        'event',               # one of LEDGER_EVENTS
        'energy_before',       # ⟨H⟩ of the pre state
        'total_energy',        # ⟨H⟩ of the post state
        'delta',               # total_energy - energy_before
        'subsystem_energies',  # {name: ⟨H_name⟩ of the post state}
    ]
)

EnergyLedger = namedtuple(
    typename='EnergyLedger',
    field_names=[
        'entries',  # tuple of LedgerEntry, in recording order
    ]
)


def measurement_basis(basis, projectors, labels=None, values=None):
    '''Validate and build a MeasurementBasis.

    Args:
        basis: Subsystem or tuple of Subsystem the projectors act on
        projectors: list of d x d matrices
    '''
    basis = as_basis(basis)
    dim = basis_dim(basis)
    mats = []
    for proj in projectors:
        proj = np.array(getattr(proj, 'entries', proj), dtype=complex)
        if proj.shape != (dim, dim):
            raise StructureError(f'projector shape {proj.shape} does not fit '
                                 f'a {dim}-dimensional measurement basis')
        proj.flags.writeable = False
        mats.append(proj)
    if max_abs(sum(mats) - np.eye(dim)) > COMPLETENESS_TOL:
        raise ContractError('incomplete projector set: sum of projectors '
                            'is not the identity')
    for i, p_i in enumerate(mats):
        for j, p_j in enumerate(mats):
            target = p_i if i == j else np.zeros_like(p_i)
            if max_abs(p_i @ p_j - target) > ORTHOGONALITY_TOL:
                raise ContractError(f'projectors {i} and {j} are not '
                                    'orthogonal idempotents')
    if labels is None:
        labels = tuple(str(i) for i in range(len(mats)))
    labels = tuple(labels)
    if values is not None:
        values = tuple(float(val) for val in values)
    return MeasurementBasis(basis, tuple(mats), labels, values)


def spin_y_basis(sub):
    '''Projectors on |±y⟩ = (|↑⟩ ± i|↓⟩)/√2.'''
    plus = np.array([1.0, 1.0j]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0j]) / np.sqrt(2.0)
    return measurement_basis(sub,
                             [np.outer(plus, plus.conj()),
                              np.outer(minus, minus.conj())],
                             labels=('+y', '-y'))


def energy_basis(h):
    '''Projectors onto the eigenspaces of a Hermitian operator, ascending.'''
    projectors, values = [], []
    for value, columns in eigenspaces(h):
        projectors.append(columns @ columns.conj().T)
        values.append(value)
    return measurement_basis(h.basis, projectors,
                             labels=tuple(f'E={val:.12g}' for val in values),
                             values=values)


def _full_projectors(psi, mbasis):
    if tuple(mbasis.basis) == tuple(psi.basis):
        return list(mbasis.projectors)
    if len(mbasis.basis) != 1:
        raise StructureError('measurement basis must cover one subsystem or '
                             'the whole space')
    name = mbasis.basis[0].name
    if mbasis.basis[0] not in psi.basis:
        raise StructureError(f'state has no subsystem {name!r}')
    return [embed(proj, psi.basis, name).entries for proj in mbasis.projectors]


def born_probabilities(psi, mbasis):
    '''p_i = ⟨ψ|P_i|ψ⟩, with round-off negatives clamped to 0.'''
    probabilities = []
    for proj in _full_projectors(psi, mbasis):
        prob = float(np.vdot(psi.amps, proj @ psi.amps).real)
        if prob < 0.0:
            if prob < -PROBABILITY_TOL:
                raise InvariantError(f'negative probability {prob!r}')
            prob = 0.0
        probabilities.append(prob)
    total = sum(probabilities)
    if abs(total - 1.0) > PROBABILITY_TOL:
        raise ContractError(f'probabilities sum to {total!r}; state not '
                            'normalized or projector set incomplete')
    return probabilities


def uniform_draw(seed):
    '''One uniform number in [0, 1) from the counter-based Philox generator
    keyed by the 64-bit `seed`.'''
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ContractError(f'seed must be a 64-bit unsigned integer: {seed}')
    return float(np.random.Generator(np.random.Philox(seed)).random())


def select_outcome(probabilities, u):
    '''Smallest i with p_i > 0 and cumulative p >= u.'''
    cumulative = 0.0
    last = None
    for index, prob in enumerate(probabilities):
        if prob <= 0.0:
            continue
        cumulative += prob
        last = index
        if cumulative >= u:
            return index
    return last


def fix_global_phase(amps):
    '''Rotate so the first non-negligible amplitude is real positive.'''
    amps = np.asarray(amps, dtype=complex)
    nonzero = np.flatnonzero(np.abs(amps) > AMPLITUDE_FLOOR)
    if len(nonzero) == 0:
        return amps
    lead = amps[nonzero[0]]
    return amps * (abs(lead) / lead)


def project(psi, mbasis, outcome):
    '''Normalized P_i|ψ⟩ and p_i, without sampling.'''
    proj = _full_projectors(psi, mbasis)[outcome]
    projected = proj @ psi.amps
    prob = float(np.vdot(projected, projected).real)
    if prob <= 0.0:
        raise ContractError(f'outcome {outcome} has probability zero')
    amps = fix_global_phase(projected / np.sqrt(prob))
    return state(psi.basis, amps, normalize=True), prob


def collapse(psi, mbasis, seed):
    '''Sample an outcome with the Born rule and return the collapsed state.

    Return:
        OutcomeRecord
    '''
    probabilities = born_probabilities(psi, mbasis)
    u = uniform_draw(seed)
    outcome = select_outcome(probabilities, u)
    post_state, _ = project(psi, mbasis, outcome)
    logger.debug(f'collapse seed={seed} u={u:.6f} -> '
                 f'{mbasis.labels[outcome]} (p={probabilities[outcome]:.6f})')
    return OutcomeRecord(outcome, mbasis.labels[outcome],
                         probabilities[outcome], post_state, int(seed))


def expected_post_energy(psi, mbasis, h):
    '''Σ_i p_i ⟨H⟩ in the collapsed state i.'''
    total = 0.0
    for outcome, prob in enumerate(born_probabilities(psi, mbasis)):
        if prob > 0.0:
            post, _ = project(psi, mbasis, outcome)
            total += prob * expectation(h, post)
    return total


def _two_spin_check(psi):
    if len(psi.basis) != 2 or any(len(sub.labels) != 2 for sub in psi.basis):
        raise StructureError('entanglement eigenvalues need a two-spin state')


def entanglement_eigenvalues(psi, subsystem):
    '''Eigenvalues (k_minus, k_plus) of the reduced density matrix.

    Cross-checked against the closed form
    k± = ½(1 ± √(1 − 4|ψ↑↑ψ↓↓ − ψ↑↓ψ↓↑|²)) through its characteristic
    polynomial: k+ + k- = 1 and k+ k- = |ψ↑↑ψ↓↓ − ψ↑↓ψ↓↑|².
    '''
    _two_spin_check(psi)
    rho = partial_trace(psi, subsystem)
    values = clip_eigenvalues(np.linalg.eigvalsh(rho.entries))
    k_minus, k_plus = float(values[0]), float(values[1])
    amps = psi.amps
    cross = abs(amps[0] * amps[3] - amps[1] * amps[2]) ** 2
    if (abs(k_minus + k_plus - 1.0) > ENTANGLEMENT_TOL or
            abs(k_minus * k_plus - cross) > ENTANGLEMENT_TOL):
        raise InvariantError('reduced-density eigenvalues disagree with the '
                             f'closed form: k=({k_minus}, {k_plus}), '
                             f'|det|^2={cross}')
    return k_minus, k_plus


def closed_form_entanglement(psi):
    '''k± straight from the closed form (ill-conditioned near k = 1/2).'''
    _two_spin_check(psi)
    amps = psi.amps
    cross = abs(amps[0] * amps[3] - amps[1] * amps[2]) ** 2
    root = np.sqrt(max(0.0, 1.0 - 4.0 * cross))
    return 0.5 * (1.0 - root), 0.5 * (1.0 + root)


def von_neumann_entropy(rho):
    '''-Σ λ log λ in nats, 0 log 0 = 0.'''
    values = clip_eigenvalues(np.linalg.eigvalsh(rho.entries))
    return float(np.sum(entr(values)))


def entropy_of_eigenvalues(values):
    return float(np.sum(entr(clip_eigenvalues(values))))


def new_ledger():
    return EnergyLedger(())


def ledger_record(ledger, h, psi_pre, psi_post, event, time,
                  subsystem_hamiltonians=None):
    '''Append an entry with delta = ⟨ψ_post|H|ψ_post⟩ − ⟨ψ_pre|H|ψ_pre⟩.

    Args:
        subsystem_hamiltonians: {name: Hermitian Operator on the full basis},
                                evaluated on psi_post

    Return:
        a new EnergyLedger
    '''
    if event not in LEDGER_EVENTS:
        raise ContractError(f'unknown ledger event {event!r}')
    before = expectation(h, psi_pre)
    after = expectation(h, psi_post)
    energies = {}
    for name, op in sorted((subsystem_hamiltonians or {}).items()):
        energies[name] = expectation(op, psi_post)
    entry = LedgerEntry(float(time), event, before, after, after - before,
                        energies)
    logger.verbose(f'ledger {event} t={time:.6g}: <H> {before:.12g} -> '
                   f'{after:.12g} (delta {after - before:+.3e})')
    return EnergyLedger(ledger.entries + (entry, ))


def ledger_total_delta(ledger):
    return sum(entry.delta for entry in ledger.entries)
