'''Closed system/environment model of decoherence and branching.

A two-level system (states |1⟩_s, |2⟩_s with energies E1, E2) couples to a
three-state environment (ready state |0⟩_e, pointer states |1⟩_e, |2⟩_e).
The interaction rotates |0⟩_e into |i⟩_e conditioned on |i⟩_s, so after
t* = π/(2λ) the global state has split into two orthogonal branches whose
energies are E1 and E2 while ⟨H⟩ of the whole never moves.

The environment carries no self-Hamiltonian; all energy is system energy.
'''
import numpy as np
from utlz import namedtuple

from qenergy.measurement import ledger_record, new_ledger
from qenergy.quantum_core import (basis_dim, basis_labels, basis_state,
                                  commutator, eigenspaces, expectation,
                                  hermitian, max_abs, operator, state,
                                  subsystem, subsystem_index, tensor_product)
from qenergy.utils.errors import ContractError, InvariantError
from qenergy.utils.logger import logger

SYSTEM = subsystem('s', ('1', '2'))
ENVIRONMENT = subsystem('e', ('0', '1', '2'))
BASIS = (SYSTEM, ENVIRONMENT)

BRANCH_WEIGHT_FLOOR = 1e-14
SUPPORT_WEIGHT_FLOOR = 1e-14
AUDIT_TOL = 1e-10

ToyParams = namedtuple(
    typename='ToyParams',
    field_names=[
        'alpha',  # complex amplitude of |1>_s
        'beta',   # complex amplitude of |2>_s
        'e1',     # energy of |1>_s
        'e2',     # energy of |2>_s
        'lam',    # coupling lambda > 0 (inverse time)
    ]
)

BranchRecord = namedtuple(
    typename='BranchRecord',
    field_names=[
        'label',      # environment basis label
        'amplitude',  # norm of the conditional system state (real >= 0)
        'state',      # normalized branch state on the full basis
        'energy',     # <H> in the branch
        'weight',     # |amplitude|^2
    ]
)

BranchAuditRow = namedtuple(
    typename='BranchAuditRow',
    field_names=[
        't',
        'global_energy',
        'h_self_expect',
        'h_int_expect',
        'branches',  # list of BranchRecord
    ]
)


def toy_params(alpha, beta, e1, e2, lam):
    '''Validated ToyParams.'''
    alpha, beta = complex(alpha), complex(beta)
    e1, e2, lam = float(e1), float(e2), float(lam)
    values = [alpha.real, alpha.imag, beta.real, beta.imag, e1, e2, lam]
    if not all(np.isfinite(values)):
        raise ContractError('toy parameters must be finite')
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise ContractError(f'normalization violated: |alpha|^2 + |beta|^2 = '
                            f'{norm!r}')
    if lam <= 0.0:
        raise ContractError(f'coupling lambda must be positive, got {lam}')
    return ToyParams(alpha, beta, e1, e2, lam)


def decoherence_time(p):
    '''t* = π/(2λ): first time the pointer states are fully orthogonal.'''
    return np.pi / (2.0 * p.lam)


def build_hamiltonian(p):
    '''(H_self, H_int) on the (system, environment) basis.

    H_self = (E1|1⟩⟨1| + E2|2⟩⟨2|) ⊗ 1_e
    H_int  = -iλ[|1⟩⟨1| ⊗ (|0⟩⟨1| - |1⟩⟨0|) + |2⟩⟨2| ⊗ (|0⟩⟨2| - |2⟩⟨0|)]
    '''
    system_energies = np.diag([p.e1, p.e2])
    h_self = np.kron(system_energies, np.eye(3))

    def env_generator(pointer):
        gen = np.zeros((3, 3), dtype=complex)
        gen[0, pointer] = 1.0
        gen[pointer, 0] = -1.0
        return gen

    proj_1 = np.diag([1.0, 0.0])
    proj_2 = np.diag([0.0, 1.0])
    h_int = -1j * p.lam * (np.kron(proj_1, env_generator(1)) +
                           np.kron(proj_2, env_generator(2)))
    h_self, h_int = hermitian(BASIS, h_self), hermitian(BASIS, h_int)
    comm = max_abs(commutator(h_self, h_int).entries)
    if comm > 1e-12 * max(1.0, abs(p.e1), abs(p.e2)) * max(1.0, p.lam):
        raise InvariantError(f'[H_self, H_int] = {comm!r}, expected 0')
    return h_self, h_int


def total_hamiltonian(p):
    h_self, h_int = build_hamiltonian(p)
    return hermitian(BASIS, h_self.entries + h_int.entries)


def _env_rotation(pointer, angle):
    rot = np.eye(3)
    c, s = np.cos(angle), np.sin(angle)
    rot[0, 0] = c
    rot[pointer, pointer] = c
    rot[0, pointer] = -s
    rot[pointer, 0] = s
    return rot


def closed_form_propagator(p, t):
    '''U(t) = e^{-iE1 t}|1⟩⟨1| ⊗ R1(λt) + e^{-iE2 t}|2⟩⟨2| ⊗ R2(λt),
    R_i rotating |0⟩_e towards |i⟩_e.'''
    angle = p.lam * t
    entries = (np.exp(-1j * p.e1 * t) *
               np.kron(np.diag([1.0, 0.0]), _env_rotation(1, angle)) +
               np.exp(-1j * p.e2 * t) *
               np.kron(np.diag([0.0, 1.0]), _env_rotation(2, angle)))
    return operator(BASIS, entries, 'unitary')


def initial_state(p):
    '''(α|1⟩_s + β|2⟩_s) ⊗ |0⟩_e'''
    system = state(SYSTEM, [p.alpha, p.beta])
    return tensor_product(system, basis_state(ENVIRONMENT, '0'))


def ideal_branched_state(p):
    '''α|1⟩_s|1⟩_e + β|2⟩_s|2⟩_e, the branched target up to phases.'''
    amps = np.zeros(basis_dim(BASIS), dtype=complex)
    amps[basis_labels(BASIS).index('11')] = p.alpha
    amps[basis_labels(BASIS).index('22')] = p.beta
    return state(BASIS, amps)


def evolved_state(p, t):
    '''|ψ(t)⟩ from the closed-form propagator.'''
    return state(BASIS, closed_form_propagator(p, t).entries @
                 initial_state(p).amps)


def branch_decompose(psi, env_subsystem='e', h=None):
    '''Split |ψ⟩ along the environment basis states.

    Each environment state |i⟩_e with nonzero overlap gives a branch whose
    state is the normalized conditional system state ⊗ |i⟩_e.  Branches with
    weight below 1e-14 are round-off ghosts and omitted.

    Args:
        h: Hamiltonian for branch energies (defaults to the energy being
           zero when no Hamiltonian is given)

    Return:
        [<BranchRecord>, ...] in environment-label order
    '''
    basis = psi.basis
    env_index = subsystem_index(basis, env_subsystem)
    env = basis[env_index]
    dims = [len(sub.labels) for sub in basis]
    tensor = np.moveaxis(psi.amps.reshape(dims), env_index, -1)
    branches = []
    for pos, label in enumerate(env.labels):
        conditional = tensor[..., pos]
        weight = float(np.vdot(conditional, conditional).real)
        if weight < BRANCH_WEIGHT_FLOOR:
            continue
        branch = np.zeros_like(tensor)
        branch[..., pos] = conditional / np.sqrt(weight)
        branch = np.moveaxis(branch, -1, env_index).reshape(-1)
        branch_state = state(basis, branch, normalize=True)
        energy = expectation(h, branch_state) if h is not None else 0.0
        branches.append(BranchRecord(label, float(np.sqrt(weight)),
                                     branch_state, energy, weight))
    return branches


def branch_overlap(branches):
    '''Largest |⟨b_i|b_j⟩| between distinct branches.'''
    worst = 0.0
    for i, first in enumerate(branches):
        for second in branches[i + 1:]:
            worst = max(worst, abs(np.vdot(first.state.amps,
                                           second.state.amps)))
    return worst


def branch_spectral_support(psi, h, branch=None):
    '''Weights of a branch state on the eigenspaces of `h`.

    Degenerate eigenvalues are grouped, so the weights do not depend on the
    eigenbasis chosen inside an eigenspace.  Without `branch` the support of
    `psi` itself is returned.

    Return:
        [(eigenvalue, weight), ...] ascending, weights below 1e-14 dropped
    '''
    target = psi if branch is None else branch.state
    support = []
    for value, columns in eigenspaces(h):
        coeffs = columns.conj().T @ target.amps
        weight = float(np.vdot(coeffs, coeffs).real)
        if weight >= SUPPORT_WEIGHT_FLOOR:
            support.append((value, weight))
    return support


def branch_energy_audit(p, t_samples):
    '''Track global and per-branch energies of the toy model over time.

    Asserts at every sample that ⟨H_int⟩ = 0 and that the global energy is
    |α|²E1 + |β|²E2; at t* additionally that the weighted branch energies
    add up to the global energy.

    Return:
        (EnergyLedger, [<BranchAuditRow>, ...])
    '''
    h_self, h_int = build_hamiltonian(p)
    h = hermitian(BASIS, h_self.entries + h_int.entries)
    expected = abs(p.alpha) ** 2 * p.e1 + abs(p.beta) ** 2 * p.e2
    scale = max(1.0, abs(p.e1), abs(p.e2), p.lam)
    t_star = decoherence_time(p)

    ledger = new_ledger()
    rows = []
    psi_prev = initial_state(p)
    for t in t_samples:
        psi = evolved_state(p, t)
        global_energy = expectation(h, psi)
        self_energy = expectation(h_self, psi)
        int_energy = expectation(h_int, psi)
        if abs(int_energy) > 1e-12 * scale:
            raise InvariantError(f'<H_int>({t}) = {int_energy!r}, expected 0')
        if abs(global_energy - expected) > AUDIT_TOL * scale:
            raise InvariantError(f'<H>({t}) = {global_energy!r}, expected '
                                 f'{expected!r}')
        branches = branch_decompose(psi, 'e', h)
        if abs(t - t_star) <= 1e-12 * max(1.0, t_star):
            weighted = sum(b.weight * b.energy for b in branches)
            if abs(weighted - global_energy) > AUDIT_TOL * scale:
                raise InvariantError('weighted branch energies do not add up '
                                     f'to the global energy at t*: {weighted!r}')
        ledger = ledger_record(ledger, h, psi_prev, psi, 'evolve', t,
                               {'h_self': h_self, 'h_int': h_int})
        # energy an observer in each branch would ascribe to their world
        for branch in branches:
            ledger = ledger_record(ledger, h, psi, branch.state, 'branch', t)
        rows.append(BranchAuditRow(float(t), global_energy, self_energy,
                                   int_energy, branches))
        psi_prev = psi
    logger.verbose(f'toy audit: {len(rows)} samples, global energy '
                   f'{expected:.12g}')
    return ledger, rows


def audit_csv_rows(rows):
    '''Flatten audit rows to (t, global_energy, h_int_expect, branch_label,
    branch_weight, branch_energy) tuples, one per (t, branch).'''
    out = []
    for row in rows:
        for branch in row.branches:
            out.append((row.t, row.global_energy, row.h_int_expect,
                        branch.label, branch.weight, branch.energy))
    return out
