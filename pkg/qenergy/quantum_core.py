'''Dense complex linear algebra over small labeled Hilbert spaces.

States, operators and density matrices are immutable namedtuples holding
read-only numpy arrays.  A basis is a tuple of `Subsystem`s; the product
basis is ordered lexicographically by subsystem, so for two spins the row
order is ↑↑, ↑↓, ↓↑, ↓↓.
'''
import itertools
import string

import numpy as np
from utlz import namedtuple

from qenergy.utils.errors import ContractError, InvariantError, StructureError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
PROJECTOR_TOL = 1e-12
DEGENERACY_TOL = 1e-10
EIGEN_CLIP_TOL = 1e-12

KINDS = ('hermitian', 'unitary', 'projector', 'general')


Subsystem = namedtuple(
    typename='Subsystem',
    field_names=[
        'name',    # type: str, unique within a basis
        'labels',  # tuple of str, one per basis state, in matrix order
    ]
)

StateVector = namedtuple(
    typename='StateVector',
    field_names=[
        'basis',  # tuple of Subsystem
        'amps',   # 1-d complex ndarray (read-only)
    ]
)

Operator = namedtuple(
    typename='Operator',
    field_names=[
        'basis',
        'entries',  # 2-d complex ndarray (read-only)
        'kind="general"',
    ]
)

DensityMatrix = namedtuple(
    typename='DensityMatrix',
    field_names=[
        'basis',
        'entries',
    ]
)

Eigensystem = namedtuple(
    typename='Eigensystem',
    field_names=[
        'values',   # ascending real ndarray
        'vectors',  # orthonormal columns
    ]
)


# basis handling

def subsystem(name, labels):
    labels = tuple(str(label) for label in labels)
    if len(labels) == 0:
        raise StructureError(f'subsystem {name!r} has no basis states')
    if len(set(labels)) != len(labels):
        raise StructureError(f'subsystem {name!r} has duplicate labels')
    return Subsystem(str(name), labels)


def spin_half(name):
    return subsystem(name, ('↑', '↓'))


def as_basis(basis):
    if isinstance(basis, Subsystem):
        basis = (basis, )
    basis = tuple(basis)
    names = [sub.name for sub in basis]
    if len(set(names)) != len(names):
        raise StructureError(f'subsystem names clash: {names}')
    return basis


def basis_dims(basis):
    return tuple(len(sub.labels) for sub in basis)


def basis_dim(basis):
    return int(np.prod(basis_dims(basis)))


def basis_labels(basis):
    '''Product labels in matrix order, e.g. ['↑↑', '↑↓', '↓↑', '↓↓'].'''
    return [''.join(combo)
            for combo
            in itertools.product(*[sub.labels for sub in basis])]


def subsystem_index(basis, name):
    for index, sub in enumerate(basis):
        if sub.name == name:
            return index
    raise StructureError(
        f'unknown subsystem {name!r}; basis has '
        f'{[sub.name for sub in basis]}')


def _check_same_basis(basis_a, basis_b):
    if tuple(basis_a) != tuple(basis_b):
        raise StructureError('basis mismatch: '
                             f'{[s.name for s in basis_a]} vs '
                             f'{[s.name for s in basis_b]}')


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


def _check_finite(array, what):
    if not np.all(np.isfinite(array)):
        raise ContractError(f'{what} contains NaN or Inf')


# predicates

def max_abs(entries):
    entries = np.asarray(entries)
    if entries.size == 0:
        return 0.0
    return float(np.max(np.abs(entries)))


def _scale(entries):
    return max(1.0, max_abs(entries))


def is_hermitian(entries, tol=HERMITIAN_TOL):
    entries = np.asarray(entries)
    return max_abs(entries - entries.conj().T) < tol * _scale(entries)


def is_unitary(entries, tol=UNITARY_TOL):
    entries = np.asarray(entries)
    eye = np.eye(entries.shape[0])
    return max_abs(entries.conj().T @ entries - eye) < tol


def is_projector(entries, tol=PROJECTOR_TOL):
    entries = np.asarray(entries)
    return (is_hermitian(entries, tol) and
            max_abs(entries @ entries - entries) < tol)


# constructors

def state(basis, amps, normalize=False):
    '''Return a StateVector over `basis`.

    Args:
        basis: Subsystem or tuple of Subsystem
        amps: amplitudes in matrix order
        normalize(bool): rescale to unit norm instead of rejecting a
                         non-normalized input
    '''
    basis = as_basis(basis)
    amps = np.array(amps, dtype=complex).reshape(-1)
    _check_finite(amps, 'state amplitudes')
    if amps.shape[0] != basis_dim(basis):
        raise StructureError(f'{amps.shape[0]} amplitudes for a '
                             f'{basis_dim(basis)}-dimensional basis')
    norm = float(np.linalg.norm(amps))
    if normalize:
        if norm == 0.0:
            raise ContractError('cannot normalize the zero vector')
        amps = amps / norm
    elif abs(norm - 1.0) > NORM_TOL:
        raise ContractError(f'state not normalized: |psi| = {norm!r}')
    return StateVector(basis, _frozen(amps))


def basis_state(basis, label):
    '''Unit vector on the product label (str) or matrix index (int).'''
    basis = as_basis(basis)
    if isinstance(label, str):
        labels = basis_labels(basis)
        if label not in labels:
            raise StructureError(f'unknown basis label {label!r}')
        index = labels.index(label)
    else:
        index = int(label)
    amps = np.zeros(basis_dim(basis), dtype=complex)
    amps[index] = 1.0
    return state(basis, amps)


def operator(basis, entries, kind='general'):
    '''Return an Operator after checking the invariant of its `kind`.

    Hermitian and projector entries are symmetrized after the check so that
    downstream eigensolves see an exactly Hermitian matrix.
    '''
    basis = as_basis(basis)
    if kind not in KINDS:
        raise ContractError(f'unknown operator kind {kind!r}')
    entries = np.array(entries, dtype=complex)
    dim = basis_dim(basis)
    if entries.shape != (dim, dim):
        raise StructureError(f'operator shape {entries.shape} does not fit '
                             f'a {dim}-dimensional basis')
    _check_finite(entries, 'operator entries')
    if kind == 'hermitian':
        if not is_hermitian(entries):
            raise ContractError('operator is not Hermitian: '
                                f'|A - A^+| = {max_abs(entries - entries.conj().T)!r}')
        entries = 0.5 * (entries + entries.conj().T)
    elif kind == 'projector':
        if not is_projector(entries):
            raise ContractError('operator is not an orthogonal projector')
        entries = 0.5 * (entries + entries.conj().T)
    elif kind == 'unitary':
        if not is_unitary(entries):
            raise ContractError('operator is not unitary')
    return Operator(basis, _frozen(entries), kind)


def hermitian(basis, entries):
    return operator(basis, entries, 'hermitian')


def identity(basis):
    basis = as_basis(basis)
    return operator(basis, np.eye(basis_dim(basis)), 'hermitian')


def zero_operator(basis):
    basis = as_basis(basis)
    dim = basis_dim(basis)
    return operator(basis, np.zeros((dim, dim)), 'hermitian')


def density_matrix(basis, entries):
    basis = as_basis(basis)
    entries = np.array(entries, dtype=complex)
    dim = basis_dim(basis)
    if entries.shape != (dim, dim):
        raise StructureError(f'density matrix shape {entries.shape} does not '
                             f'fit a {dim}-dimensional basis')
    _check_finite(entries, 'density matrix')
    if not is_hermitian(entries):
        raise ContractError('density matrix is not Hermitian')
    trace = complex(np.trace(entries))
    if abs(trace - 1.0) > NORM_TOL:
        raise ContractError(f'density matrix trace is {trace!r}')
    entries = 0.5 * (entries + entries.conj().T)
    if np.min(np.linalg.eigvalsh(entries)) < -EIGEN_CLIP_TOL:
        raise ContractError('density matrix has a negative eigenvalue')
    return DensityMatrix(basis, _frozen(entries))


def pure_density(psi):
    '''ρ = |ψ⟩⟨ψ|'''
    return density_matrix(psi.basis, np.outer(psi.amps, psi.amps.conj()))


# structure

def tensor_product(a, b):
    '''Kronecker product of two states or two operators on disjoint
    subsystems.  The result basis is a's subsystems followed by b's.
    '''
    basis = a.basis + b.basis
    names = [sub.name for sub in basis]
    if len(set(names)) != len(names):
        raise StructureError(f'tensor product of overlapping subsystems: '
                             f'{names}')
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return state(basis, np.kron(a.amps, b.amps))
    if isinstance(a, Operator) and isinstance(b, Operator):
        kind = a.kind if a.kind == b.kind else 'general'
        return operator(basis, np.kron(a.entries, b.entries), kind)
    raise StructureError('tensor_product needs two states or two operators, '
                         f'got {type(a).__name__} and {type(b).__name__}')


def embed(local, basis, name, kind=None):
    '''Lift an operator acting on subsystem `name` to the full `basis`.

    Args:
        local: Operator on the single subsystem, or its d x d entries
    '''
    basis = as_basis(basis)
    index = subsystem_index(basis, name)
    if isinstance(local, Operator):
        kind = kind or local.kind
        local = local.entries
    local = np.asarray(local, dtype=complex)
    dims = basis_dims(basis)
    if local.shape != (dims[index], dims[index]):
        raise StructureError(f'local operator shape {local.shape} does not '
                             f'fit subsystem {name!r}')
    entries = np.eye(1)
    for pos, dim in enumerate(dims):
        factor = local if pos == index else np.eye(dim)
        entries = np.kron(entries, factor)
    return operator(basis, entries, kind or 'general')


def partial_trace(rho, keep):
    '''Reduced density matrix on subsystem(s) `keep`.

    Args:
        rho: DensityMatrix or StateVector
        keep: subsystem name or list of names (kept in basis order)

    Return:
        DensityMatrix
    '''
    if isinstance(keep, str):
        keep = [keep]
    basis = rho.basis
    keep_idx = sorted(subsystem_index(basis, name) for name in keep)
    dims = basis_dims(basis)
    kept_basis = tuple(basis[i] for i in keep_idx)
    traced_idx = [i for i in range(len(dims)) if i not in keep_idx]
    kept_dim = basis_dim(kept_basis)

    if isinstance(rho, StateVector):
        tensor = rho.amps.reshape(dims)
        tensor = np.transpose(tensor, keep_idx + traced_idx)
        matrix = tensor.reshape(kept_dim, -1)
        reduced = matrix @ matrix.conj().T
        reduced = reduced / np.vdot(rho.amps, rho.amps).real
    else:
        letters = string.ascii_letters
        n = len(dims)
        rows = list(letters[:n])
        cols = list(letters[n:2 * n])
        for i in traced_idx:
            cols[i] = rows[i]
        out = ''.join(rows[i] for i in keep_idx) + \
            ''.join(cols[i] for i in keep_idx)
        tensor = rho.entries.reshape(dims + dims)
        reduced = np.einsum(''.join(rows) + ''.join(cols) + '->' + out,
                            tensor)
        reduced = reduced.reshape(kept_dim, kept_dim)
    return density_matrix(kept_basis, reduced)


# linear algebra

def apply(op, psi):
    '''U|ψ⟩ for a unitary (or any norm-preserving) operator.'''
    _check_same_basis(op.basis, psi.basis)
    return state(psi.basis, op.entries @ psi.amps)


def overlap(a, b):
    '''⟨a|b⟩'''
    _check_same_basis(a.basis, b.basis)
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a, b):
    '''|⟨a|b⟩|², insensitive to global phase.'''
    return abs(overlap(a, b)) ** 2


def commutator(a, b):
    _check_same_basis(a.basis, b.basis)
    return operator(a.basis, a.entries @ b.entries - b.entries @ a.entries)


def _require_hermitian(op, what='operator'):
    if op.kind in ('hermitian', 'projector'):
        return
    if not is_hermitian(op.entries):
        raise ContractError(f'{what} must be Hermitian')


def expectation(op, psi):
    '''⟨ψ|A|ψ⟩ for Hermitian A; the imaginary round-off is checked and
    discarded.
    '''
    _require_hermitian(op)
    _check_same_basis(op.basis, psi.basis)
    value = complex(np.vdot(psi.amps, op.entries @ psi.amps))
    if abs(value.imag) > HERMITIAN_TOL * _scale(op.entries):
        raise InvariantError(f'expectation of a Hermitian operator has '
                             f'imaginary part {value.imag!r}')
    return value.real


def _canonical_subspace(vectors):
    '''Deterministic orthonormal basis of span(vectors): Gram-Schmidt of the
    projected standard basis vectors, in index order.'''
    dim, rank = vectors.shape
    projector = vectors @ vectors.conj().T
    out = []
    for index in range(dim):
        candidate = projector[:, index].copy()
        for prev in out:
            candidate = candidate - np.vdot(prev, candidate) * prev
        norm = np.linalg.norm(candidate)
        if norm > 1e-6:
            out.append(candidate / norm)
        if len(out) == rank:
            break
    if len(out) < rank:
        return vectors
    return np.column_stack(out)


def _fix_phase(vector):
    '''Largest-magnitude component real positive (first one on ties).'''
    magnitudes = np.abs(vector)
    index = int(np.argmax(magnitudes >= magnitudes.max() - 1e-12))
    return vector * (abs(vector[index]) / vector[index])


def eigh(op):
    '''Eigensystem of a Hermitian operator with reproducible eigenvectors.

    Eigenvalues ascend.  Degenerate eigenspaces (within 1e-10, relative to the
    spectral scale) get a canonical basis, and every eigenvector's largest
    component is made real positive.

    Return:
        Eigensystem(values, vectors)
    '''
    _require_hermitian(op)
    entries = op.entries
    values, vectors = np.linalg.eigh(entries)
    scale = max(1.0, float(np.max(np.abs(values))))
    vectors = vectors.copy()
    start = 0
    while start < len(values):
        stop = start + 1
        while (stop < len(values) and
               values[stop] - values[stop - 1] < DEGENERACY_TOL * scale):
            stop += 1
        if stop - start > 1:
            vectors[:, start:stop] = _canonical_subspace(vectors[:, start:stop])
        start = stop
    for col in range(vectors.shape[1]):
        vectors[:, col] = _fix_phase(vectors[:, col])
    values.flags.writeable = False
    return Eigensystem(values, _frozen(vectors))


def eigenspaces(op):
    '''Group eigenvectors of a Hermitian operator by degenerate eigenvalue.

    Return:
        [(eigenvalue, columns), ...] ascending
    '''
    system = eigh(op)
    scale = max(1.0, float(np.max(np.abs(system.values))))
    groups = []
    for value, column in zip(system.values, system.vectors.T):
        if groups and value - groups[-1][0] < DEGENERACY_TOL * scale:
            groups[-1][1].append(column)
        else:
            groups.append((float(value), [column]))
    return [(value, np.column_stack(columns)) for value, columns in groups]


def expm_skew(h, t):
    '''exp(-i h t) for Hermitian h, built as V exp(-i Λ t) V^+.'''
    _require_hermitian(h, 'generator')
    if not np.isfinite(t):
        raise ContractError(f'non-finite time {t!r}')
    values, vectors = np.linalg.eigh(h.entries)
    phases = np.exp(-1j * values * t)
    return operator(h.basis, (vectors * phases) @ vectors.conj().T,
                    'unitary')


def expm_skew_batch(h_stack, dt):
    '''exp(-i H_k dt) for a stack of Hermitian matrices, shape (n, d, d).

    Returns a plain ndarray; every factor is unitary up to eigensolver
    round-off.
    '''
    h_stack = np.asarray(h_stack, dtype=complex)
    values, vectors = np.linalg.eigh(h_stack)
    phases = np.exp(-1j * values * dt)
    return np.einsum('nij,nj,nkj->nik', vectors, phases, vectors.conj())


def clip_eigenvalues(values):
    '''Clamp round-off negatives in [-1e-12, 0) to 0.'''
    values = np.array(values, dtype=float)
    if np.any(values < -EIGEN_CLIP_TOL):
        raise InvariantError(f'eigenvalue below -{EIGEN_CLIP_TOL}: '
                             f'{values.min()!r}')
    return np.where(values < 0.0, 0.0, values)
