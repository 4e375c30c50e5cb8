'''Propagation strategies for |ψ(t)⟩:

* `evolve_static`   exact exponential of a time-independent Hamiltonian,
* `evolve_magnus1`  exp(-i ∫H dt'), the first Magnus term,
* `evolve_ordered`  product of midpoint exponentials (time-ordered oracle).
'''
import numpy as np
from scipy.integrate import simpson
from utlz import namedtuple

from qenergy.quantum_core import (apply, expm_skew, expm_skew_batch,
                                  hermitian, is_hermitian, state)
from qenergy.utils.errors import ContractError, StructureError
from qenergy.utils.logger import logger

DEFAULT_CHUNK = 10000

# above these the ordered run is reported as suspect
RESIDUAL_WARN = 1e-2
NORM_DRIFT_WARN = 1e-9

TimeGrid = namedtuple(
    typename='TimeGrid',
    field_names=[
        't0',     # start time (natural units)
        'tf',     # end time
        'steps',  # number of uniform intervals
    ]
)

# `at(t)` returns a Hermitian Operator; `stack(times)` (optional) returns the
# entries for many times at once as an ndarray of shape (n, d, d).
HamiltonianFn = namedtuple(
    typename='HamiltonianFn',
    field_names=[
        'basis',
        'at',
        'stack=None',
    ]
)

OrderedEvolution = namedtuple(
    typename='OrderedEvolution',
    field_names=[
        'state',       # StateVector at grid.tf
        'residual',    # |psi(steps) - psi(steps/2)|
        'norm_drift',  # | |psi| - 1 | before the final renormalization
        'steps',
    ]
)

ConvergenceStudy = namedtuple(
    typename='ConvergenceStudy',
    field_names=[
        'steps',             # (N, 2N, 4N)
        'order',             # log2 of successive difference ratio
        'richardson_ratio',  # |psi_N - psi*| / |psi_2N - psi*|, ~4 for O(dt^2)
    ]
)


def time_grid(t0, tf, steps):
    t0, tf, steps = float(t0), float(tf), int(steps)
    if not (np.isfinite(t0) and np.isfinite(tf)) or tf <= t0:
        raise ContractError(f'time grid needs t0 < tf, got [{t0}, {tf}]')
    if steps < 1:
        raise ContractError(f'time grid needs steps >= 1, got {steps}')
    return TimeGrid(t0, tf, steps)


def grid_dt(grid):
    return (grid.tf - grid.t0) / grid.steps


def grid_times(grid):
    return np.linspace(grid.t0, grid.tf, grid.steps + 1)


def grid_midpoints(grid):
    dt = grid_dt(grid)
    return grid.t0 + dt * (np.arange(grid.steps) + 0.5)


def hamiltonian_stack(hfn, times):
    if hfn.stack is not None:
        return np.asarray(hfn.stack(np.asarray(times, dtype=float)),
                          dtype=complex)
    return np.array([hfn.at(t).entries for t in times])


def _check_psi(hfn, psi0):
    if tuple(hfn.basis) != tuple(psi0.basis):
        raise StructureError('Hamiltonian and state live on different bases')


def evolve_static(h, t, psi0):
    '''exp(-i h t)|ψ0⟩ for a time-independent Hermitian h.'''
    if tuple(h.basis) != tuple(psi0.basis):
        raise StructureError('Hamiltonian and state live on different bases')
    return apply(expm_skew(h, t), psi0)


def integrate_hamiltonian(hfn, grid):
    '''∫H dt over the grid by composite Simpson, entry by entry.'''
    times = grid_times(grid)
    samples = hamiltonian_stack(hfn, times)
    real = simpson(samples.real, x=times, axis=0)
    imag = simpson(samples.imag, x=times, axis=0)
    return hermitian(hfn.basis, real + 1j * imag)


def evolve_magnus1(hfn, grid, psi0, integrated=None):
    '''exp(-i ∫_{t0}^{tf} H dt')|ψ0⟩.

    This reproduces the single-exponential propagator; it equals the true
    evolution only if H(t) commutes with itself at different times.

    Args:
        integrated: closed-form ∫H as a Hermitian Operator; integrated
                    numerically on `grid` when None
    '''
    _check_psi(hfn, psi0)
    if integrated is None:
        integrated = integrate_hamiltonian(hfn, grid)
    elif not is_hermitian(integrated.entries):
        raise ContractError('integrated Hamiltonian is not Hermitian')
    if tuple(integrated.basis) != tuple(psi0.basis):
        raise StructureError('integrated Hamiltonian basis mismatch')
    return apply(expm_skew(integrated, 1.0), psi0)


def _step_product(hfn, grid, amps, chunk=DEFAULT_CHUNK):
    dt = grid_dt(grid)
    mids = grid_midpoints(grid)
    amps = np.array(amps, dtype=complex)
    for start in range(0, len(mids), chunk):
        factors = expm_skew_batch(hamiltonian_stack(hfn, mids[start:start + chunk]),
                                  dt)
        for factor in factors:
            amps = factor @ amps
    return amps


def evolve_ordered(hfn, grid, psi0, chunk=DEFAULT_CHUNK):
    '''Time-ordered product Π_k exp(-i H(t_k + dt/2) dt)|ψ0⟩.

    Each factor is unitary, the global error is O(dt^2).  Every call also
    evolves on the half-resolution grid and reports the difference as a
    convergence residual.

    Return:
        OrderedEvolution
    '''
    _check_psi(hfn, psi0)
    amps = _step_product(hfn, grid, psi0.amps, chunk)
    if grid.steps >= 2:
        half = TimeGrid(grid.t0, grid.tf, grid.steps // 2)
        coarse = _step_product(hfn, half, psi0.amps, chunk)
        residual = float(np.linalg.norm(amps - coarse))
    else:
        residual = float('nan')
    norm_drift = abs(float(np.linalg.norm(amps)) - 1.0)
    logger.verbose(f'ordered evolution: steps={grid.steps} '
                   f'residual={residual:.3e} norm drift={norm_drift:.3e}')
    if residual > RESIDUAL_WARN:
        logger.warning(f'ordered evolution not converged: residual '
                       f'{residual:.3e} at {grid.steps} steps')
    if norm_drift > NORM_DRIFT_WARN:
        logger.warning(f'ordered evolution lost unitarity: norm drift '
                       f'{norm_drift:.3e}')
    return OrderedEvolution(state(psi0.basis, amps, normalize=True),
                            residual, norm_drift, grid.steps)


def convergence_order(hfn, grid, psi0, chunk=DEFAULT_CHUNK):
    '''Self-convergence study of `evolve_ordered` at N, 2N and 4N steps.'''
    _check_psi(hfn, psi0)
    steps = (grid.steps, 2 * grid.steps, 4 * grid.steps)
    results = [_step_product(hfn, TimeGrid(grid.t0, grid.tf, n), psi0.amps,
                             chunk)
               for n in steps]
    coarse, medium, fine = results
    order = float(np.log2(np.linalg.norm(coarse - medium) /
                          np.linalg.norm(medium - fine)))
    limit = fine + (fine - medium) / 3.0
    ratio = float(np.linalg.norm(coarse - limit) /
                  np.linalg.norm(medium - limit))
    logger.debug(f'convergence study {steps}: order={order:.4f} '
                 f'richardson ratio={ratio:.4f}')
    return ConvergenceStudy(steps, order, ratio)
