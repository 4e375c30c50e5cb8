'''Two-spin dipole-dipole protocol that shifts the energy of a stationary spin.

Particle 1 (the system) sits at the origin inside a field B_z with Larmor
frequency ω = −γ₁B_z.  Particle 2 (the probe) flies past on the straight line
(vt, b, 0) outside the field, entangles with particle 1 through the
dipole-dipole coupling λ(t) = g/r³ and is then measured along y.  When the
accumulated coupling θ_∞ = 2g/(b²v) is an odd multiple of π the measurement
leaves particle 1 in a z eigenstate, i.e. at energy ±ω/2, although it started
at ⟨H⟩ = 0.

Natural units throughout (ℏ = c = 1).
'''
import numpy as np
from scipy.integrate import quad
from utlz import namedtuple

from qenergy.measurement import (collapse, entanglement_eigenvalues,
                                 entropy_of_eigenvalues, ledger_record,
                                 ledger_total_delta, new_ledger, spin_y_basis)
from qenergy.propagators import (HamiltonianFn, evolve_magnus1,
                                 evolve_ordered, time_grid)
from qenergy.quantum_core import (expectation, hermitian, spin_half, state,
                                  zero_operator)
from qenergy.utils.errors import (ContractError, InvariantError,
                                  QuadratureError)
from qenergy.utils.logger import logger

SPIN_1 = spin_half('1')
SPIN_2 = spin_half('2')
BASIS = (SPIN_1, SPIN_2)

PROPAGATORS = ('magnus1', 'ordered')

DEFAULT_WINDOW = 200.0  # default t0, tf = ∓200·b/v
SINC_SERIES_BELOW = 1e-8
NORM_TOL = 1e-10

HBAR_C_GEV_CM = 1.97327e-14
QUOTED_B_SQRT_V_CM = 7.38e-14

ProtocolParams = namedtuple(
    typename='ProtocolParams',
    field_names=[
        'g',      # dipole coupling (energy·length³)
        'b',      # impact parameter
        'v',      # probe velocity, fraction of c
        'omega',  # Larmor frequency of particle 1
        'phi0',   # initial precession phase of particle 1
        't0',     # start of the interaction window
        'tf',     # end of the interaction window, probe measured here
    ]
)

CouplingIntegrals = namedtuple(
    typename='CouplingIntegrals',
    field_names=[
        'theta',    # ∫ g/r³
        'xi',       # -3 ∫ g/r³ (vt+ib)²/r²
        'omega_t',  # Ω = ω(t - t0)
    ]
)

ProtocolRun = namedtuple(
    typename='ProtocolRun',
    field_names=[
        'final_state',  # StateVector at tf, before the probe measurement
        'outcome',      # OutcomeRecord of the ±y probe measurement
        'ledger',       # EnergyLedger: evolve entry, then collapse entry
        'delta_e',      # total ledger delta
        'residual=None',  # ordered-propagator convergence residual
        'propagator="magnus1"',
    ]
)


def protocol_params(g, b, v, omega=0.0, phi0=0.0, t0=None, tf=None):
    '''Validated ProtocolParams; the window defaults to ∓200·b/v.'''
    g, b, v = float(g), float(b), float(v)
    omega, phi0 = float(omega), float(phi0)
    if not all(np.isfinite([g, b, v, omega, phi0])):
        raise ContractError('protocol parameters must be finite')
    if g < 0.0:
        raise ContractError(f'coupling g must not be negative, got {g}')
    if b <= 0.0:
        raise ContractError(f'impact parameter b must be positive, got {b}')
    if not 0.0 < v < 1.0:
        raise ContractError(f'velocity v must lie in (0, 1), got {v}')
    t0 = -DEFAULT_WINDOW * b / v if t0 is None else float(t0)
    tf = DEFAULT_WINDOW * b / v if tf is None else float(tf)
    if not (np.isfinite(t0) and np.isfinite(tf)) or tf <= t0:
        raise ContractError(f'interaction window needs t0 < tf, got '
                            f'[{t0}, {tf}]')
    return ProtocolParams(g, b, v, omega, phi0, t0, tf)


def theta_infinity(p):
    return 2.0 * p.g / (p.b ** 2 * p.v)


def _theta_raw(p, t):
    r = np.sqrt(p.b ** 2 + p.v ** 2 * t ** 2)
    return p.g * t / (p.b ** 2 * r) + p.g / (p.b ** 2 * p.v)


def _xi_raw(p, t):
    b, v = p.b, p.v
    r = np.sqrt(b ** 2 + v ** 2 * t ** 2)
    return (p.g * (b - 1j * t * v) * (2j * b - t * v) /
            (b ** 2 * v * (b + 1j * t * v) * r) +
            p.g / (b ** 2 * v))


def coupling_integrals_closed(p, t, finite_window=False):
    '''θ(t), ξ(t) from their closed forms and Ω(t) = ω(t − t0).

    The closed forms integrate from t0 → −∞.  With `finite_window` the
    boundary values at the configured t0 are subtracted, which is what a
    quadrature started at t0 returns.
    '''
    theta = _theta_raw(p, t)
    xi = complex(_xi_raw(p, t))
    if finite_window:
        theta -= _theta_raw(p, p.t0)
        xi -= complex(_xi_raw(p, p.t0))
    return CouplingIntegrals(float(theta), xi, p.omega * (t - p.t0))


def _quad_checked(func, lower, upper, points, epsabs, what):
    result = quad(func, lower, upper, points=points or None,
                  epsabs=epsabs, epsrel=1e-10, limit=500, full_output=1)
    if len(result) > 3:
        raise QuadratureError(f'{what} quadrature on [{lower}, {upper}] did '
                              f'not converge: {result[3]}')
    value, abserr = result[0], result[1]
    logger.debug(f'{what}: {value!r} (abserr {abserr:.2e}, '
                 f'{result[2]["neval"]} evaluations)')
    return value


def coupling_integrals_numeric(p, t):
    '''θ, ξ by adaptive quadrature from the configured t0 to t.

    Raises:
        QuadratureError when the integrator reports non-convergence
    '''
    omega_t = p.omega * (t - p.t0)
    if p.g == 0.0 or t == p.t0:
        return CouplingIntegrals(0.0, 0j, omega_t)
    if t < p.t0:
        raise ContractError(f'quadrature needs t >= t0, got t={t}')
    b, v, g = p.b, p.v, p.g

    def lam(tp):
        return g / (b ** 2 + v ** 2 * tp ** 2) ** 1.5

    def xi_integrand(tp):
        return -3.0 * lam(tp) * (v * tp + 1j * b) ** 2 / (v ** 2 * tp ** 2 +
                                                          b ** 2)

    # the integrand is concentrated within a few b/v of closest approach
    points = [pt for pt in (-b / v, 0.0, b / v) if p.t0 < pt < t]
    epsabs = 1e-13 * g / (b ** 2 * v)
    theta = _quad_checked(lam, p.t0, t, points, epsabs, 'theta')
    xi_re = _quad_checked(lambda tp: xi_integrand(tp).real, p.t0, t, points,
                          epsabs, 'xi real part')
    xi_im = _quad_checked(lambda tp: xi_integrand(tp).imag, p.t0, t, points,
                          epsabs, 'xi imaginary part')
    return CouplingIntegrals(theta, complex(xi_re, xi_im), omega_t)


def integrated_matrix(integrals):
    '''(1/4)·[[θ+2Ω, 0, 0, ξ*], [0, −θ+2Ω, −θ, 0], [0, −θ, −θ−2Ω, 0],
    [ξ, 0, 0, θ−2Ω]] in the (↑↑, ↑↓, ↓↑, ↓↓) basis.'''
    theta, xi, big_omega = integrals
    entries = np.zeros((4, 4), dtype=complex)
    entries[0, 0] = theta + 2.0 * big_omega
    entries[1, 1] = -theta + 2.0 * big_omega
    entries[2, 2] = -theta - 2.0 * big_omega
    entries[3, 3] = theta - 2.0 * big_omega
    entries[1, 2] = entries[2, 1] = -theta
    entries[0, 3] = np.conj(xi)
    entries[3, 0] = xi
    return hermitian(BASIS, entries / 4.0)


def integrated_hamiltonian(p, t, finite_window=False):
    '''∫_{t0}^{t} H dt' as a Hermitian Operator.'''
    return integrated_matrix(coupling_integrals_closed(p, t, finite_window))


def _instantaneous_entries(p, times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    r2 = p.b ** 2 + p.v ** 2 * times ** 2
    coupling = p.g / r2 ** 1.5
    # r-hat in the x-y plane written as the phase (vt + ib)/r
    n2 = (p.v * times + 1j * p.b) ** 2 / r2
    stack = np.zeros((len(times), 4, 4), dtype=complex)
    stack[:, 0, 0] = coupling / 4.0 + p.omega / 2.0
    stack[:, 1, 1] = -coupling / 4.0 + p.omega / 2.0
    stack[:, 2, 2] = -coupling / 4.0 - p.omega / 2.0
    stack[:, 3, 3] = coupling / 4.0 - p.omega / 2.0
    stack[:, 1, 2] = stack[:, 2, 1] = -coupling / 4.0
    stack[:, 0, 3] = -3.0 * coupling * np.conj(n2) / 4.0
    stack[:, 3, 0] = -3.0 * coupling * n2 / 4.0
    return stack


def instantaneous_hamiltonian(p, t):
    '''H(t) = ωS₁ᶻ⊗1 + (g/r³)[S⃗₁·S⃗₂ − 3(S⃗₁·r̂)(S⃗₂·r̂)], particle 2 at
    (vt, b, 0).'''
    return hermitian(BASIS, _instantaneous_entries(p, t)[0])


def hamiltonian_fn(p):
    return HamiltonianFn(BASIS,
                         lambda t: instantaneous_hamiltonian(p, t),
                         lambda times: _instantaneous_entries(p, times))


def field_hamiltonian(p):
    '''ωS₁ᶻ⊗1₂, the Hamiltonian once the probe has left.'''
    return hermitian(BASIS, np.diag([1.0, 1.0, -1.0, -1.0]) * p.omega / 2.0)


def spin_energy_hamiltonians(p):
    '''Per-particle spin energies for the ledger; the probe is field free.'''
    return {'spin1': field_hamiltonian(p), 'spin2': zero_operator(BASIS)}


def energy_eigenvalues(p):
    '''(−ω/2, +ω/2) ascending, energies of particle 1 in the field.'''
    return tuple(sorted((-p.omega / 2.0, p.omega / 2.0)))


def larmor_frequency(gamma1, b_z):
    return -gamma1 * b_z


def initial_state(p):
    '''½(|↑⟩ + e^{iφ₀}|↓⟩)₁(|↑⟩ + |↓⟩)₂'''
    phase = np.exp(1j * p.phi0)
    return state(BASIS, np.array([1.0, 1.0, phase, phase]) / 2.0)


def sinc(delta):
    '''sin Δ / Δ with the series 1 − Δ²/6 close to 0.'''
    if abs(delta) < SINC_SERIES_BELOW:
        return 1.0 - delta ** 2 / 6.0
    return np.sin(delta) / delta


def analytic_components(integrals, phi0):
    '''The four amplitudes of exp(−i∫H)|ψ0⟩ in closed form.'''
    theta, xi, big_omega = integrals
    phase = np.exp(1j * phi0)
    delta_xi = 0.25 * np.sqrt(abs(xi) ** 2 + 4.0 * big_omega ** 2)
    delta_theta = 0.25 * np.sqrt(theta ** 2 + 4.0 * big_omega ** 2)
    cos_xi, sinc_xi = np.cos(delta_xi), sinc(delta_xi)
    cos_th, sinc_th = np.cos(delta_theta), sinc(delta_theta)
    outer = np.exp(-0.25j * theta) / 8.0
    inner = np.exp(0.25j * theta) / 8.0
    return np.array([
        outer * (4.0 * cos_xi -
                 1j * sinc_xi * (2.0 * big_omega + phase * np.conj(xi))),
        inner * (4.0 * cos_th -
                 1j * sinc_th * (2.0 * big_omega - phase * theta)),
        inner * (4.0 * phase * cos_th +
                 1j * sinc_th * (2.0 * phase * big_omega + theta)),
        outer * (4.0 * phase * cos_xi +
                 1j * sinc_xi * (2.0 * phase * big_omega - xi)),
    ])


def analytic_state(p, t, finite_window=False):
    '''|ψ(t)⟩ from the closed-form components.

    Raises:
        InvariantError if the components are not normalized within 1e-10
    '''
    amps = analytic_components(coupling_integrals_closed(p, t, finite_window),
                               p.phi0)
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise InvariantError(f'analytic state norm {norm!r} at t={t}')
    return state(BASIS, amps, normalize=True)


def asymptotic_state(p, t):
    '''Late-time limit of the components, Δ → Ω/2 and θ, ξ → θ_∞.'''
    quarter = theta_infinity(p) / 4.0
    half_omega = p.omega * (t - p.t0) / 2.0
    phase = np.exp(1j * p.phi0)
    return state(BASIS, 0.5 * np.array([
        np.exp(-1j * (quarter + half_omega)),
        np.exp(1j * (quarter - half_omega)),
        phase * np.exp(1j * (quarter + half_omega)),
        phase * np.exp(-1j * (quarter - half_omega)),
    ]))


def maximal_entangled_final_state(p, t):
    '''(e^{−i(π/4+Ω/2)}|↑⟩|+y⟩ + e^{i(π/4+φ₀+Ω/2)}|↓⟩|−y⟩)/√2, the late-time
    state when θ_∞ = π.'''
    half_omega = p.omega * (t - p.t0) / 2.0
    plus_y = np.array([1.0, 1.0j]) / np.sqrt(2.0)
    minus_y = np.array([1.0, -1.0j]) / np.sqrt(2.0)
    up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    amps = (np.exp(-1j * (np.pi / 4.0 + half_omega)) * np.kron(up, plus_y) +
            np.exp(1j * (np.pi / 4.0 + p.phi0 + half_omega)) *
            np.kron(down, minus_y)) / np.sqrt(2.0)
    return state(BASIS, amps)


def asymptotic_entanglement(p):
    '''(θ_∞, k−, k+) with k± = ½(1 ± |cos(θ_∞/2)|).

    The magnitude makes the pair ascending for every θ_∞; it does not depend
    on φ₀.
    '''
    theta_inf = theta_infinity(p)
    spread = abs(np.cos(theta_inf / 2.0))
    return theta_inf, 0.5 * (1.0 - spread), 0.5 * (1.0 + spread)


def tune_max_entanglement(g, n=0, fix='b', value=1.0):
    '''Solve 2g/(b²v) = (2n+1)π for the free one of b and v.

    Return:
        {'g': g, 'b': b, 'v': v}
    '''
    g, value, n = float(g), float(value), int(n)
    if g <= 0.0 or value <= 0.0 or n < 0:
        raise ContractError('tuning needs g > 0, a positive fixed value and '
                            'n >= 0')
    target = (2 * n + 1) * np.pi
    if fix == 'b':
        b, v = value, 2.0 * g / (value ** 2 * target)
        if not v < 1.0:
            raise ContractError(f'tuned velocity {v!r} is not below the '
                                'speed of light')
    elif fix == 'v':
        v, b = value, float(np.sqrt(2.0 * g / (value * target)))
    else:
        raise ContractError(f"fix must be 'b' or 'v', got {fix!r}")
    return {'g': g, 'b': b, 'v': v}


def run_protocol(p, propagator='magnus1', steps=200000, seed=0):
    '''Evolve over [t0, tf], measure the probe along y and audit the energy.

    The magnus1 propagator uses the closed-form integrals over the finite
    window so the evolution starts exactly at |ψ0⟩; `ordered` steps through
    the instantaneous Hamiltonian with `steps` midpoint exponentials.

    Return:
        ProtocolRun
    '''
    if propagator not in PROPAGATORS:
        raise ContractError(f'unknown propagator {propagator!r}')
    psi0 = initial_state(p)
    grid = time_grid(p.t0, p.tf, steps)
    hfn = hamiltonian_fn(p)
    residual = None
    if propagator == 'magnus1':
        final = evolve_magnus1(hfn, grid, psi0,
                               integrated_hamiltonian(p, p.tf, True))
    else:
        evolution = evolve_ordered(hfn, grid, psi0)
        final, residual = evolution.state, evolution.residual
    # probe far from particle 1: only the field term survives
    h_final = field_hamiltonian(p)
    energies = spin_energy_hamiltonians(p)
    ledger = ledger_record(new_ledger(), h_final, psi0, final, 'evolve', p.tf,
                           energies)
    outcome = collapse(final, spin_y_basis(SPIN_2), seed)
    ledger = ledger_record(ledger, h_final, final, outcome.post_state,
                           'collapse', p.tf, energies)
    delta_e = ledger_total_delta(ledger)
    logger.verbose(f'protocol {propagator}: outcome {outcome.label} '
                   f'(p={outcome.probability:.9f}) delta_E={delta_e:+.12g}')
    return ProtocolRun(final, outcome, ledger, delta_e, residual, propagator)


def feasibility_report(g_gev2, n=0):
    '''b√v needed for θ_∞ = (2n+1)π at coupling `g_gev2` (GeV⁻²).

    Return:
        dict with b√v in GeV⁻¹ and cm, the quoted literature value in cm and
        their ratio
    '''
    b_sqrt_v = float(np.sqrt(2.0 * g_gev2 / ((2 * n + 1) * np.pi)))
    b_sqrt_v_cm = b_sqrt_v * HBAR_C_GEV_CM
    return {
        'g_gev2': float(g_gev2),
        'n': int(n),
        'b_sqrt_v_gev_inv': b_sqrt_v,
        'b_sqrt_v_cm': b_sqrt_v_cm,
        'quoted_cm': QUOTED_B_SQRT_V_CM,
        'ratio': QUOTED_B_SQRT_V_CM / b_sqrt_v_cm,
    }


def entanglement_row(psi):
    '''(k_minus, k_plus, entropy in nats) of particle 1's reduced state.'''
    k_minus, k_plus = entanglement_eigenvalues(psi, '1')
    return k_minus, k_plus, entropy_of_eigenvalues([k_minus, k_plus])


def trajectory_rows(p, times, finite_window=True):
    '''(t, θ, Re ξ, Im ξ, k−, k+, S) along the analytic Magnus-1 state.'''
    rows = []
    for t in times:
        integrals = coupling_integrals_closed(p, t, finite_window)
        psi = analytic_state(p, t, finite_window)
        rows.append((float(t), integrals.theta, integrals.xi.real,
                     integrals.xi.imag) + entanglement_row(psi))
    return rows


def sweep_point(args):
    '''One (b, v) point of a sweep, late-time values from the closed forms.

    Takes a single tuple (g, b, v, omega, phi0) so it can be mapped over a
    worker pool.

    Return:
        (b, v, θ_∞, k−, k+, S, |ΔE|)
    '''
    g, b, v, omega, phi0 = args
    p = protocol_params(g, b, v, omega, phi0)
    theta_inf, k_minus, k_plus = asymptotic_entanglement(p)
    entropy = entropy_of_eigenvalues([k_minus, k_plus])
    # outcome ±y leaves particle 1 at ±(ω/2)·sin(θ_∞/2), both with p = 1/2
    delta_e = abs(omega) / 2.0 * abs(np.sin(theta_inf / 2.0))
    return (b, v, theta_inf, k_minus, k_plus, entropy, delta_e)


def expected_spin_energy(p, psi):
    return expectation(field_hamiltonian(p), psi)
