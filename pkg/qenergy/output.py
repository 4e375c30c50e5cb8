'''CSV documents for the toy, spin and sweep runs.

Every document starts with `#` provenance lines (parameter echo, window,
config digest, residuals) followed by RFC-4180 rows; floats carry 17
significant digits.  Rendering is pure: the same config and seed give the
same text.
'''
from multiprocessing import Pool

import numpy as np

from qenergy.config import (config_echo, protocol_params_from,
                            sweep_grid_from, toy_params_from)
from qenergy.measurement import project, spin_y_basis
from qenergy.models import everett_toy, spin_protocol
from qenergy.quantum_core import expectation
from qenergy.utils.encoding import canonical_json, config_digest_b64
from qenergy.utils.logger import logger
from qenergy.utils.string import comment_line, csv_line

TOY_HEADER = ('t', 'global_energy', 'h_int_expect', 'branch_label',
              'branch_weight', 'branch_energy')
SPIN_HEADER = ('t', 'theta', 'xi_re', 'xi_im', 'k_minus', 'k_plus',
               'entropy_nats')
SPIN_FOOTER_HEADER = ('outcome', 'probability', 'delta_E')
SWEEP_HEADER = ('b', 'v', 'theta_inf', 'k_minus', 'k_plus', 'entropy_nats',
                'delta_E_magnitude')


def provenance(cfg):
    echo = config_echo(cfg)
    return [
        comment_line('qenergy', cfg.subcommand),
        comment_line('config', canonical_json(echo)),
        comment_line('config_sha256', config_digest_b64(echo)),
    ]


def toy_csv_lines(cfg):
    p, times = toy_params_from(cfg)
    _, rows = everett_toy.branch_energy_audit(p, times)
    lines = provenance(cfg)
    lines.append(comment_line('t_star', everett_toy.decoherence_time(p)))
    lines.append(comment_line('environment_energy', 0.0))
    lines.append(csv_line(TOY_HEADER))
    lines.extend(csv_line(row) for row in everett_toy.audit_csv_rows(rows))
    return lines


def spin_csv_lines(cfg):
    '''Trajectory of the closed-form state, then the probe measurement.

    The footer lists both ±y outcomes with their Born probabilities and the
    energy change each one implies; the outcome drawn with the configured
    seed is named in a comment.
    '''
    p, times = protocol_params_from(cfg)
    lines = provenance(cfg)
    lines.append(comment_line('t0', p.t0))
    lines.append(comment_line('tf', p.tf))
    lines.append(comment_line('theta_inf', spin_protocol.theta_infinity(p)))
    lines.append(csv_line(SPIN_HEADER))
    lines.extend(csv_line(row)
                 for row in spin_protocol.trajectory_rows(p, times))

    run = spin_protocol.run_protocol(p, cfg.propagator, int(cfg.steps),
                                     int(cfg.seed))
    if run.residual is not None:
        lines.append(comment_line('convergence', run.residual))
        closed = spin_protocol.analytic_state(p, p.tf, finite_window=True)
        deviation = float(np.max(np.abs(closed.amps - run.final_state.amps)))
        lines.append(comment_line('magnus1_deviation', deviation))
        logger.verbose(f'ordered vs magnus1 deviation {deviation:.3e}')
    lines.append(comment_line('measured', run.outcome.label))
    lines.append(csv_line(SPIN_FOOTER_HEADER))
    h_final = spin_protocol.field_hamiltonian(p)
    e_initial = expectation(h_final, spin_protocol.initial_state(p))
    mbasis = spin_y_basis(spin_protocol.SPIN_2)
    for outcome, label in enumerate(mbasis.labels):
        post, prob = project(run.final_state, mbasis, outcome)
        lines.append(csv_line((label, prob,
                               expectation(h_final, post) - e_initial)))
    return lines


def sweep_csv_lines(cfg):
    '''Late-time values over a (b, v) grid, rows sorted by (b, v).'''
    points = sweep_grid_from(cfg)
    workers = max(1, int(cfg.params['workers']))
    if workers > 1:
        with Pool(workers) as pool:
            rows = pool.map(spin_protocol.sweep_point, points)
    else:
        rows = [spin_protocol.sweep_point(point) for point in points]
    rows.sort(key=lambda row: (row[0], row[1]))
    lines = provenance(cfg)
    lines.append(comment_line('points', len(rows)))
    lines.append(csv_line(SWEEP_HEADER))
    lines.extend(csv_line(row) for row in rows)
    return lines


RENDERERS = {
    'toy': toy_csv_lines,
    'spin': spin_csv_lines,
    'sweep': sweep_csv_lines,
}


def render(cfg):
    return '\n'.join(RENDERERS[cfg.subcommand](cfg)) + '\n'
