'''Run configuration: defaults, JSON config files and flag merging.

Keys form one flat namespace.  A JSON config file may spell keys with dashes
(as the flags are spelled) or underscores; command line flags override the
file.
'''
import numpy as np
from utlz import load_json, namedtuple

from qenergy.models.everett_toy import toy_params
from qenergy.models.spin_protocol import PROPAGATORS, protocol_params
from qenergy.utils.errors import ConfigError, ContractError

SUBCOMMANDS = ('toy', 'spin', 'sweep', 'validate')

COMMON_DEFAULTS = {
    'output': None,
    'seed': 0,
    'steps': 200000,
    'propagator': 'magnus1',
}

PARAM_DEFAULTS = {
    'toy': {
        'alpha_re': float(np.sqrt(0.5)),
        'alpha_im': 0.0,
        'beta_re': float(np.sqrt(0.5)),
        'beta_im': 0.0,
        'e1': 1.0,
        'e2': 3.0,
        'lambda': 1.0,
        't_max': float(np.pi),
        't_steps': 100,
    },
    'spin': {
        'g': 1.0,
        'b': 1.0,
        'v': float(2.0 / np.pi),
        'omega': 2.0,
        'phi0': 0.0,
        't0': None,
        'tf': None,
        't_steps': 201,
    },
    'sweep': {
        'g': 1.0,
        'omega': 2.0,
        'phi0': 0.0,
        'b_min': 0.5,
        'b_max': 2.0,
        'b_num': 3,
        'v_min': 0.1,
        'v_max': 0.9,
        'v_num': 3,
        'spacing': 'linear',
        'workers': 1,
    },
    'validate': {
        'filter': None,
    },
}

RunConfig = namedtuple(
    typename='RunConfig',
    field_names=[
        'subcommand',
        'params',            # flat dict, see PARAM_DEFAULTS
        'output=None',       # path, None for standard output
        'seed=0',            # 64-bit unsigned
        'steps=200000',      # ordered-propagator steps
        'propagator="magnus1"',
        'filter=None',       # validate: substring of criterion names
    ]
)


def normalize_key(key):
    return key.replace('-', '_')


def load_config_file(path):
    '''Flat dict from a JSON config file.

    Raises:
        ConfigError if the file cannot be read or is not a JSON object
    '''
    try:
        data = load_json(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f'cannot read config file {path}: {exc}')
    if not isinstance(data, dict):
        raise ConfigError(f'config file {path} must hold a JSON object')
    return {normalize_key(key): val for key, val in data.items()}


def merge_config(subcommand, file_values=None, flag_values=None):
    '''Defaults < config file < flags, unknown keys rejected.

    Flags whose value is None count as not given.

    Return:
        RunConfig
    '''
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f'unknown subcommand {subcommand!r}')
    known = dict(COMMON_DEFAULTS)
    known.update(PARAM_DEFAULTS[subcommand])
    merged = dict(known)
    for source in (file_values or {}, flag_values or {}):
        for key, val in source.items():
            key = normalize_key(key)
            if key not in known:
                raise ConfigError(f'unknown key {key!r} for {subcommand}')
            if val is not None:
                merged[key] = val
    common = {key: merged.pop(key) for key in COMMON_DEFAULTS}
    filter_ = merged.get('filter')
    cfg = RunConfig(subcommand, merged, common['output'], common['seed'],
                    common['steps'], common['propagator'], filter_)
    _check_common(cfg)
    return cfg


def _check_common(cfg):
    try:
        seed, steps = int(cfg.seed), int(cfg.steps)
    except (TypeError, ValueError):
        raise ConfigError('seed and steps must be integers')
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f'seed must be a 64-bit unsigned integer: {seed}')
    if steps < 2:
        raise ConfigError(f'steps must be at least 2, got {steps}')
    if cfg.propagator not in PROPAGATORS:
        raise ConfigError(f'unknown propagator {cfg.propagator!r}, expected '
                          f'one of {", ".join(PROPAGATORS)}')


def _number(params, key, kind=float):
    try:
        return kind(params[key])
    except (TypeError, ValueError):
        raise ConfigError(f'{key} must be a number, got {params[key]!r}')


def toy_params_from(cfg):
    '''ToyParams and the sample times of a toy run.'''
    params = cfg.params
    t_max = _number(params, 't_max')
    t_steps = _number(params, 't_steps', int)
    if t_max <= 0.0 or t_steps < 1:
        raise ConfigError('toy run needs t_max > 0 and t_steps >= 1')
    try:
        p = toy_params(complex(_number(params, 'alpha_re'),
                               _number(params, 'alpha_im')),
                       complex(_number(params, 'beta_re'),
                               _number(params, 'beta_im')),
                       _number(params, 'e1'), _number(params, 'e2'),
                       _number(params, 'lambda'))
    except ContractError as exc:
        raise ConfigError(str(exc))
    return p, np.linspace(0.0, t_max, t_steps + 1)


def protocol_params_from(cfg):
    '''ProtocolParams and the trajectory sample times of a spin run.'''
    params = cfg.params
    t_steps = _number(params, 't_steps', int)
    if t_steps < 1:
        raise ConfigError('spin run needs t_steps >= 1')
    window = {key: None if params[key] is None else _number(params, key)
              for key in ('t0', 'tf')}
    try:
        p = protocol_params(_number(params, 'g'), _number(params, 'b'),
                            _number(params, 'v'), _number(params, 'omega'),
                            _number(params, 'phi0'), **window)
    except ContractError as exc:
        raise ConfigError(str(exc))
    return p, np.linspace(p.t0, p.tf, t_steps + 1)


def sweep_grid_from(cfg):
    '''Sorted list of (g, b, v, omega, phi0) sweep points.'''
    params = cfg.params
    axes = {}
    for name in ('b', 'v'):
        low = _number(params, f'{name}_min')
        high = _number(params, f'{name}_max')
        num = _number(params, f'{name}_num', int)
        if num < 1 or low <= 0.0 or high < low:
            raise ConfigError(f'empty or invalid {name} grid: '
                              f'[{low}, {high}] with {num} points')
        if params['spacing'] == 'log':
            axes[name] = np.geomspace(low, high, num)
        elif params['spacing'] == 'linear':
            axes[name] = np.linspace(low, high, num)
        else:
            raise ConfigError(f'unknown spacing {params["spacing"]!r}')
    if axes['v'][-1] >= 1.0:
        raise ConfigError('sweep velocities must stay below 1')
    g, omega = _number(params, 'g'), _number(params, 'omega')
    phi0 = _number(params, 'phi0')
    if g < 0.0:
        raise ConfigError(f'coupling g must not be negative, got {g}')
    return sorted((g, float(b), float(v), omega, phi0)
                  for b in axes['b'] for v in axes['v'])


def config_echo(cfg):
    '''Resolved configuration as a plain dict (for provenance comments).'''
    echo = dict(cfg.params)
    echo.update(subcommand=cfg.subcommand, seed=int(cfg.seed),
                steps=int(cfg.steps), propagator=cfg.propagator)
    return echo
