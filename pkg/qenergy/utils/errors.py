'''Exceptions raised by qenergy.

Every error derives from QEnergyError so callers (the scripts, the
validation suite) can catch library failures in one place.
'''


class QEnergyError(Exception):
    pass


class StructureError(QEnergyError):
    '''Dimension or label clash, unknown subsystem, basis mismatch.'''


class ContractError(QEnergyError):
    '''A precondition on an argument does not hold, e.g. a non-Hermitian
    operator where a Hermitian one is required.'''


class InvariantError(QEnergyError):
    '''A post-condition self-check failed.  Indicates a bug, not bad input.'''


class QuadratureError(QEnergyError):
    pass


class ConfigError(QEnergyError):
    pass
