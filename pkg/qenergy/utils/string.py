import math


def to_csv_float(val):
    '''Return val as str with 17 significant digits (round-trip exact for
    64-bit floats).'''
    val = float(val)
    if math.isnan(val) or math.isinf(val):
        raise ValueError(f'non-finite value in CSV output: {val!r}')
    if val == 0.0:
        # no '-0'
        return '0'
    return '{0:.17g}'.format(val)


def to_csv_field(val):
    if isinstance(val, bool):
        return str(val).lower()
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        return to_csv_float(val)
    return str(val)


def csv_line(values):
    return ','.join(to_csv_field(val) for val in values)


# http://stackoverflow.com/a/16891418
def string_without_prefix(prefix, string):
    '''Return string without prefix.  If string does not start with prefix,
    return string.
    '''
    if string.startswith(prefix):
        return string[len(prefix):]
    return string


def string_with_prefix(prefix, string):
    '''Return string with prefix prepended.  If string already starts with
    prefix, return string.
    '''
    return str(prefix) + string_without_prefix(str(prefix), str(string))


def comment_line(key, value=None):
    '''Return a CSV provenance line, e.g. `# t0: -200`.'''
    if value is None:
        return string_with_prefix('# ', key)
    return string_with_prefix('# ', f'{key}: {to_csv_field(value)}')
