'''Closed models whose energy expectation is audited: the system/environment
branching toy and the two-spin dipole-dipole measurement protocol.
'''
