"""Compiled inner loops for the block-counting jump chain."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def beta_shape_jumps(y, a, b, p1, u, x, pos):
    """Advance the chain from state ``y`` using the uniforms in ``u``.

    Each jump is drawn by sequential inversion starting at l = 1, the atoms
    being generated by the ratio recurrence of a Beta(a, b)-shaped measure.
    Jump sizes are written to ``x[pos:]``.  Returns the new state and the
    number of uniforms consumed; stops early at absorption or when ``u`` is
    exhausted.
    """
    used = 0
    nu = u.shape[0]
    while y > 1 and used < nu:
        p = p1[y]
        c = p
        ell = 1
        v = u[used]
        while v > c and ell < y - 1:
            p *= (y - ell - 1.0) / (ell + 2.0) * (ell - 1.0 + a) / (y - ell - 2.0 + b)
            ell += 1
            c += p
        x[pos + used] = ell
        y -= ell
        used += 1
    return y, used
