"""Forced problem with a known smooth solution that satisfies the boundary laws exactly."""

import numpy as np

from svstab.model import StateVector

DECAY = 0.5


def manufactured(sysm):
    """Return (forcing, exact) for y = e^{-a t} (h(x), v(x)).

    h(0) = 1 and v(0) = -b0 give the feedback law, v_x vanishes at both ends and
    v(L) = b1 = b1 h(L), so every boundary relation holds for all t.
    """
    L, x = sysm.grid.L, sysm.grid.x
    b0, b1 = sysm.bc.b0, sysm.bc.b1
    k, m = 2 * np.pi / L, np.pi / L
    h = 1 + 0.5 * np.sin(k * x)
    hx = 0.5 * k * np.cos(k * x)
    v = (b1 - b0) / 2 - (b0 + b1) / 2 * np.cos(m * x)
    vx = (b0 + b1) / 2 * m * np.sin(m * x)
    vxx = (b0 + b1) / 2 * m * m * np.cos(m * x)
    A, B, C = sysm.A, sysm.B, sysm.C
    Lh = B[:, 0, 0] * hx + B[:, 0, 1] * vx + C[:, 0, 0] * h + C[:, 0, 1] * v
    Lv = A[1, 1] * vxx + B[:, 1, 0] * hx + B[:, 1, 1] * vx + C[:, 1, 0] * h + C[:, 1, 1] * v

    def scale(t):
        return np.exp(-DECAY * t)

    def forcing(t):
        s = scale(t)
        return StateVector(-DECAY * s * h + s * Lh, -DECAY * s * v + s * Lv)

    def exact(t):
        return StateVector(scale(t) * h, scale(t) * v)

    return forcing, exact
