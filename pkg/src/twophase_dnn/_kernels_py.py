"""Pure-numpy tanh jet kernels (fallback for the compiled extension)."""
import numpy as np

_I = np.array([0, 0, 0, 1, 1, 2])
_J = np.array([0, 1, 2, 1, 2, 2])


def tanh_forward(c):
    t = np.tanh(c[0])
    d1 = 1.0 - t * t
    d2 = -2.0 * t * d1
    g = c[1:4]
    out = np.empty_like(c)
    out[0] = t
    out[1:4] = d1 * g
    out[4:] = d1 * c[4:] + d2 * (g[_I] * g[_J])
    return out


def tanh_backward(c, out, gbar):
    t = out[0]
    d1 = 1.0 - t * t
    d2 = -2.0 * t * d1
    d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1
    g = c[1:4]
    gv, gg, gh = gbar[0], gbar[1:4], gbar[4:]
    res = np.empty_like(c)
    gij = g[_I] * g[_J]
    res[0] = gv * d1 + d2 * (gg * g).sum(0) + (gh * (d2 * c[4:] + d3 * gij)).sum(0)
    res[1] = gg[0] * d1 + d2 * (2 * gh[0] * g[0] + gh[1] * g[1] + gh[2] * g[2])
    res[2] = gg[1] * d1 + d2 * (gh[1] * g[0] + 2 * gh[3] * g[1] + gh[4] * g[2])
    res[3] = gg[2] * d1 + d2 * (gh[2] * g[0] + gh[4] * g[1] + 2 * gh[5] * g[2])
    res[4:] = gh * d1
    return res
