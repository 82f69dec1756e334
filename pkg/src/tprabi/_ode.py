"""Compiled fixed-step RK4 kernels for psi'' = Q(x) psi at the collapse point.

Q(x) = (-4 Et w^2 x^2 + 4 Et^2 - w0^2) / (4 w^2 x^2 - 4 Et), i.e. twice the
effective potential.  With Et < 0 the denominator is strictly positive.
"""
import numba
import numpy as np

_OVERFLOW = 1e150


@numba.njit(cache=True)
def q_coefficient(x, et, w0, w):
    w2x2 = w * w * x * x
    return (-4.0 * et * w2x2 + 4.0 * et * et - w0 * w0) / (4.0 * w2x2 - 4.0 * et)


@numba.njit(cache=True)
def _step(x, y, dy, h, et, w0, w):
    q0 = q_coefficient(x, et, w0, w)
    qm = q_coefficient(x + 0.5 * h, et, w0, w)
    q1 = q_coefficient(x + h, et, w0, w)
    k1y = dy
    k1d = q0 * y
    k2y = dy + 0.5 * h * k1d
    k2d = qm * (y + 0.5 * h * k1y)
    k3y = dy + 0.5 * h * k2d
    k3d = qm * (y + 0.5 * h * k2y)
    k4y = dy + h * k3d
    k4d = q1 * (y + h * k3y)
    y_new = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    dy_new = dy + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
    return y_new, dy_new


SUBSTEP_RESOLUTION = 16.0


@numba.njit(cache=True)
def _interval(x, y, dy, h, et, w0, w):
    """Advance one grid interval, sub-stepping where Q varies faster than h.

    Q changes on the length scale sqrt(|Et| + w^2 x^2)/w, which near the
    origin can be far below the grid step when Et -> 0-.
    """
    xa = min(abs(x), abs(x + h))
    scale = np.sqrt(abs(et) + w * w * xa * xa) / w
    n_sub = int(np.ceil(abs(h) * SUBSTEP_RESOLUTION / scale))
    if n_sub <= 1:
        return _step(x, y, dy, h, et, w0, w)
    hs = h / n_sub
    for k in range(n_sub):
        y, dy = _step(x + k * hs, y, dy, hs, et, w0, w)
    return y, dy


@numba.njit(cache=True)
def count_sign_changes(et, w0, w, y0, dy0, h, n_steps):
    """Sign changes of psi over n_steps outward steps from x = 0.

    The solution is rescaled when it grows large; only its sign matters.
    Returns (changes, last_sign).
    """
    y = y0
    dy = dy0
    x = 0.0
    changes = 0
    last = 0.0
    if y0 != 0.0:
        last = np.sign(y0)
    for i in range(n_steps):
        y, dy = _interval(x, y, dy, h, et, w0, w)
        x = (i + 1) * h
        if y != 0.0:
            s = np.sign(y)
            if last != 0.0 and s != last:
                changes += 1
            last = s
        if abs(y) > _OVERFLOW:
            y /= _OVERFLOW
            dy /= _OVERFLOW
    return changes, last


@numba.njit(cache=True)
def integrate_path(x0, h, n_steps, y0, dy0, et, w0, w):
    """Store psi and psi' at x0 + i h, i = 0..n_steps (h may be negative).

    Stops at overflow; returns (psi, dpsi, n_done).
    """
    ys = np.zeros(n_steps + 1)
    dys = np.zeros(n_steps + 1)
    ys[0] = y0
    dys[0] = dy0
    y = y0
    dy = dy0
    for i in range(n_steps):
        y, dy = _interval(x0 + i * h, y, dy, h, et, w0, w)
        ys[i + 1] = y
        dys[i + 1] = dy
        if not abs(y) < _OVERFLOW:
            return ys, dys, i + 1
    return ys, dys, n_steps


@numba.njit(cache=True)
def integrate_endpoint(x0, h, n_steps, y0, dy0, et, w0, w):
    """Final (psi, psi') only, jointly rescaled if they grow large."""
    y = y0
    dy = dy0
    for i in range(n_steps):
        y, dy = _interval(x0 + i * h, y, dy, h, et, w0, w)
        if abs(y) > _OVERFLOW or abs(dy) > _OVERFLOW:
            y /= _OVERFLOW
            dy /= _OVERFLOW
    return y, dy
