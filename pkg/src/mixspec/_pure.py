"""Pure-Python implementations of the hot kernels.

These are the reference versions: ``_kernels.pyx`` follows the same
arithmetic step for step, and the test-suite checks the two agree.
"""

import cmath

import numpy as np

CONVERGED = 0
MAX_ITER = 1

_MIN_DAMPING = 2.0**-30
_STAGE_TOL = 1e-8


def harris_path(x0, jump_u, fresh):
    """Run the sticky chain from ``x0``.

    Step ``k`` jumps to ``fresh[k]`` when ``jump_u[k] < |x|``, otherwise the
    chain stays put.  Returns the ``len(jump_u) + 1`` visited states.
    """
    jump_u = np.asarray(jump_u, dtype=np.float64)
    fresh = np.asarray(fresh, dtype=np.float64)
    out = [0.0] * (jump_u.shape[0] + 1)
    x = float(x0)
    out[0] = x
    for k, (u, y) in enumerate(zip(jump_u.tolist(), fresh.tolist()), start=1):
        if u < abs(x):
            x = y
        out[k] = x
    return np.array(out, dtype=np.float64)


def doubling_windows(digits, length):
    """Pack 64-digit sliding windows of a binary digit stream into integers.

    Window ``t`` holds ``digits[t], ..., digits[t + 63]`` with ``digits[t]``
    as the most significant bit.
    """
    d = np.asarray(digits, dtype=np.uint64)
    if d.shape[0] < length + 63:
        raise ValueError("digit stream too short")
    u = np.zeros(length, dtype=np.uint64)
    for j in range(64):
        u |= d[j:j + length] << np.uint64(63 - j)
    return u


def _terms(w, p, s, c):
    """c*sum p w/(1+w s) and c*sum p (w/(1+w s))^2 at the point ``s``."""
    q = w / (1.0 + w * s)
    return c * complex(np.dot(p, q)), c * complex(np.dot(p, q * q))


def _residual(z, s, a_int):
    return abs(z + 1.0 / s - a_int)


def _iterate(z, w, p, c, target, budget, s, trace):
    a_int, d_int = _terms(w, p, s, c)
    res = _residual(z, s, a_int)
    damping = 1.0
    prev_step = float("inf")
    grow = 0
    it = 0
    while True:
        if trace is not None:
            trace.append(res)
        if res <= target or it >= budget:
            return s, it, res
        it += 1

        deriv = -1.0 / (s * s) + d_int
        accepted = False
        if deriv != 0:
            delta = -(z + 1.0 / s - a_int) / deriv
            t = 1.0
            for _ in range(4):
                cand = s + t * delta
                if cand.imag > 0.0 and cmath.isfinite(cand):
                    a_c, d_c = _terms(w, p, cand, c)
                    res_c = _residual(z, cand, a_c)
                    if res_c < res:
                        s, a_int, d_int, res = cand, a_c, d_c, res_c
                        accepted = True
                        break
                t *= 0.5
        if accepted:
            continue

        step = damping * (-1.0 / (z - a_int) - s)
        cand = s + step
        if not (cand.imag > 0.0) or not cmath.isfinite(cand):
            damping = max(damping * 0.5, _MIN_DAMPING)
            continue
        size = abs(step)
        grow = grow + 1 if size > prev_step else 0
        if grow >= 2:
            damping = max(damping * 0.5, _MIN_DAMPING)
            grow = 0
        prev_step = size
        s = cand
        a_int, d_int = _terms(w, p, s, c)
        res = _residual(z, s, a_int)


def continuation_heights(v):
    """Imaginary parts visited on the way down to ``v``: 1, 1/4, ..., v."""
    heights = []
    h = 1.0
    while h > v:
        heights.append(h)
        h *= 0.25
    heights.append(v)
    return heights


def solve_one(z, w, p, c, tol, max_iter, s0=None, trace=None):
    """Solve for the companion transform at a single ``z``.

    Each iteration first tries a Newton step on
    ``R(s) = z + 1/s - c*sum(p*w/(1+w*s))`` with up to four halvings; the
    step is kept only if it stays in the upper half-plane and lowers
    ``|R|``.  Otherwise a damped fixed-point step
    ``s <- s + d*(-1/(z - c*sum(p*w/(1+w*s))) - s)`` is taken, with ``d``
    halved whenever the step would leave the upper half-plane or its size
    grows twice in a row.

    Without a warm start, points with ``Im z < 1`` are reached by
    continuation: the equation is solved at ``Re z + i*h`` for
    ``h = 1, 1/4, 1/16, ...`` and each solution seeds the next height.

    Returns ``(s, iterations, residual, status)``.  When ``trace`` is a
    list the residual of every iterate is appended to it.
    """
    z = complex(z)
    if s0 is None:
        heights = continuation_heights(z.imag)
        s = complex(-1.0 / complex(z.real, heights[0]))
    else:
        heights = [z.imag]
        s = complex(s0)
    used = 0
    res = float("inf")
    for k, h in enumerate(heights):
        zk = complex(z.real, h)
        last = k == len(heights) - 1
        target = tol * (1.0 + abs(zk)) if last else _STAGE_TOL
        s, it, res = _iterate(zk, w, p, c, target, max_iter - used, s, trace)
        used += it
    status = CONVERGED if res <= tol * (1.0 + abs(z)) else MAX_ITER
    return s, used, res, status


def solve_points(zs, w, p, c, tol, max_iter, s0=None):
    """Solve at every point of ``zs``; quadrature nodes ``w`` with weights ``p``."""
    zs = np.asarray(zs, dtype=np.complex128)
    w = np.asarray(w, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n = zs.shape[0]
    s_out = np.empty(n, dtype=np.complex128)
    iters = np.empty(n, dtype=np.int64)
    res = np.empty(n, dtype=np.float64)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        start = None if s0 is None else s0[i]
        s_out[i], iters[i], res[i], status[i] = solve_one(
            zs[i], w, p, float(c), float(tol), int(max_iter), start
        )
    return s_out, iters, res, status
