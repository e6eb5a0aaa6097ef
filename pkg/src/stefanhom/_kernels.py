"""Compiled inner loops for the LCP solvers.

Stencil kernels operate on the constant-coefficient operator
``diag * U_i + off * sum(neighbours)`` restricted to a box window
``[lo, hi)`` per axis; nodes flagged ``fixed`` are never touched.
"""

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def psor_sweeps_2d(U, q, fixed, diag, off, omega, lo, hi, nsweep, redblack):
    inv = 1.0 / diag
    for _ in range(nsweep):
        if redblack:
            for color in range(2):
                for i in range(lo[0], hi[0]):
                    start = lo[1] + ((i + lo[1] + color) & 1)
                    for j in range(start, hi[1], 2):
                        if fixed[i, j]:
                            continue
                        r = q[i, j] - off * (U[i - 1, j] + U[i + 1, j] + U[i, j - 1] + U[i, j + 1])
                        x = U[i, j] + omega * (r * inv - U[i, j])
                        U[i, j] = x if x > 0.0 else 0.0
        else:
            for i in range(lo[0], hi[0]):
                for j in range(lo[1], hi[1]):
                    if fixed[i, j]:
                        continue
                    r = q[i, j] - off * (U[i - 1, j] + U[i + 1, j] + U[i, j - 1] + U[i, j + 1])
                    x = U[i, j] + omega * (r * inv - U[i, j])
                    U[i, j] = x if x > 0.0 else 0.0


@_jit
def residual_2d(U, q, fixed, diag, off, lo, hi):
    worst = 0.0
    for i in range(lo[0], hi[0]):
        for j in range(lo[1], hi[1]):
            if fixed[i, j]:
                continue
            w = diag * U[i, j] + off * (U[i - 1, j] + U[i + 1, j] + U[i, j - 1] + U[i, j + 1]) - q[i, j]
            c = abs(min(U[i, j], w))
            if c > worst:
                worst = c
    return worst


@_jit
def psor_sweeps_3d(U, q, fixed, diag, off, omega, lo, hi, nsweep, redblack):
    inv = 1.0 / diag
    for _ in range(nsweep):
        ncolor = 2 if redblack else 1
        for color in range(ncolor):
            for i in range(lo[0], hi[0]):
                for j in range(lo[1], hi[1]):
                    if redblack:
                        start = lo[2] + ((i + j + lo[2] + color) & 1)
                        stride = 2
                    else:
                        start = lo[2]
                        stride = 1
                    for k in range(start, hi[2], stride):
                        if fixed[i, j, k]:
                            continue
                        s = (U[i - 1, j, k] + U[i + 1, j, k] + U[i, j - 1, k]
                             + U[i, j + 1, k] + U[i, j, k - 1] + U[i, j, k + 1])
                        x = U[i, j, k] + omega * ((q[i, j, k] - off * s) * inv - U[i, j, k])
                        U[i, j, k] = x if x > 0.0 else 0.0


@_jit
def residual_3d(U, q, fixed, diag, off, lo, hi):
    worst = 0.0
    for i in range(lo[0], hi[0]):
        for j in range(lo[1], hi[1]):
            for k in range(lo[2], hi[2]):
                if fixed[i, j, k]:
                    continue
                s = (U[i - 1, j, k] + U[i + 1, j, k] + U[i, j - 1, k]
                     + U[i, j + 1, k] + U[i, j, k - 1] + U[i, j, k + 1])
                w = diag * U[i, j, k] + off * s - q[i, j, k]
                c = abs(min(U[i, j, k], w))
                if c > worst:
                    worst = c
    return worst


@_jit
def psor_dense(M, q, x, omega, tol, maxit, scale):
    """Projected SOR on an explicit matrix; returns (sweeps, residual)."""
    n = q.size
    res = np.inf
    for it in range(1, maxit + 1):
        for i in range(n):
            r = q[i]
            for j in range(n):
                if j != i:
                    r -= M[i, j] * x[j]
            y = x[i] + omega * (r / M[i, i] - x[i])
            x[i] = y if y > 0.0 else 0.0
        res = 0.0
        for i in range(n):
            w = -q[i]
            for j in range(n):
                w += M[i, j] * x[j]
            c = abs(min(x[i], w))
            if c > res:
                res = c
        if res <= tol * scale:
            return it, res
    return maxit, res


@_jit
def psor_tridiag(lower, diag, upper, q, x, omega, tol, maxit, scale):
    n = q.size
    res = np.inf
    for it in range(1, maxit + 1):
        for i in range(n):
            r = q[i]
            if i > 0:
                r -= lower[i] * x[i - 1]
            if i < n - 1:
                r -= upper[i] * x[i + 1]
            y = x[i] + omega * (r / diag[i] - x[i])
            x[i] = y if y > 0.0 else 0.0
        if it % 10 == 0 or it == maxit:
            res = tridiag_residual(lower, diag, upper, q, x)
            if res <= tol * scale:
                return it, res
    return maxit, res


@_jit
def tridiag_residual(lower, diag, upper, q, x):
    n = q.size
    worst = 0.0
    for i in range(n):
        w = diag[i] * x[i] - q[i]
        if i > 0:
            w += lower[i] * x[i - 1]
        if i < n - 1:
            w += upper[i] * x[i + 1]
        c = abs(min(x[i], w))
        if c > worst:
            worst = c
    return worst


@_jit
def tridiag_lcp_direct(lower, diag, upper, q, x):
    """Brennan-Schwartz elimination for a tridiagonal M-matrix LCP.

    Exact when the solution is positive on a leading block ``[0, k)`` and zero
    on ``[k, n)``; callers must verify the residual afterwards.
    """
    n = q.size
    d = np.empty(n)
    r = np.empty(n)
    d[0] = diag[0]
    r[0] = q[0]
    for i in range(1, n):
        w = lower[i] / d[i - 1]
        d[i] = diag[i] - w * upper[i - 1]
        r[i] = q[i] - w * r[i - 1]
    y = r[n - 1] / d[n - 1]
    x[n - 1] = y if y > 0.0 else 0.0
    for i in range(n - 2, -1, -1):
        y = (r[i] - upper[i] * x[i + 1]) / d[i]
        x[i] = y if y > 0.0 else 0.0


@_jit
def rk4_radial_front(a, b, A, L, n, dt, nsteps, record_every):
    """Integrate L R^{n-1} R' = rate(R) with classical RK4.

    Returns (times, radii, failed_step); failed_step >= 0 marks the first
    step whose increment exceeded R/10.
    """
    nrec = nsteps // record_every + 1
    ts = np.empty(nrec)
    rs = np.empty(nrec)
    ts[0] = 0.0
    rs[0] = b
    R = b
    k = 1
    for s in range(1, nsteps + 1):
        k1 = _front_speed(R, a, A, L, n)
        k2 = _front_speed(R + 0.5 * dt * k1, a, A, L, n)
        k3 = _front_speed(R + 0.5 * dt * k2, a, A, L, n)
        k4 = _front_speed(R + dt * k3, a, A, L, n)
        dR = dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not dR <= 0.1 * R:
            return ts[:k], rs[:k], s
        R += dR
        if s % record_every == 0:
            ts[k] = s * dt
            rs[k] = R
            k += 1
    return ts[:k], rs[:k], -1


@_jit
def _front_speed(R, a, A, L, n):
    if R <= a:
        return np.inf
    if n == 2:
        return A / (L * R * np.log(R / a))
    an = a ** (2.0 - n)
    return (n - 2.0) * A * an / (L * R ** (n - 1.0) * (an - R ** (2.0 - n)))
