"""Dense nonsymmetric eigenvalues: balancing, Householder Hessenberg
reduction and Francis double-shift QR.

The kernels are compiled with numba and operate in place on C-ordered
float64 arrays.
"""
import numpy as np
from numba import njit

RADIX = 2.0


@njit(cache=True)
def _balance(a):
    n = a.shape[0]
    sqrdx = RADIX * RADIX
    scale = np.ones(n)
    done = False
    while not done:
        done = True
        for i in range(n):
            c = 0.0
            r = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= RADIX
                    c *= sqrdx
                g = r * RADIX
                while c > g:
                    f /= RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    scale[i] *= f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f
    return scale


@njit(cache=True)
def _hessenberg(a):
    n = a.shape[0]
    v = np.empty(n)
    w = np.empty(n)
    for k in range(n - 2):
        m = n - k - 1
        norm = 0.0
        for i in range(m):
            v[i] = a[k + 1 + i, k]
            norm += v[i] * v[i]
        norm = np.sqrt(norm)
        if norm == 0.0:
            continue
        alpha = -norm if v[0] >= 0.0 else norm
        v[0] -= alpha
        vnorm = 0.0
        for i in range(m):
            vnorm += v[i] * v[i]
        if vnorm == 0.0:
            continue
        beta = 2.0 / vnorm
        # left: rows k+1.., columns k..
        for j in range(k, n):
            w[j] = 0.0
        for i in range(m):
            vi = v[i]
            if vi != 0.0:
                row = k + 1 + i
                for j in range(k, n):
                    w[j] += vi * a[row, j]
        for i in range(m):
            vi = beta * v[i]
            if vi != 0.0:
                row = k + 1 + i
                for j in range(k, n):
                    a[row, j] -= vi * w[j]
        # right: all rows, columns k+1..
        for r in range(n):
            dot = 0.0
            for i in range(m):
                dot += a[r, k + 1 + i] * v[i]
            dot *= beta
            if dot != 0.0:
                for i in range(m):
                    a[r, k + 1 + i] -= dot * v[i]
        a[k + 1, k] = alpha
        for i in range(k + 2, n):
            a[i, k] = 0.0


@njit(cache=True)
def _hqr(a, maxit):
    """Eigenvalues of an upper Hessenberg matrix (destroyed on exit).

    Returns (wr, wi, nfail) where nfail counts eigenvalues left
    unconverged after ``maxit`` iterations on one deflation window;
    unconverged entries are NaN.
    """
    n = a.shape[0]
    wr = np.full(n, np.nan)
    wi = np.full(n, np.nan)
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i, j])
    nn = n - 1
    t = 0.0
    its = 0
    p = q = r = s = w = x = y = z = 0.0
    while nn >= 0:
        l = nn
        while l >= 1:
            s = abs(a[l - 1, l - 1]) + abs(a[l, l])
            if s == 0.0:
                s = anorm
            if abs(a[l, l - 1]) + s == s:
                a[l, l - 1] = 0.0
                break
            l -= 1
        x = a[nn, nn]
        if l == nn:
            wr[nn] = x + t
            wi[nn] = 0.0
            nn -= 1
            its = 0
            continue
        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = np.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + (z if p >= 0.0 else -z)
                wr[nn - 1] = x + z
                wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
                wi[nn - 1] = 0.0
                wi[nn] = 0.0
            else:
                wr[nn - 1] = x + p
                wr[nn] = x + p
                wi[nn - 1] = -z
                wi[nn] = z
            nn -= 2
            its = 0
            continue
        if its == maxit:
            return wr, wi, nn + 1
        if its == 10 or its == 20:
            t += x
            for i in range(nn + 1):
                a[i, i] -= x
            s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
            x = 0.75 * s
            y = x
            w = -0.4375 * s * s
        its += 1
        m = nn - 2
        while m >= l:
            z = a[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
            q = a[m + 1, m + 1] - z - r - s
            r = a[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(a[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
            if u + v == v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            a[i, i - 2] = 0.0
            if i != m + 2:
                a[i, i - 3] = 0.0
        for k in range(m, nn):
            if k != m:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = 0.0
                if k != nn - 1:
                    r = a[k + 2, k - 1]
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = np.sqrt(p * p + q * q + r * r)
            if p < 0.0:
                s = -s
            if s != 0.0:
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return wr, wi, 0


def hessenberg(a):
    """Return an upper Hessenberg matrix similar to ``a``."""
    h = np.array(a, dtype=np.float64, order="C", copy=True)
    _hessenberg(h)
    return h


def eigvals_real(a, balance=True, maxit=30):
    """All eigenvalues of a real square matrix.

    Returns
    -------
    eigenvalues : complex ndarray
    n_unconverged : int
        Zero on success; otherwise the number of eigenvalues still in the
        unreduced window when the iteration limit was hit (those are NaN).
    """
    h = np.array(a, dtype=np.float64, order="C", copy=True)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    if h.shape[0] == 0:
        return np.empty(0, dtype=complex), 0
    if h.shape[0] == 1:
        return h[0].astype(complex), 0
    if balance:
        _balance(h)
    _hessenberg(h)
    wr, wi, nfail = _hqr(h, maxit)
    return wr + 1j * wi, int(nfail)
