"""Independent reference values used by the tests."""
import mpmath
import numpy as np


def tanh_roots(a, kmax):
    """Roots of ``tanh(lambda) = -a`` near ``i k pi`` (a < 1), found by complex Newton.

    For the interval ``[0, 1]`` with Neumann left end and damping ``a`` at
    the right end, ``u = cosh(lambda x)`` turns the boundary line into
    ``lambda (sinh lambda + a cosh lambda) = 0``.
    """
    f = lambda z: mpmath.sinh(z) + a * mpmath.cosh(z)  # noqa: E731
    roots = []
    for k in range(-kmax, kmax + 1):
        z = mpmath.findroot(f, mpmath.mpc(-0.5, k * np.pi), tol=1e-30)
        roots.append(complex(z))
    return np.array(roots)


def discrete_1d_eigenvalues(n, a):
    """Eigenvalues of the 1D generator, assembled from scratch and solved by LAPACK.

    Independent of both the package assembly and its in-repo QR.
    """
    h = 1.0 / (n - 1)
    m = np.full(n, h)
    m[[0, -1]] = h / 2
    K = np.zeros((n, n))
    for i in range(n - 1):
        K[i, i] += 1 / h
        K[i + 1, i + 1] += 1 / h
        K[i, i + 1] -= 1 / h
        K[i + 1, i] -= 1 / h
    b = np.zeros(n)
    b[-1] = a
    P = -K / m[:, None]
    A = np.block([[np.zeros((n, n)), np.eye(n)], [P, -np.diag(b / m)]])
    return np.linalg.eigvals(A)
