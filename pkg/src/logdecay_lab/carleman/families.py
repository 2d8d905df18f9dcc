"""Shipped test families for the Carleman checks (unit square unless noted)."""
from __future__ import annotations

from .symbolic import TestFunction, VectorField

POINTWISE_EXPRS = (
    "1 + x1 + I*x2",
    "x1*x2 + I*s",
    "s**2*x1 - x2**3 + I*(x1**2 - s*x2)",
    "(1 + s*x1*x2)*(2 - x1) + I*s*x2**2",
    "sin(s)*x1 + I*cos(x2)",
    "exp(I*(x1 - s))",
    "(1 + x1*x2 + s**2)*exp(I*(x1 - s))",
    "cos(pi*x2)*(1 + x1**2) + I*x1*sin(s)",
    "exp(s/2)*(x1 - x2) + I*s*exp(-x1)",
    "exp(x1*x2)*cos(s) + I*x1**3",
    "(s - x1)**3 + I*x1*(x2 - s)**2",
    "sin(2*x1 + s)*cos(x2 - s) + I*x2*exp(-s**2)",
)

VECTOR_FIELDS = (
    ("1", "0"),
    ("x2", "-x1"),
    ("x1", "x2"),
    ("s*x2", "x1**2"),
    ("x1*x2", "s - x2"),
    ("x1**2 - x2", "s**2"),
)

COEFFICIENTS = (
    None,
    [[2, 0], [0, 1]],
    [[2, 0.5], [0.5, 1]],
    [["2 + x1**2/4", "0"], ["0", "1"]],
)

# z satisfies the homogeneous Neumann condition on x1 = 0, x2 = 0, x2 = 1
GLOBAL_EXPRS = (
    "1 + x1**2",
    "(1 + x1**2)*exp(I*s)",
    "cos(pi*x2)*x1**2*(1 + I*s)",
    "exp(2*I*s)*(x1**3 - 3)",
    "cos(pi*x1/2)*cos(2*pi*x2)*exp(s/2)",
    "exp(x1**2)*(1 + I*x2**2*(3 - 2*x2))",
)


def pointwise_family(dim=2):
    return [TestFunction.from_complex(e, dim, name=f"z{i + 1}") for i, e in enumerate(POINTWISE_EXPRS)]


def identity_family():
    """Twelve ``(w, g, coeffs)`` cases cycling vector fields and coefficients."""
    ws = pointwise_family()
    return [
        (w, VectorField.from_exprs(VECTOR_FIELDS[i % len(VECTOR_FIELDS)]), COEFFICIENTS[i % len(COEFFICIENTS)])
        for i, w in enumerate(ws)
    ]


def global_family():
    return [TestFunction.from_complex(e, 2, name=f"g{i + 1}") for i, e in enumerate(GLOBAL_EXPRS)]
