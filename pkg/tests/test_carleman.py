import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from logdecay_lab import CoefficientField, DampingProfile, assemble_generator, build_rectangle, solve_resolvent
from logdecay_lab.carleman import (
    CarlemanWeight,
    ExtensionTriple,
    ManufacturedTriple,
    NormSet,
    SpaceTimeGrid,
    TestFunction,
    VectorField,
    build_weight,
    carleman_terms,
    check_derivative_table,
    check_global_estimate,
    check_multiplier_identity,
    check_pointwise_estimate,
    check_psi_dual,
    cutoff,
    elliptic_extension,
    global_family,
    identity_family,
    minimal_constant,
    pointwise_family,
    weight_profile,
)
from logdecay_lab.carleman.symbolic import S, X_SYMBOLS
from logdecay_lab.errors import InconsistencyError, ProfileError, WeightInvalidError

SQ = build_rectangle(11, 11, 1.0, 1.0, "right")
GRID = SpaceTimeGrid.uniform(11, SQ)
PSI = build_weight(SQ, (1.0, 0.0), 0.1)
x1, x2 = X_SYMBOLS


# ---------------------------------------------------------------- symbolic

def test_jets_match_sympy():
    z = TestFunction.from_complex("exp(I*(x1 - s))*(1 + x2**2)", 2)
    pts = np.array([[0.3, 0.2, 0.7], [-1.1, 0.9, 0.1]])
    jets = z.jets(pts, 2)
    zr = sp.cos(x1 - S) * (1 + x2**2)
    ref = sp.lambdify((S, x1, x2), sp.diff(zr, S, x2), "numpy")
    np.testing.assert_allclose(jets[(1, 0, 1)][0], ref(*pts.T), rtol=1e-14)
    e_h, e_h2 = z.fd_self_check(pts)
    assert e_h / e_h2 == pytest.approx(4.0, rel=0.1)


def test_vector_field_must_be_polynomial():
    VectorField.from_exprs(("x2", "-x1"))
    with pytest.raises(ValueError):
        VectorField.from_exprs(("sin(x1)", "0"))


def test_grid_masks():
    assert GRID.points.shape == (11 * SQ.n_nodes, 3)
    assert GRID.X.all()
    assert GRID.Y.sum() == SQ.n_nodes * np.sum(np.abs(GRID.s_nodes) < 1)
    assert GRID.Z.sum() == 11 * len(SQ.damped_nodes)


# ---------------------------------------------------------------- weight

def test_build_weight_accepts_right_edge():
    assert PSI.values.min() == pytest.approx(0.1)
    assert PSI.sup == pytest.approx(1.1)
    np.testing.assert_allclose(PSI(SQ.nodes), PSI.values)


@pytest.mark.parametrize("kwargs, condition", [
    ({"direction": (1.0, 0.0), "offset": -0.1}, "positivity"),
    ({"direction": (0.0, 0.0)}, "gradient"),
    ({"direction": (0.0, 1.0)}, "conormal"),
])
def test_build_weight_rejections(kwargs, condition):
    with pytest.raises(WeightInvalidError) as info:
        build_weight(SQ, **kwargs)
    assert info.value.condition == condition


def test_build_weight_conormal_with_anisotropic_coefficients():
    # a e1 = (2, 0.5) has a positive normal component on the top edge
    a = CoefficientField.constant(SQ, [[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(WeightInvalidError) as info:
        build_weight(SQ, (1.0, 0.0), coeffs=a)
    assert info.value.condition == "conormal"


def test_profile_values_at_mu_one():
    # derived directly from the closed forms
    b = np.sqrt(2 + np.log(2 + np.e))
    b0 = np.sqrt(b**2 - 1 - np.log(1 + np.e))
    p = weight_profile(1.0, PSI, reading="sup", raise_on_failure=False)
    assert p.b == pytest.approx(b, abs=1e-12) and p.b == pytest.approx(1.88452, abs=1e-5)
    assert p.b0 == pytest.approx(b0, abs=1e-12) and p.b0 == pytest.approx(1.11274, abs=1e-5)


def test_sup_reading_violates_outer_bound_by_mu_times_one_minus_min():
    # analytic excess of the outer exponent: mu (1 - min psi_hat / |psi_hat|)
    mu = 3.0
    p = weight_profile(mu, PSI, reading="sup", raise_on_failure=False)
    assert p.ordered and p.inner_bound and not p.outer_bound
    excess = np.log(p.phi_outer_max) - np.log1p(np.exp(mu))
    assert excess == pytest.approx(mu * (1 - p.psi_min), rel=1e-9)
    with pytest.raises(ProfileError):
        weight_profile(mu, PSI, reading="sup")


@settings(max_examples=30, deadline=None)
@given(st.floats(0.7, 40.0))
def test_min_reading_certifies(mu):
    p = weight_profile(mu, PSI, reading="min")
    assert p.certified and 1 < p.b0 < p.b <= 2
    assert p.phi_inner_min == pytest.approx(2 + np.exp(mu), rel=1e-9)
    assert p.phi_outer_max == pytest.approx(1 + np.exp(mu), rel=1e-9)


def test_profile_rejects_small_mu():
    with pytest.raises(ValueError):
        weight_profile(0.5, PSI)


def test_cutoff():
    b0, b = 1.2, 1.8
    s = np.linspace(-2, 2, 401)
    c = cutoff(s, b0, b)
    assert np.all(c[np.abs(s) <= b0] == 1) and np.all(c[np.abs(s) >= b] == 0)
    assert np.all((0 <= c) & (c <= 1))
    h = 1e-5
    t = np.array([-1.5, 1.3, 1.7])
    np.testing.assert_allclose(cutoff(t, b0, b, 1), (cutoff(t + h, b0, b) - cutoff(t - h, b0, b)) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(cutoff(t, b0, b, 2),
                               (cutoff(t + h, b0, b, 1) - cutoff(t - h, b0, b, 1)) / (2 * h), rtol=1e-5)


def test_weight_and_derivative_table():
    w = CarlemanWeight(PSI, 2.0, 3.0)
    pts = GRID.points[::37]
    ell = w.ell_jets(pts, 0)[(0, 0, 0)]
    psi = -(0.1 + pts[:, 1]) / 1.1 + w.b**2 - pts[:, 0] ** 2
    np.testing.assert_allclose(ell, 3.0 * np.exp(2.0 * psi), rtol=1e-13)
    exact = w.ell_jets(pts, 2)
    for idx, val in w.derivative_table(pts).items():
        np.testing.assert_allclose(val, exact[idx], rtol=1e-12, atol=1e-12 * np.abs(ell).max())
    for idx, (e_h, e_h2, e_r) in check_derivative_table(w, pts).items():
        assert e_h / max(e_h2, 1e-300) == pytest.approx(4.0, rel=0.2) or e_h < 1e-9
        assert e_r <= e_h2


# ---------------------------------------------------------------- pointwise

@pytest.mark.parametrize("mu, lam", [(2.0, 3.0), (2.0, 30.0), (8.0, 3.0), (8.0, 30.0)])
def test_psi_dual_routes(mu, lam):
    assert check_psi_dual(CarlemanWeight(PSI, mu, lam), GRID.points) <= 1e-9


def test_pointwise_gap_family_small_grid():
    w = CarlemanWeight(PSI, 8.0, 30.0)
    for z in pointwise_family():
        r = check_pointwise_estimate(z, w, GRID)
        assert r.relative_gap >= -1e-6
        assert r.identity_defect <= 1e-12
        assert r.psi_dual_error <= 1e-9


def test_pointwise_without_psi_ss_term_is_not_an_identity():
    w = CarlemanWeight(PSI, 2.0, 3.0)
    z = TestFunction.from_complex("(1 + x1*x2 + s**2)*exp(I*(x1 - s))", 2)
    r = check_pointwise_estimate(z, w, GRID)
    assert abs(r.min_gap_printed - r.min_gap) > 1e-2 * abs(r.min_gap)


def test_pointwise_zero_function():
    w = CarlemanWeight(PSI, 2.0, 3.0)
    r = check_pointwise_estimate(TestFunction.from_complex("0", 2), w, GRID)
    assert r.min_gap == 0 and r.scale == 0


def test_single_point_terms():
    w = CarlemanWeight(PSI, 2.0, 3.0)
    z = TestFunction.from_complex("x1 + I*s", 2)
    t = carleman_terms(w, (0.2, 0.4, 0.6), z)
    assert t.dual_error <= 1e-9
    assert t.lhs - t.rhs >= -1e-12 * abs(t.lhs)
    small = carleman_terms(CarlemanWeight(PSI, 1.0, 1.5), (1.9, 0.4, 0.6), z)
    assert small.full("Psi") == pytest.approx(np.exp(2 * small.log_theta) * small.Psi, rel=1e-14)
    big = CarlemanWeight(PSI, 8.0, 30.0)
    with pytest.raises(OverflowError):
        carleman_terms(big, (0.0, 0.0, 0.5), z).full("lhs")


def test_pointwise_field_output():
    w = CarlemanWeight(PSI, 2.0, 3.0)
    r = check_pointwise_estimate(pointwise_family()[1], w, GRID, return_field=True)
    assert r.gap_field.shape == (r.n_points,)
    assert r.gap_field.min() == pytest.approx(r.relative_gap)


# ---------------------------------------------------------------- identity

def test_identity_constant_w():
    r = check_multiplier_identity(TestFunction.from_complex("3 + 2*I", 2), VectorField.from_exprs(("x2", "-x1")), GRID)
    assert r.max_residual == 0 and r.max_abs_lhs == 0


def test_identity_linear_w():
    r = check_multiplier_identity(TestFunction.from_complex("x1", 2), VectorField.from_exprs(("1", "0")), GRID)
    assert r.max_residual <= 1e-12


def test_identity_rotation_field_anisotropic():
    w = TestFunction.from_complex("exp(I*s)*(x1**2 + I*x2)", 2)
    r = check_multiplier_identity(w, VectorField.from_exprs(("x2", "-x1")), GRID, [[2, 0], [0, 1]])
    assert r.max_residual <= 1e-10 and r.max_abs_lhs > 1


def test_identity_symbolic_oracle():
    # fully symbolic LHS - RHS for one member, independent of the jet machinery
    w = sp.exp(sp.I * S) * (x1**2 + sp.I * x2)
    g = (x2, -x1)
    a = sp.diag(2, 1)
    xs = (x1, x2)
    wb = sp.conjugate(w)
    grad = [sp.diff(w, x) for x in xs]
    gradb = [sp.diff(wb, x) for x in xs]
    ggw = sum(gi * d for gi, d in zip(g, grad))
    ggwb = sum(gi * d for gi, d in zip(g, gradb))
    Q = sp.diff(w, S) * sp.diff(wb, S) + sum(a[j, k] * grad[j] * gradb[k] for j in range(2) for k in range(2))
    lhs = -sum(sp.diff(sum(a[j, k] * (grad[j] * ggwb + gradb[j] * ggw) for j in range(2)) - g[k] * Q, xs[k])
               for k in range(2))
    Pw = sp.diff(w, S, 2) + sum(sp.diff(a[j, k] * grad[j], xs[k]) for j in range(2) for k in range(2))
    rhs = (-(Pw * ggwb + sp.conjugate(Pw) * ggw) + sp.diff(sp.diff(w, S) * ggwb + sp.diff(wb, S) * ggw, S)
           + sum(sp.diff(gi, x) for gi, x in zip(g, xs)) * sp.diff(w, S) * sp.diff(wb, S)
           + sum(grad[j] * gradb[k] * sum(sp.diff(a[j, k] * g[m], xs[m]) for m in range(2))
                 for j in range(2) for k in range(2))
           - sum(a[j, k] * sp.diff(g[l], xs[k]) * (grad[j] * gradb[l] + gradb[j] * grad[l])
                 for j in range(2) for k in range(2) for l in range(2)))
    assert sp.simplify(sp.expand(lhs - rhs)) == 0


def test_identity_printed_grouping_fails():
    w = TestFunction.from_complex("exp(I*s)*(x1**2 + I*x2)", 2)
    g = VectorField.from_exprs(("s*x2", "x1**2"))
    r = check_multiplier_identity(w, g, GRID, printed=True)
    assert r.max_residual > 1e-3


def test_identity_family_on_11_cubed():
    assert max(check_multiplier_identity(w, g, GRID, a).max_residual for w, g, a in identity_family()) <= 1e-10


# ---------------------------------------------------------------- extension and global estimate

GEN = assemble_generator(build_rectangle(9, 9, 1.0, 1.0, "right"), None,
                         DampingProfile.constant(build_rectangle(9, 9, 1.0, 1.0, "right"), 1.0))
GGRID = SpaceTimeGrid.uniform(9, GEN.domain)


def test_extension_zero():
    z = np.zeros(GEN.N)
    ext = elliptic_extension(z, 1 + 1j, GGRID, GEN, z, z)
    assert not ext.z.any() and ext.residual == 0


@settings(max_examples=10, deadline=None)
@given(re=st.floats(-1, 1), im=st.floats(-6, 6), seed=st.integers(0, 2**16))
def test_extension_consistent_with_solve(re, im, seed):
    lam = complex(re, im) + 0.05
    f = np.random.default_rng(seed).standard_normal(2 * GEN.N)
    from logdecay_lab import ResolventSolver

    s = ResolventSolver(GEN, lam)
    u = s.solve(f)
    ext = elliptic_extension(u.u0, lam, GGRID, GEN, f[: GEN.N], f[GEN.N:], s.last_residual)
    assert ext.residual <= 10 * max(s.last_residual, np.finfo(float).eps)


def test_extension_residual_linear_in_perturbation(rng):
    lam = 0.4 + 2j
    f = rng.standard_normal(2 * GEN.N)
    u = solve_resolvent(GEN, lam, f).u0
    d = rng.standard_normal(GEN.N)
    r1 = elliptic_extension(u + 1e-4 * d, lam, GGRID, GEN, f[: GEN.N], f[GEN.N:]).residual
    r2 = elliptic_extension(u + 2e-4 * d, lam, GGRID, GEN, f[: GEN.N], f[GEN.N:]).residual
    assert r2 / r1 == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(InconsistencyError):
        elliptic_extension(u + 1e-4 * d, lam, GGRID, GEN, f[: GEN.N], f[GEN.N:], solve_residual=1e-14)


def test_manufactured_norms_closed_form():
    # z = 1 + x1^2: |z|_H1(Y)^2 = 2 (28/15 + 4/3), z0 = 2, z1 = 2 on x1 = 1, z = 2 there
    t = ManufacturedTriple(TestFunction.from_complex("1 + x1**2", 2), SQ)
    n = t.norms()
    assert n.h1_Y == pytest.approx(np.sqrt(6.4), rel=1e-12)
    assert n.h1_X == pytest.approx(np.sqrt(12.8), rel=1e-12)
    assert n.z0_X == pytest.approx(4.0, rel=1e-12)
    assert n.z1_Sigma == pytest.approx(4.0, rel=1e-12)
    assert n.z_Z == pytest.approx(4.0, rel=1e-12)
    assert n.zs_Z == 0


def test_manufactured_requires_neumann():
    with pytest.raises(InconsistencyError):
        ManufacturedTriple(TestFunction.from_complex("x2", 2), SQ).norms()


def test_minimal_constant_solves_equation():
    n = NormSet(3.0, 0.5, 0.2, 0.1, 0.0, 4.0)
    for eps in (0.25, 1.0, 2.0):
        C = minimal_constant(n, eps)
        rhs = C * np.exp(C * eps) * n.data + C * np.exp(-2 / eps) * n.h1_X
        assert rhs == pytest.approx(n.h1_Y, rel=1e-10)
    assert minimal_constant(NormSet(0, 0, 0, 0, 0, 0), 1.0) == 0.0


def test_global_zero_function_and_family():
    zero = ManufacturedTriple(TestFunction.from_complex("0", 2), SQ, name="zero")
    rep = check_global_estimate([zero], None, [0.5, 1.0])
    assert rep.C_min == [0.0, 0.0] and not rep.flagged
    fam = [ManufacturedTriple(z, SQ) for z in global_family()]
    rep = check_global_estimate(fam, None, [0.25, 0.5, 1.0, 2.0])
    assert all(np.isfinite(rep.C_min)) and not rep.flagged
    assert len(rep.table()) == 4


def test_global_extension_triple():
    lam = -0.3 + 0.7j
    f = np.random.default_rng(5).standard_normal(2 * GEN.N)
    u = solve_resolvent(GEN, lam, f).u0
    ext = elliptic_extension(u, lam, GGRID, GEN, f[: GEN.N], f[GEN.N:])
    n = ExtensionTriple(ext).norms()
    # s-integral of |e^{i lam s}|^2 over (-1, 1) in closed form
    e_y = np.sinh(2 * abs(lam.imag)) / abs(lam.imag)
    h1 = e_y * ((1 + abs(lam) ** 2) * np.sum(GEN.mass * abs(u) ** 2) + np.real(np.vdot(u, GEN.K_h1 @ u)))
    assert n.h1_Y == pytest.approx(np.sqrt(h1), rel=1e-10)
    rep = check_global_estimate([ExtensionTriple(ext)], None, [0.5, 1.0])
    assert all(np.isfinite(rep.C_min))
