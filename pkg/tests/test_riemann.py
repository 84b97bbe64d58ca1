"""Codomain Riemannian geometry: Christoffel symbols, curvature wiring via the
Ricci identity, covariant derivative of curvature, and constant-curvature
model spaces."""

import numpy as np
import pytest

from finvar import expressions as ex
from finvar import riemann as rm
from finvar.errors import ConfigError, SingularMetricError


def _generic_metric(dim=2):
    """A smooth positive-definite 2x2 metric with no special symmetry."""
    coords = [f"x{i + 1}" for i in range(dim)]
    g11 = "2 + sin(x1)*cos(x2)/2"
    g12 = "x1*x2/4"
    g22 = "2 + exp(x1/3)/2 + x2^2/5"
    return rm.RiemannStructure(
        dim,
        [[ex.parse(g11, coords), ex.parse(g12, coords)],
         [ex.parse(g12, coords), ex.parse(g22, coords)]])


def _cov_deriv(rs, z_asts, x):
    """(D_c Z)^a = d_c Z^a + gamma^a_bc Z^b evaluated exactly at x."""
    n = rs.dim
    env = {rs.coords[i]: x[i] for i in range(n)}
    gamma = rm.christoffel(rs, x)
    z = np.array([ex.evaluate(z_asts[a], env) for a in range(n)])
    dz = np.array([[ex.evaluate(ex.differentiate(z_asts[a], rs.coords[c]), env)
                    for a in range(n)] for c in range(n)])
    return np.array([[dz[c][a] + sum(gamma[a][b][c] * z[b] for b in range(n))
                      for a in range(n)] for c in range(n)])


def test_euclidean_is_flat():
    rs = rm.RiemannStructure.euclidean(3)
    x = np.array([0.4, -0.2, 0.9])
    assert np.allclose(rm.christoffel(rs, x), 0.0)
    field = rm.curvature(rs, x)
    assert np.allclose(field.riemann, 0.0)
    assert np.allclose(field.nabla, 0.0)


def test_ricci_identity_fixes_curvature_wiring():
    # commuting two covariant derivatives of a vector field must reproduce
    # riem_apply; the second derivative is taken by finite differences of the
    # exact first covariant derivative
    rs = _generic_metric()
    n = rs.dim
    coords = list(rs.coords)
    z_asts = [ex.parse("sin(x1) + x2^2/3", coords), ex.parse("x1*x2 - cos(x2)", coords)]
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(5):
        x = rng.uniform(-0.7, 0.7, size=n)
        env = {coords[i]: x[i] for i in range(n)}
        gamma = rm.christoffel(rs, x)
        riem = rm.curvature(rs, x).riemann
        z = np.array([ex.evaluate(z_asts[a], env) for a in range(n)])
        covd = _cov_deriv(rs, z_asts, x)

        def second(r, c):
            # (D_r D_c Z)^a = d_r (D_c Z)^a + gamma^a_hr (D_c Z)^h
            #                 - gamma^h_cr (D_h Z)^a
            up = x.copy(); up[r] += h
            dn = x.copy(); dn[r] -= h
            plain = (_cov_deriv(rs, z_asts, up)[c] - _cov_deriv(rs, z_asts, dn)[c]) / (2 * h)
            return np.array([plain[a]
                             + sum(gamma[a][hh][r] * covd[c][hh] for hh in range(n))
                             - sum(gamma[hh][c][r] * covd[hh][a] for hh in range(n))
                             for a in range(n)])

        for r in range(n):
            for c in range(n):
                commutator = second(r, c) - second(c, r)
                e_r = np.eye(n)[r]
                e_c = np.eye(n)[c]
                expected = np.array(rm.riem_apply(riem, e_r, e_c, z, n))
                assert np.allclose(commutator, expected, atol=5e-7), (r, c)


def test_sphere_sectional_curvature_is_inverse_radius_squared():
    rng = np.random.default_rng(3)
    for radius in (1.0, 2.0):
        rs = rm.RiemannStructure.sphere(2, radius=radius)
        for _ in range(4):
            x = rng.uniform(-0.8, 0.8, size=2)
            v = rng.uniform(-1, 1, size=2)
            w = rng.uniform(-1, 1, size=2)
            K = rm.sectional_curvature(rs, x, v, w)
            assert K == pytest.approx(1.0 / radius ** 2, rel=1e-9)


def test_hyperbolic_plane_has_curvature_minus_one():
    src = "4/(1 - x1^2 - x2^2)^2"
    rs = rm.RiemannStructure.custom([[src, "0"], ["0", src]], 2)
    rng = np.random.default_rng(5)
    for _ in range(4):
        x = rng.uniform(-0.4, 0.4, size=2)
        K = rm.sectional_curvature(rs, x, [1.0, 0.3], [-0.2, 1.0])
        assert K == pytest.approx(-1.0, rel=1e-9)


def test_sphere_curvature_is_parallel():
    # round spheres are locally symmetric: nabla R = 0
    rs = rm.RiemannStructure.sphere(2, radius=1.5)
    field = rm.curvature(rs, [0.3, -0.6])
    scale = np.abs(field.riemann).max()
    assert np.abs(field.nabla).max() <= 1e-9 * max(1.0, scale)


def test_second_bianchi_identity():
    rs = _generic_metric()
    n = rs.dim
    rng = np.random.default_rng(11)
    for _ in range(4):
        x = rng.uniform(-0.7, 0.7, size=n)
        nabla = rm.curvature(rs, x).nabla
        for m in range(n):
            for b in range(n):
                for a in range(n):
                    for c in range(n):
                        for d in range(n):
                            cyc = (nabla[m][b][a][c][d]
                                   + nabla[c][b][a][d][m]
                                   + nabla[d][b][a][m][c])
                            assert abs(cyc) < 1e-10


def test_nabla_curvature_against_finite_differences():
    # plain FD of the curvature components plus the four Christoffel
    # corrections is an independent route to nabla R
    rs = _generic_metric()
    n = rs.dim
    x = np.array([0.35, -0.55])
    gamma = rm.christoffel(rs, x)
    field = rm.curvature(rs, x)
    h = 1e-5
    for m in range(n):
        up = x.copy(); up[m] += h
        dn = x.copy(); dn[m] -= h
        dR = (rm.curvature(rs, up).riemann - rm.curvature(rs, dn).riemann) / (2 * h)
        riem = field.riemann
        for b in range(n):
            for a in range(n):
                for c in range(n):
                    for d in range(n):
                        corr = sum(gamma[a][m][hh] * riem[b][hh][c][d]
                                   - gamma[hh][m][b] * riem[hh][a][c][d]
                                   - gamma[hh][m][c] * riem[b][a][hh][d]
                                   - gamma[hh][m][d] * riem[b][a][c][hh]
                                   for hh in range(n))
                        expected = dR[b][a][c][d] + corr
                        assert field.nabla[m][b][a][c][d] == pytest.approx(
                            expected, rel=1e-6, abs=1e-6)


def test_riem_apply_antisymmetry_in_operator_arguments():
    rs = _generic_metric()
    riem = rm.curvature(rs, [0.2, 0.5]).riemann
    rng = np.random.default_rng(13)
    u, w, z = rng.uniform(-1, 1, size=(3, 2))
    forward = np.array(rm.riem_apply(riem, u, w, z, 2))
    backward = np.array(rm.riem_apply(riem, w, u, z, 2))
    assert np.allclose(forward, -backward, atol=1e-12)


def test_partials_routes_agree():
    rs = _generic_metric()
    x = [0.25, -0.4]
    env = {rs.coords[i]: x[i] for i in range(2)}
    via_ast = rs.partials_at(env, 3)
    via_jets = rs.partials_from_jets(x, 3)
    assert np.allclose(np.array(via_ast.d0, dtype=float), np.array(via_jets.d0, dtype=float))
    assert np.allclose(np.array(via_ast.d1, dtype=float), np.array(via_jets.d1, dtype=float),
                       atol=1e-12)
    assert np.allclose(np.array(via_ast.d2, dtype=float), np.array(via_jets.d2, dtype=float),
                       atol=1e-12)
    assert np.allclose(np.array(via_ast.d3, dtype=float), np.array(via_jets.d3, dtype=float),
                       atol=1e-11)


def test_custom_metric_must_be_symmetric():
    with pytest.raises(ConfigError):
        rm.RiemannStructure.custom([["1 + x2^2", "x1"], ["0", "1"]], 2)


def test_custom_metric_must_be_positive_definite():
    with pytest.raises(ConfigError):
        rm.RiemannStructure.custom([["x1", "0"], ["0", "1"]], 2)


def test_degenerate_plane_rejected():
    rs = rm.RiemannStructure.sphere(2)
    with pytest.raises(SingularMetricError):
        rm.sectional_curvature(rs, [0.1, 0.2], [1.0, 2.0], [2.0, 4.0])
