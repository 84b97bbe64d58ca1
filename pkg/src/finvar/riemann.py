"""Riemannian codomain geometry: Christoffel symbols, curvature with the
index wiring fixed by the Ricci identity, its covariant derivative, sectional
curvature, and the Euclidean / sphere presets.

The curvature component table R[b][a][c][d] follows the hh-curvature pattern
of the domain side,

    R_b{}^a{}_{cd} = d_d gamma^a_bc - d_c gamma^a_bd
                     + gamma^h_bc gamma^a_hd - gamma^h_bd gamma^a_hc,

so that commuting two horizontal covariant derivatives of a vector field Z
produces exactly R_b{}^a{}_{cd} Z^b (checked numerically in the tests).

All combination helpers are generic over the scalar type: they run on plain
numpy values for pointwise queries and on domain jets when the codomain
objects are pulled back through a map.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import expressions as ex
from . import jets as jt
from .errors import ConfigError, SingularMetricError


# --- generic linear algebra over jets or arrays --------------------------------

def _value_of(s):
    return s.value if isinstance(s, jt.Jet) else np.asarray(s)


def invert_matrix(mat):
    """Gauss-Jordan inverse of a small matrix of jets or arrays.

    No pivoting: callers only invert positive-definite metric tensors, whose
    diagonal stays positive throughout the elimination.
    """
    n = len(mat)
    a = [list(row) for row in mat]
    inv = [[(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = a[col][col]
        piv_val = _value_of(piv)
        if not np.all(np.isfinite(piv_val)) or np.any(np.abs(piv_val) < 1e-13):
            raise SingularMetricError("metric is singular or indefinite at the evaluation point")
        piv_inv = 1.0 / piv
        for j in range(n):
            a[col][j] = a[col][j] * piv_inv
            inv[col][j] = inv[col][j] * piv_inv
        for i in range(n):
            if i == col:
                continue
            factor = a[i][col]
            for j in range(n):
                a[i][j] = a[i][j] - factor * a[col][j]
                inv[i][j] = inv[i][j] - factor * inv[col][j]
    return inv


def determinant(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    if n == 3:
        return (mat[0][0] * (mat[1][1] * mat[2][2] - mat[1][2] * mat[2][1])
                - mat[0][1] * (mat[1][0] * mat[2][2] - mat[1][2] * mat[2][0])
                + mat[0][2] * (mat[1][0] * mat[2][1] - mat[1][1] * mat[2][0]))
    # Laplace expansion; dimensions beyond 3 are rare enough not to matter
    det = None
    for j in range(n):
        minor = [[mat[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = mat[0][j] * determinant(minor) * (1.0 if j % 2 == 0 else -1.0)
        det = term if det is None else det + term
    return det


def _sum(terms):
    return reduce(lambda u, v: u + v, terms)


# --- partial-derivative tables of a metric -------------------------------------

@dataclass
class MetricPartials:
    """Metric and its coordinate partials, entries jets or arrays.

    d0[a][b] = g_ab, d1[c][a][b] = g_ab,c, d2[c][d][a][b] = g_ab,cd,
    d3[c][d][e][a][b] = g_ab,cde (levels beyond `max_order` are None).
    """

    dim: int
    d0: list
    d1: list = None
    d2: list = None
    d3: list = None


def christoffel_table(p: MetricPartials, ginv=None):
    """gamma[a][b][c] = gamma^a_bc from the metric partial table."""
    n = p.dim
    if ginv is None:
        ginv = invert_matrix(p.d0)
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for c in range(b, n):
                entry = 0.5 * _sum([ginv[a][l] * (p.d1[c][l][b] + p.d1[b][l][c] - p.d1[l][b][c])
                                    for l in range(n)])
                gamma[a][b][c] = entry
                gamma[a][c][b] = entry
    return gamma, ginv


def dchristoffel_table(p: MetricPartials, gamma, ginv):
    """dgamma[d][a][b][c] = d_d gamma^a_bc."""
    n = p.dim
    dginv = [_dginv(ginv, p.d1[d]) for d in range(n)]
    out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for d in range(n):
        for a in range(n):
            for b in range(n):
                for c in range(b, n):
                    entry = _sum(
                        [0.5 * dginv[d][a][l] * (p.d1[c][l][b] + p.d1[b][l][c] - p.d1[l][b][c])
                         + 0.5 * ginv[a][l] * (p.d2[c][d][l][b] + p.d2[b][d][l][c] - p.d2[l][d][b][c])
                         for l in range(n)])
                    out[d][a][b][c] = entry
                    out[d][a][c][b] = entry
    return out, dginv


def _dginv(ginv, dg):
    """d(g^-1) = -g^-1 (dg) g^-1 for one coordinate direction."""
    n = len(ginv)
    return [[-_sum([ginv[a][i] * dg[i][j] * ginv[j][b] for i in range(n) for j in range(n)])
             for b in range(n)] for a in range(n)]


def curvature_table(gamma, dgamma, dim):
    """riem[b][a][c][d] = R_b{}^a{}_{cd} (see module docstring for the pattern)."""
    n = dim
    riem = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for b in range(n):
        for a in range(n):
            for c in range(n):
                for d in range(n):
                    entry = (dgamma[d][a][b][c] - dgamma[c][a][b][d]
                             + _sum([gamma[h][b][c] * gamma[a][h][d]
                                     - gamma[h][b][d] * gamma[a][h][c] for h in range(n)]))
                    riem[b][a][c][d] = entry
    return riem


def nabla_curvature_table(p: MetricPartials, gamma, dgamma, ginv, dginv, riem):
    """nabla[m][b][a][c][d] = (covariant derivative of R in direction m)."""
    n = p.dim
    # second partials of gamma, needed for the plain partial of R
    d2gamma = [[None] * n for _ in range(n)]
    d2ginv = [[None] * n for _ in range(n)]
    for d in range(n):
        for e in range(n):
            d2ginv[d][e] = [[-_sum(
                [dginv[e][a][i] * p.d1[d][i][j] * ginv[j][b]
                 + ginv[a][i] * p.d2[d][e][i][j] * ginv[j][b]
                 + ginv[a][i] * p.d1[d][i][j] * dginv[e][j][b]
                 for i in range(n) for j in range(n)])
                for b in range(n)] for a in range(n)]
    for d in range(n):
        for e in range(n):
            tbl = [[[None] * n for _ in range(n)] for _ in range(n)]
            for a in range(n):
                for b in range(n):
                    for c in range(b, n):
                        entry = _sum(
                            [0.5 * d2ginv[d][e][a][l] * (p.d1[c][l][b] + p.d1[b][l][c] - p.d1[l][b][c])
                             + 0.5 * dginv[d][a][l] * (p.d2[c][e][l][b] + p.d2[b][e][l][c] - p.d2[l][e][b][c])
                             + 0.5 * dginv[e][a][l] * (p.d2[c][d][l][b] + p.d2[b][d][l][c] - p.d2[l][d][b][c])
                             + 0.5 * ginv[a][l] * (p.d3[c][d][e][l][b] + p.d3[b][d][e][l][c] - p.d3[l][d][e][b][c])
                             for l in range(n)])
                        tbl[a][b][c] = entry
                        tbl[a][c][b] = entry
            d2gamma[d][e] = tbl
    nabla = [[[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for m in range(n):
        for b in range(n):
            for a in range(n):
                for c in range(n):
                    for d in range(n):
                        plain = (d2gamma[d][m][a][b][c] - d2gamma[c][m][a][b][d]
                                 + _sum([dgamma[m][h][b][c] * gamma[a][h][d] + gamma[h][b][c] * dgamma[m][a][h][d]
                                         - dgamma[m][h][b][d] * gamma[a][h][c] - gamma[h][b][d] * dgamma[m][a][h][c]
                                         for h in range(n)]))
                        corr = _sum([gamma[a][m][h] * riem[b][h][c][d]
                                     - gamma[h][m][b] * riem[h][a][c][d]
                                     - gamma[h][m][c] * riem[b][a][h][d]
                                     - gamma[h][m][d] * riem[b][a][c][h]
                                     for h in range(n)])
                        nabla[m][b][a][c][d] = plain + corr
    return nabla


def riem_apply(riem, u, w, z, dim):
    """(R(U, W)Z)^a = R_b{}^a{}_{cr} W^c U^r Z^b.

    The first operator argument pairs with the last component index, matching
    the Ricci identity D_r D_c - D_c D_r = R_b{}^a{}_{cr}.
    """
    return [_sum([riem[b][a][c][r] * w[c] * u[r] * z[b]
                  for b in range(dim) for c in range(dim) for r in range(dim)])
            for a in range(dim)]


def nabla_riem_apply(nabla, direction, u, w, z, dim):
    """((nabla_direction R)(U, W)Z)^a with the same wiring as riem_apply."""
    return [_sum([nabla[m][b][a][c][r] * direction[m] * w[c] * u[r] * z[b]
                  for m in range(dim) for b in range(dim)
                  for c in range(dim) for r in range(dim)])
            for a in range(dim)]


# --- the structure --------------------------------------------------------------

class RiemannStructure:
    """Codomain manifold chart with a y-independent metric given by expressions."""

    def __init__(self, dim: int, matrix_asts, label: str = "custom"):
        if dim < 1:
            raise ConfigError("codomain dimension must be >= 1")
        self.dim = dim
        self.label = label
        self.coords = tuple(f"x{i + 1}" for i in range(dim))
        self.metric_asts = matrix_asts
        self._partial_asts: dict = {}
        for a in range(dim):
            for b in range(dim):
                extra = ex.free_vars(matrix_asts[a][b]) - set(self.coords)
                if extra:
                    raise ConfigError(f"codomain metric entry ({a},{b}) uses "
                                      f"non-coordinate variables {sorted(extra)}")

    @classmethod
    def euclidean(cls, dim: int) -> "RiemannStructure":
        mat = [[ex.Const(1.0 if a == b else 0.0) for b in range(dim)] for a in range(dim)]
        return cls(dim, mat, label="euclidean")

    @classmethod
    def sphere(cls, dim: int, radius: float = 1.0) -> "RiemannStructure":
        """Round sphere of the given radius in a single stereographic chart."""
        rho2 = radius * radius
        norm2 = " + ".join(f"x{i + 1}^2" for i in range(dim))
        coords = [f"x{i + 1}" for i in range(dim)]
        diag = ex.parse(f"4*{rho2 * rho2!r}/({rho2!r} + {norm2})^2", coords)
        mat = [[diag if a == b else ex.Const(0.0) for b in range(dim)] for a in range(dim)]
        return cls(dim, mat, label=f"sphere(radius={radius})")

    @classmethod
    def custom(cls, matrix_sources, dim: int) -> "RiemannStructure":
        coords = [f"x{i + 1}" for i in range(dim)]
        mat = [[ex.parse(matrix_sources[a][b], coords) for b in range(dim)] for a in range(dim)]
        for a in range(dim):
            for b in range(a):
                pass  # symmetry is validated numerically below
        rs = cls(dim, mat)
        rs._validate_symmetry()
        return rs

    def _validate_symmetry(self, samples: int = 16):
        rng = np.random.default_rng(20240923)
        pts = rng.uniform(-0.5, 0.5, size=(samples, self.dim))
        for x in pts:
            env = {self.coords[i]: x[i] for i in range(self.dim)}
            mat = np.array([[ex.evaluate(self.metric_asts[a][b], env)
                             for b in range(self.dim)] for a in range(self.dim)], dtype=float)
            if not np.allclose(mat, mat.T, atol=1e-12):
                raise ConfigError("codomain metric matrix is not symmetric")
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise ConfigError("codomain metric is not positive definite at a sample point")

    # --- partial tables ---------------------------------------------------------

    def _partial_ast(self, a: int, b: int, mu: tuple):
        """Exact derivative AST of g_ab for the sorted coordinate tuple mu."""
        key = (a, b, mu)
        node = self._partial_asts.get(key)
        if node is None:
            if not mu:
                node = self.metric_asts[a][b]
            else:
                node = ex.constant_fold(ex.differentiate(self._partial_ast(a, b, mu[:-1]),
                                                         self.coords[mu[-1]]))
            self._partial_asts[key] = node
        return node

    def partials_at(self, env: dict, max_order: int, evaluator=None) -> MetricPartials:
        """Evaluate g and its coordinate partials at `env` (numbers or jets).

        Partials come from exact derivative expressions, so the table is
        valid whether `env` binds plain values or domain jets (the pullback
        through a map needs the latter).
        """
        n = self.dim
        if evaluator is None:
            has_jets = any(isinstance(v, jt.Jet) for v in env.values())
            evaluator = (lambda node: jt.eval_ast(node, env)) if has_jets \
                else (lambda node: ex.evaluate(node, env))

        def level(order):
            if order == 0:
                return [[evaluator(self._partial_ast(a, b, ())) for b in range(n)] for a in range(n)]
            idxs = [()]
            for _ in range(order):
                idxs = [t + (c,) for t in idxs for c in range(n)]
            cache = {}
            out = None
            for t in idxs:
                key = tuple(sorted(t))
                if key not in cache:
                    cache[key] = [[evaluator(self._partial_ast(a, b, key)) for b in range(n)]
                                  for a in range(n)]
            def build(prefix, depth):
                if depth == order:
                    return cache[tuple(sorted(prefix))]
                return [build(prefix + (c,), depth + 1) for c in range(n)]
            out = build((), 0)
            return out

        p = MetricPartials(dim=n, d0=level(0))
        if max_order >= 1:
            p.d1 = level(1)
        if max_order >= 2:
            p.d2 = level(2)
        if max_order >= 3:
            p.d3 = level(3)
        return p

    def partials_from_jets(self, x, max_order: int) -> MetricPartials:
        """Same table, but read off a single jet evaluation of each g_ab.

        This is the pointwise route: the metric expressions are expanded to
        `max_order` jets at x and the coefficient table supplies every
        coordinate partial directly.
        """
        n = self.dim
        space = jt.jet_space(self.coords, max_order)
        env = space.point_env({self.coords[i]: np.asarray(x[i], dtype=np.float64)
                               for i in range(n)})
        jets = [[jt.eval_ast(self.metric_asts[a][b], env) for b in range(n)] for a in range(n)]

        def unit(c):
            return tuple(1 if i == c else 0 for i in range(n))

        def mu_of(t):
            mu = [0] * n
            for c in t:
                mu[c] += 1
            return tuple(mu)

        def level(order):
            if order == 0:
                return [[jets[a][b].value for b in range(n)] for a in range(n)]
            def build(prefix, depth):
                if depth == order:
                    return [[jets[a][b].partial(mu_of(prefix)) for b in range(n)] for a in range(n)]
                return [build(prefix + (c,), depth + 1) for c in range(n)]
            return build((), 0)

        p = MetricPartials(dim=n, d0=level(0))
        if max_order >= 1:
            p.d1 = level(1)
        if max_order >= 2:
            p.d2 = level(2)
        if max_order >= 3:
            p.d3 = level(3)
        return p


# --- public pointwise operations -------------------------------------------------

@dataclass
class CurvatureField:
    """Curvature components R_b{}^a{}_{cd} and their covariant derivative
    (index order [m][b][a][c][d]) at one point."""

    riemann: np.ndarray
    nabla: np.ndarray


def christoffel(rs: RiemannStructure, x) -> np.ndarray:
    """Levi-Civita symbols gamma^a_bc at x, shape (dim, dim, dim)."""
    p = rs.partials_from_jets(x, 1)
    gamma, _ = christoffel_table(p)
    return np.array(gamma, dtype=float)

def curvature(rs: RiemannStructure, x) -> CurvatureField:
    p = rs.partials_from_jets(x, 3)
    gamma, ginv = christoffel_table(p)
    dgamma, dginv = dchristoffel_table(p, gamma, ginv)
    riem = curvature_table(gamma, dgamma, rs.dim)
    nabla = nabla_curvature_table(p, gamma, dgamma, ginv, dginv, riem)
    return CurvatureField(riemann=np.array(riem, dtype=float),
                          nabla=np.array(nabla, dtype=float))


def metric_at(rs: RiemannStructure, x) -> np.ndarray:
    env = {rs.coords[i]: x[i] for i in range(rs.dim)}
    return np.array([[ex.evaluate(rs.metric_asts[a][b], env) for b in range(rs.dim)]
                     for a in range(rs.dim)], dtype=float)


def sectional_curvature(rs: RiemannStructure, x, v, w) -> float:
    """K(plane spanned by v, w) = <R(v,w)w, v> / (|v|^2 |w|^2 - <v,w>^2)."""
    g = metric_at(rs, x)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    denom = (v @ g @ v) * (w @ g @ w) - (v @ g @ w) ** 2
    if abs(denom) < 1e-14:
        raise SingularMetricError("degenerate plane for sectional curvature")
    field = curvature(rs, x)
    rvww = np.array(riem_apply(field.riemann, v, w, w, rs.dim))
    return float((rvww @ g @ v) / denom)
