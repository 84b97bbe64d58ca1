"""Finsler domain geometry computed pointwise from jets of F².

Everything downstream of the fundamental function — metric tensor, geodesic
spray, nonlinear connection, adapted (horizontal) derivatives, Chern–Rund
symbols, torsion trace, curvatures, divergence, horizontal Laplacian — is
obtained by evaluating one jet of F² at the working point and differentiating
it symbolically inside the jet algebra.  No numeric differencing is involved;
the jet order used per quantity is listed in ORDER_TABLE.

Conventions (indices are 0-based in code):
    g_ij      = ½ ∂²F²/∂y^i∂y^j
    2 G^i     = ½ g^{ih} ( (F²)_{·h,k} y^k − (F²)_{,h} )
    G^i_j     = ∂G^i/∂y^j            (nonlinear connection)
    δ_i       = ∂_i − G^j_i ∂̇_j      (adapted horizontal derivative)
    Γ^i_jk    = ½ g^{ih} (δ_k g_hj + δ_j g_hk − δ_h g_jk)
    G^i_jk    = ∂²G^i/∂y^j∂y^k
    P^i_jk    = G^i_jk − Γ^i_jk,  P_i = P^j_ij
    R^i_jk    = δ_k G^i_j − δ_j G^i_k
    R_j^i_kl  = δ_l Γ^i_jk − δ_k Γ^i_jl + Γ^h_jk Γ^i_hl − Γ^h_jl Γ^i_hk
    P_j^i_kl  = ∂Γ^i_jk/∂y^l
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expressions as ex
from . import jets as jt
from .errors import ChartError, ConfigError, DomainEvalError, SingularMetricError
from .riemann import determinant, invert_matrix

# Jet order of F² required so the listed quantity still has a trustworthy
# value (order-0 coefficient) after all the derivatives taken on the way.
ORDER_TABLE = {
    "metric": 2,
    "spray": 3,
    "connection": 4,
    "curvature": 5,
    "laplacian": 6,
    "bitension": 6,
    "hessian": 8,
}

DEFAULT_R_MIN = 1e-6
_COND_LIMIT = 1e12


# --- charts ---------------------------------------------------------------------

@dataclass(frozen=True)
class TorusChart:
    """Periodic chart: every coordinate value is admissible; integration
    treats coordinate i with period periods[i]."""

    periods: tuple

    @property
    def dim(self):
        return len(self.periods)

    def contains(self, x) -> bool:
        return True

    def sample_box(self):
        return [(0.0, p) for p in self.periods]


@dataclass(frozen=True)
class BoxChart:
    """Plain box chart with no identifications; leaving it is an error."""

    bounds: tuple  # ((lo, hi), ...)

    @property
    def dim(self):
        return len(self.bounds)

    def contains(self, x) -> bool:
        return all(lo - 1e-12 <= xi <= hi + 1e-12 for xi, (lo, hi) in zip(x, self.bounds))

    def sample_box(self):
        return list(self.bounds)


def _default_chart(n):
    return BoxChart(tuple((-1.0, 1.0) for _ in range(n)))


# --- the structure --------------------------------------------------------------

@dataclass(frozen=True)
class PointState:
    """Base point x and nonzero fiber coordinate y."""

    x: np.ndarray
    y: np.ndarray

    def __init__(self, x, y, r_min: float = DEFAULT_R_MIN):
        object.__setattr__(self, "x", np.asarray(x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(y, dtype=np.float64))
        if float(np.linalg.norm(self.y)) < r_min:
            raise ChartError(f"fiber coordinate below the zero-section floor {r_min}")


class FinslerStructure:
    """Immutable Finsler structure: chart + fundamental function F²(x, y)."""

    def __init__(self, dim: int, f2_ast, chart=None, label: str = "custom",
                 base_matrix_asts=None, b_ast=None, validate: bool = True):
        if dim < 2:
            raise ConfigError("domain dimension must be >= 2")
        self.dim = dim
        self.chart = chart if chart is not None else _default_chart(dim)
        if self.chart.dim != dim:
            raise ConfigError("chart dimension does not match structure dimension")
        self.label = label
        self.xnames = tuple(f"x{i + 1}" for i in range(dim))
        self.ynames = tuple(f"y{i + 1}" for i in range(dim))
        self.f2_ast = f2_ast
        # retained for the Riemannian / perturbed families (identity-map
        # analysis and classical reduction oracles need the base metric)
        self.base_matrix_asts = base_matrix_asts
        self.b_ast = b_ast
        extra = ex.free_vars(f2_ast) - set(self.xnames) - set(self.ynames)
        if extra:
            raise ConfigError(f"F^2 uses non-coordinate variables {sorted(extra)}")
        if validate:
            self._validate()

    # --- constructors ----------------------------------------------------------

    @classmethod
    def euclidean(cls, dim: int, chart=None) -> "FinslerStructure":
        terms = " + ".join(f"y{i + 1}^2" for i in range(dim))
        ast = ex.parse(terms, [f"y{i + 1}" for i in range(dim)])
        eye = [[ex.Const(1.0 if i == j else 0.0) for j in range(dim)] for i in range(dim)]
        return cls(dim, ast, chart, label="euclidean", base_matrix_asts=eye, validate=False)

    @classmethod
    def riemannian(cls, matrix_sources, dim: int, chart=None) -> "FinslerStructure":
        coords = [f"x{i + 1}" for i in range(dim)]
        mat = [[entry if isinstance(entry, ex.Node) else ex.parse(entry, coords)
                for entry in row] for row in matrix_sources]
        f2 = _quadratic_form_ast(mat, dim)
        return cls(dim, f2, chart, label="riemannian", base_matrix_asts=mat)

    @classmethod
    def randers(cls, alpha_sources, beta_sources, dim: int, chart=None) -> "FinslerStructure":
        """F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i."""
        coords = [f"x{i + 1}" for i in range(dim)]
        amat = [[entry if isinstance(entry, ex.Node) else ex.parse(entry, coords)
                 for entry in row] for row in alpha_sources]
        bvec = [entry if isinstance(entry, ex.Node) else ex.parse(entry, coords)
                for entry in beta_sources]
        alpha2 = _quadratic_form_ast(amat, dim)
        beta = None
        for i in range(dim):
            term = ex.BinOp("*", bvec[i], ex.Var(f"y{i + 1}"))
            beta = term if beta is None else ex.BinOp("+", beta, term)
        f = ex.BinOp("+", ex.Func("sqrt", alpha2), beta)
        return cls(dim, ex.Pow(f, 2.0), chart, label="randers")

    @classmethod
    def perturbed(cls, matrix_sources, b_source, dim: int, chart=None,
                  scale: float = 1.0) -> "FinslerStructure":
        """F² = g̃_ij(x) y^i y^j + scale·b(x, y) with b 2-homogeneous in y."""
        coords = [f"x{i + 1}" for i in range(dim)] + [f"y{i + 1}" for i in range(dim)]
        xonly = [f"x{i + 1}" for i in range(dim)]
        mat = [[entry if isinstance(entry, ex.Node) else ex.parse(entry, xonly)
                for entry in row] for row in matrix_sources]
        b = b_source if isinstance(b_source, ex.Node) else ex.parse(b_source, coords)
        if scale != 1.0:
            b_scaled = ex.BinOp("*", ex.Const(float(scale)), b)
        else:
            b_scaled = b
        f2 = ex.BinOp("+", _quadratic_form_ast(mat, dim), b_scaled)
        return cls(dim, f2, chart, label="perturbed", base_matrix_asts=mat, b_ast=b_scaled)

    @classmethod
    def custom(cls, f_source, dim: int, chart=None) -> "FinslerStructure":
        coords = [f"x{i + 1}" for i in range(dim)] + [f"y{i + 1}" for i in range(dim)]
        f = f_source if isinstance(f_source, ex.Node) else ex.parse(f_source, coords)
        return cls(dim, ex.Pow(f, 2.0), chart, label="custom")

    # --- plain evaluation -------------------------------------------------------

    def f2_value(self, x, y):
        """F²(x, y) with plain numerics; x components scalar, y may be batched."""
        env = {self.xnames[i]: x[i] for i in range(self.dim)}
        env.update({self.ynames[i]: y[i] for i in range(self.dim)})
        return ex.evaluate(self.f2_ast, env)

    def f_value(self, x, y):
        f2 = self.f2_value(x, y)
        if np.any(np.asarray(f2) <= 0):
            raise DomainEvalError("F^2 <= 0 at an evaluation point")
        return np.sqrt(f2)

    # --- construction-time validation --------------------------------------------

    def _validate(self, samples: int = 64, seed: int = 20240611):
        rng = np.random.default_rng(seed)
        box = self.chart.sample_box()
        n = self.dim
        for _ in range(samples):
            x = np.array([rng.uniform(lo, hi) for lo, hi in box])
            y = rng.normal(size=n)
            y *= rng.uniform(0.5, 2.0) / np.linalg.norm(y)
            f2 = self.f2_value(x, y)
            if not np.isfinite(f2) or f2 <= 0:
                raise ConfigError(f"F(x,y) not positive at sample x={x}, y={y}")
            f = np.sqrt(f2)
            for lam in (0.5, 2.0, 7.0):
                f_lam = np.sqrt(self.f2_value(x, lam * y))
                if abs(f_lam - lam * f) > 1e-10 * lam * f:
                    raise ConfigError("F is not positively 1-homogeneous in y")
            g = _metric_values(self, x, y)
            if np.linalg.eigvalsh(g).min() <= 0:
                raise ConfigError(f"metric tensor not positive definite at sample x={x}, y={y}")
            if self.b_ast is not None:
                env = {self.xnames[i]: x[i] for i in range(n)}
                env.update({self.ynames[i]: y[i] for i in range(n)})
                b = ex.evaluate(self.b_ast, env)
                for lam in (0.5, 2.0, 7.0):
                    env_l = dict(env)
                    env_l.update({self.ynames[i]: lam * y[i] for i in range(n)})
                    b_lam = ex.evaluate(self.b_ast, env_l)
                    if abs(b_lam - lam * lam * b) > 1e-10 * lam * lam * abs(b) + 1e-12:
                        raise ConfigError("perturbation b is not 2-homogeneous in y")


def _quadratic_form_ast(matrix_asts, dim):
    """AST for g_ij(x) y^i y^j from a symmetric matrix of x-expressions."""
    total = None
    for i in range(dim):
        for j in range(dim):
            entry = matrix_asts[i][j]
            if isinstance(entry, ex.Const) and entry.value == 0.0:
                continue
            term = ex.BinOp("*", ex.BinOp("*", entry, ex.Var(f"y{i + 1}")),
                            ex.Var(f"y{j + 1}"))
            total = term if total is None else ex.BinOp("+", total, term)
    if total is None:
        raise ConfigError("metric matrix is identically zero")
    return total


def _metric_values(fs, x, y):
    """Plain n×n metric value matrix at one (x, y), used for validation."""
    geom = DomainGeometry(fs, x, y, order=2)
    return np.array([[np.asarray(e.value if isinstance(e, jt.Jet) else e)
                      for e in row] for row in geom.g], dtype=float)


# --- the pointwise geometry pipeline ---------------------------------------------

class DomainGeometry:
    """All jets of the intrinsic geometry at one base point.

    x components are scalars; y components may carry a trailing batch axis,
    in which case every derived quantity is batched over the fiber samples.
    All members are jets; use `.value` (or `values()` on nested tables) for
    the numbers.
    """

    def __init__(self, fs: FinslerStructure, x, y, order: int, r_min: float = DEFAULT_R_MIN):
        self.fs = fs
        self.n = fs.dim
        self.order = order
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != (self.n,):
            raise ChartError(f"expected {self.n} base coordinates")
        if not fs.chart.contains(x):
            raise ChartError(f"point {x} outside the chart")
        ynorm = np.sqrt(sum(np.asarray(y[i]) ** 2 for i in range(self.n)))
        if np.any(ynorm < r_min):
            raise ChartError(f"fiber coordinate below the zero-section floor {r_min}")
        self.x = x
        self.y = y
        self.space = jt.jet_space(fs.xnames + fs.ynames, order)
        vals = {fs.xnames[i]: x[i] for i in range(self.n)}
        vals.update({fs.ynames[i]: np.asarray(y[i], dtype=np.float64) for i in range(self.n)})
        self.env = self.space.point_env(vals)

    # -- fundamental jets ---------------------------------------------------------

    @cached_property
    def f2(self):
        return jt.eval_ast(self.fs.f2_ast, self.env)

    @cached_property
    def g(self):
        n = self.n
        out = [[None] * n for _ in range(n)]
        dy = [self.f2.deriv(self.fs.ynames[i]) for i in range(n)]
        for i in range(n):
            for j in range(i, n):
                gij = 0.5 * dy[i].deriv(self.fs.ynames[j])
                out[i][j] = gij
                out[j][i] = gij
        return out

    @cached_property
    def ginv(self):
        gval = np.array([[np.asarray(e.value) for e in row] for row in self.g])
        gmat = np.moveaxis(gval, (0, 1), (-2, -1))
        cond = np.linalg.cond(gmat)
        if not np.all(np.isfinite(cond)) or np.any(cond > _COND_LIMIT):
            raise SingularMetricError(
                f"metric condition number {np.max(cond):.3e} exceeds {_COND_LIMIT:.0e}")
        return invert_matrix(self.g)

    @cached_property
    def detg(self):
        return determinant(self.g)

    @cached_property
    def spray(self):
        """G^i = ¼ g^{ih}((F²)_{·h,k} y^k − (F²)_{,h})."""
        n, fs = self.n, self.fs
        dy = [self.f2.deriv(fs.ynames[h]) for h in range(n)]
        inner = []
        for h in range(n):
            acc = None
            for k in range(n):
                term = dy[h].deriv(fs.xnames[k]) * self.env[fs.ynames[k]]
                acc = term if acc is None else acc + term
            inner.append(acc - self.f2.deriv(fs.xnames[h]))
        return [0.25 * _dot(self.ginv[i], inner) for i in range(n)]

    @cached_property
    def Gj(self):
        """Gj[i][j] = G^i_j = ∂G^i/∂y^j (nonlinear connection)."""
        return [[self.spray[i].deriv(self.fs.ynames[j]) for j in range(self.n)]
                for i in range(self.n)]

    @cached_property
    def Gjk(self):
        """Gjk[i][j][k] = G^i_jk (Berwald coefficients)."""
        return [[[self.Gj[i][j].deriv(self.fs.ynames[k]) for k in range(self.n)]
                 for j in range(self.n)] for i in range(self.n)]

    def delta(self, jet, i):
        """Adapted derivative δ_i = ∂_i − G^j_i ∂̇_j applied to a jet."""
        out = jet.deriv(self.fs.xnames[i])
        for j in range(self.n):
            out = out - self.Gj[j][i] * jet.deriv(self.fs.ynames[j])
        return out

    @cached_property
    def gamma(self):
        """gamma[i][j][k] = Chern–Rund Γ^i_jk."""
        n = self.n
        dg = [[[self.delta(self.g[a][b], c) for c in range(n)] for b in range(n)]
              for a in range(n)]
        out = [[[None] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    entry = 0.5 * _dot(self.ginv[i],
                                       [dg[h][j][k] + dg[h][k][j] - dg[j][k][h]
                                        for h in range(n)])
                    out[i][j][k] = entry
                    out[i][k][j] = entry
        return out

    @cached_property
    def P(self):
        """P[i][j][k] = P^i_jk = G^i_jk − Γ^i_jk (torsion components)."""
        n = self.n
        return [[[self.Gjk[i][j][k] - self.gamma[i][j][k] for k in range(n)]
                 for j in range(n)] for i in range(n)]

    @cached_property
    def P_i(self):
        """P_i = P^j_ij (torsion trace, the horizontal 1-form)."""
        n = self.n
        return [_sum_jets([self.P[j][i][j] for j in range(n)]) for i in range(n)]

    @cached_property
    def Rjk(self):
        """Rjk[i][j][k] = R^i_jk = δ_k G^i_j − δ_j G^i_k (bracket components)."""
        n = self.n
        out = [[[None] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(j + 1, n):
                    entry = self.delta(self.Gj[i][j], k) - self.delta(self.Gj[i][k], j)
                    out[i][j][k] = entry
                    out[i][k][j] = -entry
                out[i][j][j] = 0.0 * self.spray[i]
        return out

    @cached_property
    def hh_curvature(self):
        """R[j][i][k][l] = R_j{}^i{}_{kl}."""
        n = self.n
        dgamma = [[[[self.delta(self.gamma[i][j][k], l) for l in range(n)]
                    for k in range(n)] for j in range(n)] for i in range(n)]
        out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for j in range(n):
            for i in range(n):
                for k in range(n):
                    for l in range(n):
                        entry = (dgamma[i][j][k][l] - dgamma[i][j][l][k]
                                 + _sum_jets([self.gamma[h][j][k] * self.gamma[i][h][l]
                                              - self.gamma[h][j][l] * self.gamma[i][h][k]
                                              for h in range(n)]))
                        out[j][i][k][l] = entry
        return out

    @cached_property
    def hv_curvature(self):
        """P[j][i][k][l] = Γ^i_{jk·l}."""
        n = self.n
        return [[[[self.gamma[i][j][k].deriv(self.fs.ynames[l]) for l in range(n)]
                  for k in range(n)] for j in range(n)] for i in range(n)]

    # -- scalar operators ----------------------------------------------------------

    def divergence_of(self, X):
        """div X = δ_i X^i + Γ^i_ki X^k − P_i X^i for a list of jets X^i."""
        n = self.n
        acc = self.delta(X[0], 0)
        for i in range(1, n):
            acc = acc + self.delta(X[i], i)
        for k in range(n):
            acc = acc + _sum_jets([self.gamma[i][k][i] for i in range(n)]) * X[k]
            acc = acc - self.P_i[k] * X[k]
        return acc

    def horizontal_laplacian_of(self, f):
        """Δf = −g^{ij}(δ_iδ_j f − Γ^k_ij δ_k f − P_i δ_j f) for a scalar jet f."""
        n = self.n
        df = [self.delta(f, i) for i in range(n)]
        acc = None
        for i in range(n):
            for j in range(n):
                term = self.delta(df[j], i)
                for k in range(n):
                    term = term - self.gamma[k][i][j] * df[k]
                term = term - self.P_i[i] * df[j]
                term = self.ginv[i][j] * term
                acc = term if acc is None else acc + term
        return -acc


def _dot(row, col):
    return _sum_jets([a * b for a, b in zip(row, col)])


def _sum_jets(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc


def _values(table):
    """Nested list of jets → numpy array of their values."""
    if isinstance(table, jt.Jet):
        return np.asarray(table.value)
    if isinstance(table, (list, tuple)):
        return np.array([_values(t) for t in table])
    return np.asarray(table)


# --- public value types and operations ---------------------------------------------

@dataclass
class MetricData:
    g: np.ndarray
    ginv: np.ndarray
    detg: float
    y_low: np.ndarray       # y_i = g_ij y^j
    f2: float


@dataclass
class ConnectionData:
    spray: np.ndarray       # G^i
    nonlinear: np.ndarray   # G^i_j
    chern_rund: np.ndarray  # Γ^i_jk
    berwald: np.ndarray     # G^i_jk
    torsion: np.ndarray     # P^i_jk
    torsion_trace: np.ndarray  # P_i
    bracket: np.ndarray     # R^i_jk


@dataclass
class CurvatureData:
    hh: np.ndarray          # R_j{}^i{}_{kl}, indexed [j][i][k][l]
    hv: np.ndarray          # P_j{}^i{}_{kl} = Γ^i_{jk·l}


def metric(fs: FinslerStructure, p: PointState) -> MetricData:
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["metric"])
    g = _values(geom.g)
    ginv = _values(geom.ginv)
    if np.max(np.abs(g @ ginv - np.eye(fs.dim))) > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
        raise SingularMetricError("metric inverse failed its identity check")
    f2 = float(geom.f2.value)
    quad = float(p.y @ g @ p.y)
    if abs(quad - f2) > 1e-10 * max(abs(f2), 1e-30):
        raise DomainEvalError("Euler identity g_ij y^i y^j = F^2 violated "
                              "(F is not 1-homogeneous at this point)")
    return MetricData(g=g, ginv=ginv, detg=float(_values(geom.detg)),
                      y_low=g @ p.y, f2=f2)


def connection(fs: FinslerStructure, p: PointState) -> ConnectionData:
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["connection"])
    return ConnectionData(
        spray=_values(geom.spray),
        nonlinear=_values(geom.Gj),
        chern_rund=_values(geom.gamma),
        berwald=_values(geom.Gjk),
        torsion=_values(geom.P),
        torsion_trace=_values(geom.P_i),
        bracket=_values(geom.Rjk),
    )


def curvature(fs: FinslerStructure, p: PointState) -> CurvatureData:
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["curvature"])
    return CurvatureData(hh=_values(geom.hh_curvature), hv=_values(geom.hv_curvature))


def _field_jet(fs, field, geom):
    """Normalize a field argument (source text, AST, or jet-callable) to a jet."""
    if callable(field) and not isinstance(field, ex.Node):
        return field(geom)
    node = field if isinstance(field, ex.Node) else ex.parse(field, fs.xnames + fs.ynames)
    return jt.eval_ast(node, geom.env)


def delta_derivative(fs: FinslerStructure, field, p: PointState, i: int):
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["connection"])
    return float(geom.delta(_field_jet(fs, field, geom), i).value)


def divergence(fs: FinslerStructure, X, p: PointState):
    """X is a list of n component fields (sources, ASTs, or jet-callables)."""
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["connection"])
    jets = [_field_jet(fs, comp, geom) for comp in X]
    return float(geom.divergence_of(jets).value)


def horizontal_laplacian(fs: FinslerStructure, f, p: PointState):
    geom = DomainGeometry(fs, p.x, p.y, ORDER_TABLE["laplacian"])
    return float(geom.horizontal_laplacian_of(_field_jet(fs, f, geom)).value)


# --- geodesics and arc length ------------------------------------------------------

def spray_value(fs: FinslerStructure, x, y) -> np.ndarray:
    geom = DomainGeometry(fs, x, y, ORDER_TABLE["metric"] + 1)
    return _values(geom.spray)


def integrate_geodesic(fs: FinslerStructure, p0: PointState, steps: int,
                       h: float, r_min: float = DEFAULT_R_MIN) -> np.ndarray:
    """Classical fourth-order Runge–Kutta on (ẋ = y, ẏ = −2G(x, y)).

    Returns an array of shape (steps + 1, 2n) of sampled states.
    """
    n = fs.dim
    state = np.concatenate([p0.x, p0.y])
    out = np.empty((steps + 1, 2 * n))
    out[0] = state

    def rhs(s):
        x, y = s[:n], s[n:]
        if not fs.chart.contains(x):
            raise ChartError(f"geodesic left the chart at x={x}")
        if np.linalg.norm(y) < r_min:
            raise ChartError("geodesic velocity collapsed below the zero-section floor")
        return np.concatenate([y, -2.0 * spray_value(fs, x, y)])

    for step in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[step + 1] = state
    return out


def arc_length(fs: FinslerStructure, curve_sources, t0: float, t1: float,
               samples: int = 64) -> float:
    """l(c) = ∫ F(c(t), ċ(t)) dt by Gauss–Legendre quadrature with `samples` nodes."""
    curves = [c if isinstance(c, ex.Node) else ex.parse(c, ["t"]) for c in curve_sources]
    vels = [ex.constant_fold(ex.differentiate(c, "t")) for c in curves]
    nodes, weights = np.polynomial.legendre.leggauss(samples)
    t = 0.5 * (t1 - t0) * nodes + 0.5 * (t0 + t1)
    xs = [ex.evaluate(c, {"t": t}) for c in curves]
    ys = [ex.evaluate(v, {"t": t}) for v in vels]
    xs = [np.broadcast_to(np.asarray(v, dtype=np.float64), t.shape) for v in xs]
    ys = [np.broadcast_to(np.asarray(v, dtype=np.float64), t.shape) for v in ys]
    speed2 = sum(np.asarray(v) ** 2 for v in ys)
    if np.any(speed2 < 1e-24):
        raise DomainEvalError("zero velocity encountered along the curve")
    env = {fs.xnames[i]: xs[i] for i in range(fs.dim)}
    env.update({fs.ynames[i]: ys[i] for i in range(fs.dim)})
    f2 = ex.evaluate(fs.f2_ast, env)
    if np.any(f2 <= 0):
        raise DomainEvalError("F^2 <= 0 along the curve")
    return float(0.5 * (t1 - t0) * np.sum(weights * np.sqrt(f2)))
