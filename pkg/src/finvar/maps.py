"""Calculus of maps from a Finsler domain to a Riemannian codomain.

The map φ is given by x-only component expressions.  All analysis happens in
the domain jet algebra: the codomain metric, Christoffel symbols, curvature
and its covariant derivative are evaluated *at φ(x)* by plugging the φ-jets
into exact derivative expressions of g̃, so every codomain object is itself a
domain jet and can be hit with adapted derivatives δ_i.

Operator conventions (all indices 0-based in code):

    dφ(δ_i)^α        = φ^α_{,i}                      (φ depends on x only)
    (D_{δ_i}S)^α     = δ_i S^α + γ̃^α_{βγ}(φ) φ^β_{,i} S^γ
    τ^α              = g^{ij}(φ^α_{,ij} + γ̃^α_{βγ}φ^β_{,i}φ^γ_{,j}
                              − Γ^k_{ij}φ^α_{,k} − P_i φ^α_{,j})
    (Δ^{dφ}S)^α      = g^{ij}(−D_{δ_i}D_{δ_j}S + Γ^k_{ij}D_{δ_k}S + P_i D_{δ_j}S)
    (J S)^α          = −(Δ^{dφ}S)^α − g^{ij}(R̃(dφ(δ_i), S) dφ(δ_j))^α
    τ₂               = J τ

The curvature operator wiring (which slot of R̃_β{}^α{}_{γρ} each argument
feeds) is the one fixed by the Ricci identity in `riemann`; the
first-variation finite-difference check J(V) = D_{∂ε}τ confirms it
end-to-end in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expressions as ex
from . import jets as jt
from .errors import ConfigError, DomainEvalError
from .finsler import DomainGeometry, FinslerStructure, ORDER_TABLE, PointState, _sum_jets, _values
from .riemann import (RiemannStructure, christoffel_table, curvature_table,
                      dchristoffel_table, nabla_curvature_table,
                      nabla_riem_apply, riem_apply)


class SmoothMap:
    """Map φ: domain → codomain given by component expressions in x."""

    def __init__(self, sources, fs: FinslerStructure, rs: RiemannStructure):
        if len(sources) != rs.dim:
            raise ConfigError(f"expected {rs.dim} map components, got {len(sources)}")
        self.fs = fs
        self.rs = rs
        xnames = list(fs.xnames)
        self.components = [s if isinstance(s, ex.Node) else ex.parse(s, xnames)
                           for s in sources]
        for a, node in enumerate(self.components):
            extra = ex.free_vars(node) - set(fs.xnames)
            if extra:
                raise ConfigError(f"map component {a} depends on non-base variables "
                                  f"{sorted(extra)}")

    def value(self, x):
        env = {self.fs.xnames[i]: x[i] for i in range(self.fs.dim)}
        return np.array([ex.evaluate(c, env) for c in self.components], dtype=float)


class VariationFamily:
    """Two-parameter family f^α(eps1, eps2, x) around a base map (eps2 may be
    absent for one-parameter variations)."""

    def __init__(self, sources, fs: FinslerStructure, rs: RiemannStructure,
                 base: SmoothMap = None, validate_samples: int = 16):
        names = ["eps1", "eps2"] + list(fs.xnames)
        self.fs = fs
        self.rs = rs
        self.components = [s if isinstance(s, ex.Node) else ex.parse(s, names)
                           for s in sources]
        if len(self.components) != rs.dim:
            raise ConfigError("variation family components do not match codomain dimension")
        self.base = base if base is not None else self.map_at(0.0, 0.0)
        if base is not None:
            rng = np.random.default_rng(321)
            box = fs.chart.sample_box()
            for _ in range(validate_samples):
                x = np.array([rng.uniform(lo, hi) for lo, hi in box])
                gap = np.max(np.abs(self.map_at(0.0, 0.0).value(x) - base.value(x)))
                if gap > 1e-12:
                    raise ConfigError(f"family at eps = 0 deviates from the base map by {gap}")

    def map_at(self, eps1: float, eps2: float = 0.0) -> SmoothMap:
        bound = {"eps1": ex.Const(float(eps1)), "eps2": ex.Const(float(eps2))}
        comps = [ex.constant_fold(ex.substitute(c, bound)) for c in self.components]
        return SmoothMap(comps, self.fs, self.rs)

    def deviation_field(self, which: int = 1):
        """V^α(x) = ∂f^α/∂eps_which at eps = 0, as x-only expressions."""
        if which not in (1, 2):
            raise ConfigError("deviation parameter index must be 1 or 2")
        zero = {"eps1": ex.Const(0.0), "eps2": ex.Const(0.0)}
        return [ex.constant_fold(ex.substitute(ex.differentiate(c, f"eps{which}"), zero))
                for c in self.components]


class PullbackSection:
    """Section of the pullback bundle: component evaluators S^α(x, y).

    Components may be expression sources/ASTs in (x, y) or callables taking a
    MapGeometry and returning a jet.
    """

    def __init__(self, components, fs: FinslerStructure = None):
        self.raw = list(components)
        self.fs = fs

    def jets(self, mg: "MapGeometry"):
        out = []
        names = mg.map.fs.xnames + mg.map.fs.ynames
        for comp in self.raw:
            if isinstance(comp, jt.Jet):
                out.append(comp)
            elif callable(comp) and not isinstance(comp, ex.Node):
                out.append(comp(mg))
            else:
                node = comp if isinstance(comp, ex.Node) else ex.parse(comp, names)
                out.append(jt.eval_ast(node, mg.geom.env))
        return out


@dataclass
class TensionReport:
    tau: np.ndarray
    tau_norm: np.ndarray
    tau2: np.ndarray = None
    tau2_norm: np.ndarray = None
    energy_density: np.ndarray = None


class MapGeometry:
    """Joint jet state of (domain geometry, φ, pulled-back codomain geometry)
    at one base point (x with an optionally batched y)."""

    def __init__(self, map: SmoothMap, x, y, order: int, codomain_order: int = 3):
        self.map = map
        self.geom = DomainGeometry(map.fs, x, y, order)
        self.n = map.fs.dim
        self.m = map.rs.dim
        self.codomain_order = codomain_order

    @cached_property
    def phi(self):
        return [jt.eval_ast(c, self.geom.env) for c in self.map.components]

    @cached_property
    def dphi(self):
        """dphi[a][i] = φ^α_{,i} as jets."""
        return [[self.phi[a].deriv(self.map.fs.xnames[i]) for i in range(self.n)]
                for a in range(self.m)]

    @cached_property
    def codomain(self):
        """Codomain metric partial tables evaluated at φ(x) as domain jets."""
        env = {self.map.rs.coords[a]: self.phi[a] for a in range(self.m)}
        return self.map.rs.partials_at(env, self.codomain_order)

    @cached_property
    def gtilde(self):
        return self.codomain.d0

    @cached_property
    def _gamma_tilde_tables(self):
        gamma, ginv = christoffel_table(self.codomain)
        return gamma, ginv

    @property
    def gamma_tilde(self):
        return self._gamma_tilde_tables[0]

    @cached_property
    def _curvature_tables(self):
        p = self.codomain
        gamma, ginv = self._gamma_tilde_tables
        dgamma, dginv = dchristoffel_table(p, gamma, ginv)
        riem = curvature_table(gamma, dgamma, self.m)
        nabla = None
        if self.codomain_order >= 3:
            nabla = nabla_curvature_table(p, gamma, dgamma, ginv, dginv, riem)
        return riem, nabla

    @property
    def riem_tilde(self):
        return self._curvature_tables[0]

    @property
    def nabla_riem_tilde(self):
        nabla = self._curvature_tables[1]
        if nabla is None:
            raise ConfigError("codomain_order < 3: nabla R not available")
        return nabla

    # --- pullback connection ------------------------------------------------------

    def cov_deriv(self, S, i: int):
        """(D_{δ_i}S)^α = δ_i S^α + γ̃^α_{βγ}(φ) φ^β_{,i} S^γ."""
        gamma = self.gamma_tilde
        return [self.geom.delta(S[a], i)
                + _sum_jets([gamma[a][b][c] * self.dphi[b][i] * S[c]
                             for b in range(self.m) for c in range(self.m)])
                for a in range(self.m)]

    def inner(self, S, T):
        """⟨S, T⟩ = g̃_{αβ}(φ) S^α T^β."""
        return _sum_jets([self.gtilde[a][b] * S[a] * T[b]
                          for a in range(self.m) for b in range(self.m)])

    # --- tension --------------------------------------------------------------------

    @cached_property
    def tension(self):
        """τ^α, cross-checked against the structural trace form at runtime."""
        n, m, g = self.n, self.m, self.geom
        gamma = self.gamma_tilde
        xn = self.map.fs.xnames
        expanded = []
        for a in range(m):
            terms = []
            for i in range(n):
                for j in range(n):
                    t = self.dphi[a][i].deriv(xn[j])
                    t = t + _sum_jets([gamma[a][b][c] * self.dphi[b][i] * self.dphi[c][j]
                                       for b in range(m) for c in range(m)])
                    for k in range(n):
                        t = t - g.gamma[k][i][j] * self.dphi[a][k]
                    t = t - g.P_i[i] * self.dphi[a][j]
                    terms.append(g.ginv[i][j] * t)
            expanded.append(_sum_jets(terms))
        # structural form: τ = g^{ij}(D_{δ_i}(dφ(δ_j)) − dφ(D_{δ_i}δ_j) − P_i dφ(δ_j))
        Ddphi = [[self.cov_deriv([self.dphi[b][j] for b in range(m)], i)
                  for j in range(n)] for i in range(n)]
        structural = []
        for a in range(m):
            terms = []
            for i in range(n):
                for j in range(n):
                    t = Ddphi[i][j][a]
                    for k in range(n):
                        t = t - g.gamma[k][i][j] * self.dphi[a][k]
                    t = t - g.P_i[i] * self.dphi[a][j]
                    terms.append(g.ginv[i][j] * t)
            structural.append(_sum_jets(terms))
        gap = max(float(np.max(np.abs(np.asarray(expanded[a].value)
                                      - np.asarray(structural[a].value))))
                  for a in range(m))
        scale = max(1.0, max(float(np.max(np.abs(np.asarray(e.value)))) for e in expanded))
        if gap > 1e-9 * scale:
            raise DomainEvalError(
                f"tension self-check failed: expanded vs structural gap {gap:.3e}")
        return expanded

    # --- second-order operators -------------------------------------------------------

    def rough_laplacian(self, S):
        """(Δ^{dφ}S)^α = g^{ij}(−D_iD_jS + Γ^k_{ij}D_kS + P_i D_jS)."""
        n, g = self.n, self.geom
        DS = [self.cov_deriv(S, j) for j in range(n)]       # DS[j][a]
        DDS = [[self.cov_deriv(DS[j], i) for j in range(n)] for i in range(n)]
        out = []
        for a in range(self.m):
            terms = []
            for i in range(n):
                for j in range(n):
                    t = -DDS[i][j][a]
                    for k in range(n):
                        t = t + g.gamma[k][i][j] * DS[k][a]
                    t = t + g.P_i[i] * DS[j][a]
                    terms.append(g.ginv[i][j] * t)
            out.append(_sum_jets(terms))
        return out

    def curvature_trace(self, S):
        """g^{ij} R̃(dφ(δ_i), S) dφ(δ_j), the trace term of J."""
        n, m, g = self.n, self.m, self.geom
        riem = self.riem_tilde
        out = []
        for a in range(m):
            terms = []
            for i in range(n):
                for j in range(n):
                    dphi_i = [self.dphi[b][i] for b in range(m)]
                    dphi_j = [self.dphi[b][j] for b in range(m)]
                    terms.append(g.ginv[i][j]
                                 * riem_apply(riem, dphi_i, S, dphi_j, m)[a])
            out.append(_sum_jets(terms))
        return out

    def jacobi(self, S):
        """(J S)^α = −(Δ^{dφ}S)^α − (curvature trace)^α."""
        lap = self.rough_laplacian(S)
        tr = self.curvature_trace(S)
        return [-lap[a] - tr[a] for a in range(self.m)]

    @cached_property
    def bitension(self):
        return self.jacobi(self.tension)

    @cached_property
    def energy_density(self):
        """e(φ) = ½ g^{ij} g̃_{αβ}(φ) φ^α_{,i} φ^β_{,j}."""
        g = self.geom
        return 0.5 * _sum_jets(
            [g.ginv[i][j] * self.gtilde[a][b] * self.dphi[a][i] * self.dphi[b][j]
             for i in range(self.n) for j in range(self.n)
             for a in range(self.m) for b in range(self.m)])

    # --- Weitzenböck -------------------------------------------------------------------

    def weitzenbock_residual(self):
        """LHS − RHS of −½Δ‖τ‖² = −⟨Δ^{dφ}τ, τ⟩ + g^{ij}⟨D_{δ_i}τ, D_{δ_j}τ⟩."""
        g = self.geom
        tau = self.tension
        norm2 = self.inner(tau, tau)
        lhs = -0.5 * g.horizontal_laplacian_of(norm2)
        lap = self.rough_laplacian(tau)
        Dtau = [self.cov_deriv(tau, i) for i in range(self.n)]
        rhs = -self.inner(lap, tau) + _sum_jets(
            [g.ginv[i][j] * self.inner(Dtau[i], Dtau[j])
             for i in range(self.n) for j in range(self.n)])
        return lhs.value - rhs.value

    # --- Hessian integrand ----------------------------------------------------------------

    def hessian_integrand(self, V1, V2):
        """⟨V₁, J²V₂ + R̃(V₂,τ)τ + g^{ij}{(D̃_τR̃)(V₂,dφ(δ_i))dφ(δ_j)
        − (D_{δ_i}R̃)(dφ(δ_j),τ)V₂ + 2R̃(V₂,dφ(δ_i))D_{δ_j}τ
        − 2R̃(dφ(δ_i),τ)D_{δ_j}V₂}⟩ at the working point.

        The derivative index of the last two terms pairs with j; D_{δ_i}R̃
        pulls back to φ^μ_{,i} ∇_μ R̃ and D̃_τ to τ^μ ∇_μ R̃.
        """
        n, m, g = self.n, self.m, self.geom
        tau = self.tension
        riem = self.riem_tilde
        nabla = self.nabla_riem_tilde
        JJ = self.jacobi(self.jacobi(V2))
        total = [JJ[a] + riem_apply(riem, V2, tau, tau, m)[a] for a in range(m)]
        Dtau = [self.cov_deriv(tau, j) for j in range(n)]
        DV2 = [self.cov_deriv(V2, j) for j in range(n)]
        for i in range(n):
            dphi_i = [self.dphi[b][i] for b in range(m)]
            # pulled-back curvature derivative directions
            dir_tau = tau
            dir_i = dphi_i
            for j in range(n):
                dphi_j = [self.dphi[b][j] for b in range(m)]
                t1 = nabla_riem_apply(nabla, dir_tau, V2, dphi_i, dphi_j, m)
                t2 = nabla_riem_apply(nabla, dir_i, dphi_j, tau, V2, m)
                t3 = riem_apply(riem, V2, dphi_i, Dtau[j], m)
                t4 = riem_apply(riem, dphi_i, tau, DV2[j], m)
                for a in range(m):
                    total[a] = total[a] + g.ginv[i][j] * (
                        t1[a] - t2[a] + 2.0 * t3[a] - 2.0 * t4[a])
        return self.inner(V1, total).value


# --- public operations -------------------------------------------------------------------

def differential(map: SmoothMap, x) -> np.ndarray:
    """φ^α_{,i} matrix (ñ × n) of exact first partials."""
    env = jt.jet_space(map.fs.xnames, 1).point_env(
        {map.fs.xnames[i]: np.asarray(x[i], dtype=np.float64) for i in range(map.fs.dim)})
    jets = [jt.eval_ast(c, env) for c in map.components]
    return np.array([[jets[a].partial(tuple(1 if k == i else 0 for k in range(map.fs.dim)))
                      for i in range(map.fs.dim)] for a in range(map.rs.dim)])


def tension(map: SmoothMap, p: PointState) -> TensionReport:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["connection"], codomain_order=1)
    tau = _values(mg.tension)
    norm = np.sqrt(np.maximum(_values(mg.inner(mg.tension, mg.tension)), 0.0))
    return TensionReport(tau=tau, tau_norm=norm,
                         energy_density=_values(mg.energy_density))


def pullback_cov_deriv(map: SmoothMap, S: PullbackSection, i: int, p: PointState) -> np.ndarray:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["connection"], codomain_order=1)
    return _values(mg.cov_deriv(S.jets(mg), i))


def rough_laplacian(map: SmoothMap, S: PullbackSection, p: PointState) -> np.ndarray:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["laplacian"], codomain_order=2)
    return _values(mg.rough_laplacian(S.jets(mg)))


def jacobi_apply(map: SmoothMap, S: PullbackSection, p: PointState) -> np.ndarray:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["laplacian"], codomain_order=2)
    return _values(mg.jacobi(S.jets(mg)))


def bitension(map: SmoothMap, p: PointState) -> TensionReport:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["bitension"], codomain_order=2)
    tau = _values(mg.tension)
    tau2 = _values(mg.bitension)
    return TensionReport(
        tau=tau,
        tau_norm=np.sqrt(np.maximum(_values(mg.inner(mg.tension, mg.tension)), 0.0)),
        tau2=tau2,
        tau2_norm=np.sqrt(np.maximum(_values(mg.inner(mg.bitension, mg.bitension)), 0.0)),
        energy_density=_values(mg.energy_density))


def weitzenbock_residual(map: SmoothMap, p: PointState) -> float:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["bitension"], codomain_order=2)
    return float(mg.weitzenbock_residual())


def hessian_integrand(map: SmoothMap, V1: PullbackSection, V2: PullbackSection,
                      p: PointState) -> float:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["hessian"], codomain_order=3)
    return float(mg.hessian_integrand(V1.jets(mg), V2.jets(mg)))


def energy_density(map: SmoothMap, p: PointState) -> float:
    mg = MapGeometry(map, p.x, p.y, ORDER_TABLE["metric"], codomain_order=0)
    return float(_values(mg.energy_density))
