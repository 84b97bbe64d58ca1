"""Independent classical (Riemannian-domain) oracle pipeline.

A deliberately separate transcription of the textbook harmonic/biharmonic-map
formulas for a Riemannian domain metric g(x): plain coordinate derivatives,
no adapted basis, no torsion terms.  The main engine is validated against
this module when its domain happens to be Riemannian; for that reason nothing
here calls `finsler`, `maps`, or the combination helpers of `riemann` — only
the expression/jet substrate is shared.

Formulas implemented:
    Γ^k_{ij}   = ½ g^{kl}(∂_i g_{lj} + ∂_j g_{li} − ∂_l g_{ij})
    τ^α        = g^{ij}(φ^α_{,ij} + Γ̃^α_{βγ}(φ) φ^β_{,i} φ^γ_{,j} − Γ^k_{ij} φ^α_{,k})
    (D_i S)^α  = ∂_i S^α + Γ̃^α_{βγ}(φ) φ^β_{,i} S^γ
    (ΔS)^α     = g^{ij}(−D_iD_jS + Γ^k_{ij} D_kS)
    τ₂^α       = −(Δτ)^α − g^{ij}(R̃(dφ(∂_i), τ) dφ(∂_j))^α
    (R(X,Y)Z)^α = R^α_{βγδ} Z^β X^γ Y^δ,
    R^α_{βγδ}  = ∂_γ Γ^α_{δβ} − ∂_δ Γ^α_{γβ} + Γ^α_{γε}Γ^ε_{δβ} − Γ^α_{δε}Γ^ε_{γβ}
"""

from __future__ import annotations

import math

import numpy as np

from . import expressions as ex
from . import jets as jt
from .errors import SingularMetricError


class ClassicalPipeline:
    """Harmonic-map calculus for a Riemannian domain metric given by a matrix
    of x-expressions, a codomain metric matrix of x̃-expressions, and map
    component x-expressions."""

    def __init__(self, domain_matrix_asts, codomain_matrix_asts, map_asts, n: int, m: int):
        self.n = n
        self.m = m
        self.g_asts = domain_matrix_asts
        self.gt_asts = codomain_matrix_asts
        self.map_asts = map_asts
        self.xnames = tuple(f"x{i + 1}" for i in range(n))
        self.cnames = tuple(f"x{a + 1}" for a in range(m))
        # exact partial-derivative expressions of the codomain metric,
        # built lazily up to third order
        self._gt_partials = {}

    def _gt_partial(self, a, b, mu):
        key = (a, b, mu)
        node = self._gt_partials.get(key)
        if node is None:
            if not mu:
                node = self.gt_asts[a][b]
            else:
                node = ex.constant_fold(
                    ex.differentiate(self._gt_partial(a, b, mu[:-1]), self.cnames[mu[-1]]))
            self._gt_partials[key] = node
        return node

    # --- building blocks, everything an x-jet ------------------------------------

    def state(self, x, order: int) -> dict:
        """All intermediate jets at the point x."""
        n, m = self.n, self.m
        space = jt.jet_space(self.xnames, order)
        env = space.point_env({self.xnames[i]: np.asarray(x[i], dtype=np.float64)
                               for i in range(n)})
        g = [[jt.eval_ast(self.g_asts[i][j], env) for j in range(n)] for i in range(n)]
        ginv = _inv(g)
        phi = [jt.eval_ast(c, env) for c in self.map_asts]
        dphi = [[phi[a].deriv(self.xnames[i]) for i in range(n)] for a in range(m)]
        # domain Christoffels
        dg = [[[g[i][j].deriv(self.xnames[k]) for k in range(n)] for j in range(n)]
              for i in range(n)]
        gam = [[[0.5 * _dotsum([ginv[k][l] * (dg[l][j][i] + dg[l][i][j] - dg[i][j][l])
                                for l in range(n)])
                 for j in range(n)] for i in range(n)] for k in range(n)]
        # codomain Christoffels at phi(x), via exact derivative expressions
        cenv = {self.cnames[a]: phi[a] for a in range(m)}
        gt = [[jt.eval_ast(self._gt_partial(a, b, ()), cenv) for b in range(m)]
              for a in range(m)]
        dgt = [[[jt.eval_ast(self._gt_partial(a, b, (c,)), cenv) for b in range(m)]
                for a in range(m)] for c in range(m)]
        gtinv = _inv(gt)
        gamt = [[[0.5 * _dotsum([gtinv[a][l] * (dgt[c][l][b] + dgt[b][l][c] - dgt[l][b][c])
                                 for l in range(m)])
                  for c in range(m)] for b in range(m)] for a in range(m)]
        return {"env": env, "g": g, "ginv": ginv, "phi": phi, "dphi": dphi,
                "gam": gam, "gt": gt, "gtinv": gtinv, "gamt": gamt,
                "dgt": dgt, "cenv": cenv}

    def tension_jets(self, st):
        n, m = self.n, self.m
        out = []
        for a in range(m):
            terms = []
            for i in range(n):
                for j in range(n):
                    t = st["dphi"][a][i].deriv(self.xnames[j])
                    t = t + _dotsum([st["gamt"][a][b][c] * st["dphi"][b][i] * st["dphi"][c][j]
                                     for b in range(m) for c in range(m)])
                    t = t - _dotsum([st["gam"][k][i][j] * st["dphi"][a][k] for k in range(n)])
                    terms.append(st["ginv"][i][j] * t)
            out.append(_dotsum(terms))
        return out

    def cov_deriv(self, st, S, i):
        m = self.m
        return [S[a].deriv(self.xnames[i])
                + _dotsum([st["gamt"][a][b][c] * st["dphi"][b][i] * S[c]
                           for b in range(m) for c in range(m)])
                for a in range(m)]

    def rough_laplacian_jets(self, st, S):
        n, m = self.n, self.m
        DS = [self.cov_deriv(st, S, j) for j in range(n)]
        DDS = [[self.cov_deriv(st, DS[j], i) for j in range(n)] for i in range(n)]
        out = []
        for a in range(m):
            terms = []
            for i in range(n):
                for j in range(n):
                    t = -DDS[i][j][a]
                    t = t + _dotsum([st["gam"][k][i][j] * DS[k][a] for k in range(n)])
                    terms.append(st["ginv"][i][j] * t)
            out.append(_dotsum(terms))
        return out

    def _codomain_riemann(self, st):
        """R^α_{βγδ} at φ(x), as x-jets."""
        m = self.m
        cenv = st["cenv"]
        d2gt = [[[[jt.eval_ast(self._gt_partial(a, b, tuple(sorted((c, d)))), cenv)
                   for b in range(m)] for a in range(m)] for d in range(m)] for c in range(m)]
        gtinv, dgt = st["gtinv"], st["dgt"]
        dgtinv = [[[-_dotsum([gtinv[a][i] * dgt[c][i][j] * gtinv[j][b]
                              for i in range(m) for j in range(m)])
                    for b in range(m)] for a in range(m)] for c in range(m)]
        gamt = st["gamt"]

        def dgam(e, a, b, c):
            return _dotsum(
                [0.5 * dgtinv[e][a][l] * (dgt[c][l][b] + dgt[b][l][c] - dgt[l][b][c])
                 + 0.5 * gtinv[a][l] * (d2gt[c][e][l][b] + d2gt[b][e][l][c] - d2gt[l][e][b][c])
                 for l in range(m)])

        riem = [[[[None] * m for _ in range(m)] for _ in range(m)] for _ in range(m)]
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    for d in range(m):
                        riem[a][b][c][d] = (dgam(c, a, d, b) - dgam(d, a, c, b)
                                            + _dotsum([gamt[a][c][e] * gamt[e][d][b]
                                                       - gamt[a][d][e] * gamt[e][c][b]
                                                       for e in range(m)]))
        return riem

    def bitension_jets(self, st):
        n, m = self.n, self.m
        tau = self.tension_jets(st)
        lap = self.rough_laplacian_jets(st, tau)
        riem = self._codomain_riemann(st)
        out = []
        for a in range(m):
            trace_terms = []
            for i in range(n):
                for j in range(n):
                    # R̃(dφ(∂_i), τ) dφ(∂_j): X = dφ_i (slot γ), Y = τ (slot δ),
                    # Z = dφ_j (slot β) in (R(X,Y)Z)^α = R^α_{βγδ} Z^β X^γ Y^δ
                    comp = _dotsum([riem[a][b][c][d] * st["dphi"][b][j]
                                    * st["dphi"][c][i] * tau[d]
                                    for b in range(m) for c in range(m) for d in range(m)])
                    trace_terms.append(st["ginv"][i][j] * comp)
            out.append(-lap[a] - _dotsum(trace_terms))
        return out

    # --- pointwise values ---------------------------------------------------------

    def tension(self, x) -> np.ndarray:
        st = self.state(x, 2)
        return np.array([float(t.value) for t in self.tension_jets(st)])

    def rough_laplacian(self, S_asts, x) -> np.ndarray:
        st = self.state(x, 3)
        S = [jt.eval_ast(s, st["env"]) for s in S_asts]
        return np.array([float(t.value) for t in self.rough_laplacian_jets(st, S)])

    def bitension(self, x) -> np.ndarray:
        st = self.state(x, 4)
        return np.array([float(t.value) for t in self.bitension_jets(st)])

    def tension_norm2(self, x) -> float:
        st = self.state(x, 2)
        tau = self.tension_jets(st)
        return float(_dotsum([st["gt"][a][b] * tau[a] * tau[b]
                              for a in range(self.m) for b in range(self.m)]).value)

    def bienergy(self, box, resolution: int = 48) -> float:
        """½ ∫_M ‖τ‖² dv_g by Gauss–Legendre product quadrature over a box."""
        nodes, weights = np.polynomial.legendre.leggauss(resolution)
        axes = []
        wts = []
        for lo, hi in box:
            axes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
            wts.append(0.5 * (hi - lo) * weights)
        total = 0.0
        for idx in np.ndindex(*(len(a) for a in axes)):
            x = np.array([axes[d][idx[d]] for d in range(self.n)])
            st = self.state(x, 2)
            gval = np.array([[float(e.value) for e in row] for row in st["g"]])
            det = np.linalg.det(gval)
            if det <= 0:
                raise SingularMetricError("domain metric degenerate in bienergy quadrature")
            w = math.prod(wts[d][idx[d]] for d in range(self.n))
            total += w * 0.5 * self.tension_norm2(x) * np.sqrt(det)
        return total


def _inv(mat):
    """Small-matrix Gauss-Jordan inverse over jets (local copy, see module note)."""
    n = len(mat)
    a = [list(row) for row in mat]
    inv = [[(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = a[col][col]
        piv_val = piv.value if isinstance(piv, jt.Jet) else np.asarray(piv)
        if not np.all(np.isfinite(piv_val)) or np.any(np.abs(piv_val) < 1e-13):
            raise SingularMetricError("singular metric in classical pipeline")
        piv_inv = 1.0 / piv
        for j in range(n):
            a[col][j] = a[col][j] * piv_inv
            inv[col][j] = inv[col][j] * piv_inv
        for i in range(n):
            if i == col:
                continue
            f = a[i][col]
            for j in range(n):
                a[i][j] = a[i][j] - f * a[col][j]
                inv[i][j] = inv[i][j] - f * inv[col][j]
    return inv


def _dotsum(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc
