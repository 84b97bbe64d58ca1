"""Integration over the unit-ball bundle and the variational checks.

The functional ∫_{BM} α is computed with the normalization

    (1/VolB^n) ∫_M ( ∫_{B_x} α(x, y) det g(x, y) dy ) dx,   B_x = {F(x, ·) ≤ 1},

with the fiber integral estimated by Monte Carlo rejection sampling from a
Euclidean bounding ball of per-point radius safety / min_{‖u‖=1} F(x, u),
and the base integral by a periodic trapezoidal rule (torus charts) or a
Gauss–Legendre product rule (box charts).

Reproducibility: every x-node owns a counter-based Philox stream keyed by
(seed, node index), and the node reduction runs in a fixed order, so a fixed
spec yields bit-identical estimates regardless of the worker count.  Because
the fiber samples depend only on (domain structure, spec), every ε-shifted
evaluation in the finite-difference variational checks reuses the same
samples (common random numbers), which is what lets the FD noise cancel.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex
from . import jets as jt
from .errors import ConfigError, QuadratureError
from .finsler import (BoxChart, DomainGeometry, FinslerStructure, TorusChart,
                      _values)
from .maps import MapGeometry, PullbackSection, SmoothMap, VariationFamily


@dataclass(frozen=True)
class QuadratureSpec:
    x_resolution: int = 16
    y_samples: int = 4096
    seed: int = 0
    r_min: float = 1e-6
    safety: float = 1.1
    workers: int = 1
    report_stderr: bool = True

    def __post_init__(self):
        if self.x_resolution < 2:
            raise ConfigError("x resolution must be >= 2")
        if self.y_samples < 2:
            raise ConfigError("y sample count must be >= 2")
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")


@dataclass
class FunctionalEstimate:
    value: float
    stderr: float
    x_nodes: int
    y_samples: int
    spec_hash: str
    structure_hash: str


def _hash_of(*parts) -> str:
    text = json.dumps([repr(p) for p in parts], sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _x_rule(fs: FinslerStructure, res: int):
    """Base-integral nodes and weights as product rules per chart type."""
    n = fs.dim
    chart = fs.chart
    axes, wts = [], []
    if isinstance(chart, TorusChart):
        for period in chart.periods:
            axes.append(period * np.arange(res) / res)
            wts.append(np.full(res, period / res))
    elif isinstance(chart, BoxChart):
        nodes, weights = np.polynomial.legendre.leggauss(res)
        for lo, hi in chart.bounds:
            axes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
            wts.append(0.5 * (hi - lo) * weights)
    else:
        raise ConfigError(f"unsupported chart type {type(chart).__name__}")
    xs, ws = [], []
    for idx in np.ndindex(*([res] * n)):
        xs.append(np.array([axes[d][idx[d]] for d in range(n)]))
        ws.append(math.prod(wts[d][idx[d]] for d in range(n)))
    return xs, np.array(ws)


def _bounding_radius(fs: FinslerStructure, x, safety: float) -> float:
    """safety / min F(x, u) over a dense scan of unit directions."""
    n = fs.dim
    count = 64 * n
    if n == 2:
        theta = 2 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(theta), np.sin(theta)])
    else:
        rng = np.random.default_rng(12345)
        raw = rng.normal(size=(n, count))
        dirs = raw / np.linalg.norm(raw, axis=0)
    f2 = np.asarray(fs.f2_value(x, dirs))
    if np.any(f2 <= 0) or not np.all(np.isfinite(f2)):
        raise QuadratureError(f"F^2 <= 0 detected during the bounding-radius scan at x={x}")
    return safety / float(np.sqrt(f2.min()))


def _fiber_samples(fs: FinslerStructure, x, spec: QuadratureSpec, node_index: int):
    """(y, inside, radius): candidate fiber points uniform in the bounding
    ball, the {F ≤ 1} indicator, and the ball radius.

    The stream is keyed by (seed, node index) only, so the same samples are
    drawn for any map/integrand evaluated over this structure and spec.
    """
    n = fs.dim
    radius = _bounding_radius(fs, x, spec.safety)
    rng = np.random.Generator(np.random.Philox(key=(np.uint64(spec.seed) << np.uint64(32))
                                               + np.uint64(node_index)))
    raw = rng.normal(size=(n, spec.y_samples))
    u = rng.uniform(size=spec.y_samples)
    norms = np.linalg.norm(raw, axis=0)
    y = radius * (u ** (1.0 / n)) * raw / norms
    # resample points below the zero-section floor (bounded retry loop)
    for _ in range(100):
        low = np.linalg.norm(y, axis=0) < spec.r_min
        if not np.any(low):
            break
        k = int(low.sum())
        raw = rng.normal(size=(n, k))
        u = rng.uniform(size=k)
        y[:, low] = radius * (u ** (1.0 / n)) * raw / np.linalg.norm(raw, axis=0)
    else:
        raise QuadratureError("could not draw fiber samples above the r_min floor")
    f2 = np.asarray(fs.f2_value(x, y))
    inside = f2 <= 1.0
    rate = float(inside.mean())
    if rate < 0.01:
        raise QuadratureError(
            f"fiber acceptance rate {rate:.4f} below 1% at x={x}; F is too anisotropic "
            "for the bounding-ball sampler")
    return y, inside, radius


def integrate(fn, fs: FinslerStructure, spec: QuadratureSpec,
              structure_tag: str = "") -> FunctionalEstimate:
    """Normalized unit-ball-bundle integral of a scalar integrand.

    `fn` is either an expression (source or AST, variables x1.., y1..) or a
    callable `(x, y_batch) -> values` evaluated on the accepted samples.
    """
    if isinstance(fn, str):
        fn = ex.parse(fn, list(fs.xnames) + list(fs.ynames))
    if isinstance(fn, ex.Node):
        node = fn

        def fn(x, y):
            env = {fs.xnames[i]: x[i] for i in range(fs.dim)}
            env.update({fs.ynames[i]: y[i] for i in range(fs.dim)})
            return np.broadcast_to(np.asarray(ex.evaluate(node, env), dtype=np.float64),
                                   y.shape[1:]).copy()

    def node_values(x, y):
        geom = DomainGeometry(fs, x, y, 2, r_min=0.0)
        det = np.asarray(_values(geom.detg))
        return np.asarray(fn(x, y)) * det

    return _assemble(node_values, fs, spec,
                     structure_hash=_hash_of(fs.label, ex.to_source(fs.f2_ast), structure_tag))


def _assemble(node_values, fs: FinslerStructure, spec: QuadratureSpec,
              structure_hash: str = "") -> FunctionalEstimate:
    """Common machinery: per-node fiber Monte Carlo + deterministic reduction.

    `node_values(x, y_accepted) -> values` supplies integrand·det g on the
    accepted fiber samples of one node.
    """
    xs, ws = _x_rule(fs, spec.x_resolution)
    vol_bn = unit_ball_volume(fs.dim)

    def one_node(args):
        node_index, x = args
        y, inside, radius = _fiber_samples(fs, x, spec, node_index)
        vals = np.zeros(spec.y_samples)
        if np.any(inside):
            vals[inside] = np.asarray(node_values(x, y[:, inside]), dtype=np.float64)
        ball_vol = vol_bn * radius ** fs.dim
        mean = float(vals.mean())
        var = float(vals.var(ddof=1)) if spec.y_samples > 1 else 0.0
        contrib = ball_vol * mean / vol_bn
        contrib_var = (ball_vol / vol_bn) ** 2 * var / spec.y_samples
        return contrib, contrib_var

    tasks = list(enumerate(xs))
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(one_node, tasks))
    else:
        results = [one_node(t) for t in tasks]
    value = 0.0
    variance = 0.0
    for w, (contrib, contrib_var) in zip(ws, results):
        value += w * contrib
        variance += w * w * contrib_var
    if not np.isfinite(value):
        raise QuadratureError("integral estimate is not finite")
    return FunctionalEstimate(value=float(value), stderr=float(np.sqrt(variance)),
                              x_nodes=len(xs), y_samples=spec.y_samples,
                              spec_hash=_hash_of(spec), structure_hash=structure_hash)


# --- functionals ----------------------------------------------------------------

def _map_hash(map: SmoothMap) -> str:
    return _hash_of(map.fs.label, ex.to_source(map.fs.f2_ast), map.rs.label,
                    [ex.to_source(c) for c in map.components])


def energy(map: SmoothMap, spec: QuadratureSpec) -> FunctionalEstimate:
    """E(φ) = ∫_{BM} e(φ), e = ½ g^{ij} g̃_{αβ}(φ) φ^α_{,i} φ^β_{,j}."""

    def node_values(x, y):
        mg = MapGeometry(map, x, y, 2, codomain_order=0)
        return _values(mg.energy_density) * _values(mg.geom.detg)

    return _assemble(node_values, map.fs, spec, structure_hash=_map_hash(map))


def bienergy(map: SmoothMap, spec: QuadratureSpec) -> FunctionalEstimate:
    """E₂(φ) = ½ ∫_{BM} ⟨τ, τ⟩."""

    def node_values(x, y):
        mg = MapGeometry(map, x, y, 4, codomain_order=1)
        return 0.5 * _values(mg.inner(mg.tension, mg.tension)) * _values(mg.geom.detg)

    return _assemble(node_values, map.fs, spec, structure_hash=_map_hash(map))


# --- variational checks -----------------------------------------------------------

@dataclass
class VariationCheck:
    fd: float
    analytic: float
    gap: float
    stderr: float
    extras: dict = field(default_factory=dict)


def first_variation_check(family: VariationFamily, spec: QuadratureSpec,
                          h: float = 1e-3, richardson: bool = False) -> VariationCheck:
    """dE₂/dε|₀ by central differences against ∫⟨τ₂, V⟩."""

    def e2(eps):
        return bienergy(family.map_at(eps), spec).value

    def central(step):
        return (e2(step) - e2(-step)) / (2 * step)

    fd = central(h)
    if richardson:
        fd = (4.0 * central(h / 2) - fd) / 3.0

    v_asts = family.deviation_field(1)
    base = family.base

    def node_values(x, y):
        mg = MapGeometry(base, x, y, 6, codomain_order=2)
        V = [jt.eval_ast(a, mg.geom.env) for a in v_asts]
        return _values(mg.inner(mg.bitension, V)) * _values(mg.geom.detg)

    est = _assemble(node_values, base.fs, spec, structure_hash=_map_hash(base))
    return VariationCheck(fd=fd, analytic=est.value, gap=abs(fd - est.value),
                          stderr=est.stderr)


def self_adjointness_check(map: SmoothMap, X: PullbackSection, Y: PullbackSection,
                           spec: QuadratureSpec) -> dict:
    """Operator-symmetry gaps for Δ^{dφ} and J plus the positivity diagnostic.

    All five integrands share each node's geometry, so their estimates are
    exactly comparable sample by sample.
    """
    sums = np.zeros(5)
    variances = np.zeros(5)

    def node_values(x, y_all, inside):
        mg = MapGeometry(map, x, y_all[:, inside], 6, codomain_order=2)
        Xj, Yj = X.jets(mg), Y.jets(mg)
        LX, LY = mg.rough_laplacian(Xj), mg.rough_laplacian(Yj)
        JX, JY = mg.jacobi(Xj), mg.jacobi(Yj)
        det = _values(mg.geom.detg)
        rows = np.stack([
            _values(mg.inner(LX, Yj)) * det,
            _values(mg.inner(Xj, LY)) * det,
            _values(mg.inner(JX, Yj)) * det,
            _values(mg.inner(Xj, JY)) * det,
            _values(mg.inner(LX, Xj)) * det,
        ])
        full = np.zeros((5, spec.y_samples))
        full[:, inside] = rows
        return full

    xs, ws = _x_rule(map.fs, spec.x_resolution)
    vol_bn = unit_ball_volume(map.fs.dim)
    for node_index, (x, w) in enumerate(zip(xs, ws)):
        y, inside, radius = _fiber_samples(map.fs, x, spec, node_index)
        full = node_values(x, y, inside)
        ball_vol = vol_bn * radius ** map.fs.dim
        factor = w * ball_vol / vol_bn
        sums += factor * full.mean(axis=1)
        variances += factor ** 2 * full.var(axis=1, ddof=1) / spec.y_samples
    stderrs = np.sqrt(variances)
    return {
        "laplacian_gap": abs(sums[0] - sums[1]),
        "jacobi_gap": abs(sums[2] - sums[3]),
        "laplacian_xy": sums[0], "laplacian_yx": sums[1],
        "jacobi_xy": sums[2], "jacobi_yx": sums[3],
        "positivity": sums[4],
        "stderr": float(np.max(stderrs)),
    }


def hessian_form(map: SmoothMap, V1: PullbackSection, V2: PullbackSection,
                 spec: QuadratureSpec) -> FunctionalEstimate:
    """H(V₁, V₂) = ∫_{BM} hessian integrand."""

    def node_values(x, y):
        mg = MapGeometry(map, x, y, 8, codomain_order=3)
        return np.asarray(mg.hessian_integrand(V1.jets(mg), V2.jets(mg))) \
            * _values(mg.geom.detg)

    return _assemble(node_values, map.fs, spec, structure_hash=_map_hash(map))


def second_variation_check(family: VariationFamily, spec: QuadratureSpec,
                           h: float = 1e-3, bitension_tol: float = 1e-6) -> VariationCheck:
    """∂²E₂/∂ε₁∂ε₂ by the 4-corner mixed central difference against the
    integrated Hessian form; also reports the H(V₁,V₂) − H(V₂,V₁) gap."""
    base = family.base
    # prerequisite: base map numerically biharmonic at sample points
    rng = np.random.default_rng(99)
    box = base.fs.chart.sample_box()
    for _ in range(5):
        x = np.array([rng.uniform(lo, hi) for lo, hi in box])
        y = rng.normal(size=base.fs.dim)
        y /= np.linalg.norm(y)
        mg = MapGeometry(base, x, y, 6, codomain_order=2)
        t2 = float(np.max(np.abs(_values(mg.bitension))))
        if t2 > bitension_tol:
            raise ConfigError(f"base map is not biharmonic at tolerance: |tau2| = {t2:.3e}")

    def e2(e1, e2_):
        return bienergy(family.map_at(e1, e2_), spec).value

    fd = (e2(h, h) - e2(h, -h) - e2(-h, h) + e2(-h, -h)) / (4 * h * h)
    V1 = PullbackSection(family.deviation_field(1))
    V2 = PullbackSection(family.deviation_field(2))
    h12 = hessian_form(base, V1, V2, spec)
    h21 = hessian_form(base, V2, V1, spec)
    return VariationCheck(fd=fd, analytic=h12.value, gap=abs(fd - h12.value),
                          stderr=h12.stderr,
                          extras={"symmetry_gap": abs(h12.value - h21.value),
                                  "h21": h21.value})


def divergence_theorem_check(fs: FinslerStructure, X, spec: QuadratureSpec,
                             f=None) -> dict:
    """∫_{BM} div X (and optionally ∫ Δf), both expected to vanish."""
    names = list(fs.xnames) + list(fs.ynames)
    X_asts = [c if isinstance(c, ex.Node) else ex.parse(c, names) for c in X]

    def div_values(x, y):
        geom = DomainGeometry(fs, x, y, 5)
        jets = [jt.eval_ast(a, geom.env) for a in X_asts]
        return np.asarray(_values(geom.divergence_of(jets))) * _values(geom.detg)

    div_est = _assemble(div_values, fs, spec,
                        structure_hash=_hash_of(fs.label, "div"))
    out = {"divergence_integral": div_est.value, "divergence_stderr": div_est.stderr}
    if f is not None:
        f_ast = f if isinstance(f, ex.Node) else ex.parse(f, names)

        def lap_values(x, y):
            geom = DomainGeometry(fs, x, y, 6)
            return np.asarray(_values(geom.horizontal_laplacian_of(jt.eval_ast(f_ast, geom.env)))) \
                * _values(geom.detg)

        lap_est = _assemble(lap_values, fs, spec,
                            structure_hash=_hash_of(fs.label, "lap"))
        out.update({"laplacian_integral": lap_est.value,
                    "laplacian_stderr": lap_est.stderr})
    return out
