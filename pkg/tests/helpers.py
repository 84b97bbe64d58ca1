"""Shared test utilities: random smooth expressions and finite-difference
oracles for jet coefficients."""

import numpy as np

from finvar import expressions as ex


def random_expression(rng, names, depth=3):
    """A random expression that is smooth and well-scaled on [-0.8, 0.8]^n."""
    def leaf():
        if rng.uniform() < 0.7:
            return ex.Var(names[rng.integers(len(names))])
        return ex.Const(round(float(rng.uniform(-2, 2)), 3))

    def build(d):
        if d == 0:
            return leaf()
        roll = rng.uniform()
        if roll < 0.45:
            op = rng.choice(["+", "-", "*"])
            return ex.BinOp(op, build(d - 1), build(d - 1))
        if roll < 0.6:
            # denominators kept away from zero
            return ex.BinOp("/", build(d - 1),
                            ex.BinOp("+", ex.Const(2.0),
                                     ex.Func("sin", build(d - 1))))
        if roll < 0.75:
            inner = ex.BinOp("*", ex.Const(0.4), build(d - 1))
            return ex.Pow(ex.BinOp("+", ex.Const(1.5), ex.Func("cos", inner)),
                          float(rng.integers(2, 4)))
        fn = rng.choice(["sin", "cos", "exp", "atan"])
        # damp the argument so high-order derivatives stay comparable to the
        # value; keeps the finite-difference oracle in its accurate regime
        inner = ex.BinOp("*", ex.Const(0.4 if fn != "exp" else 0.3), build(d - 1))
        return ex.Func(fn, inner)

    return build(depth)


def fd_partial(f, point, mu, h):
    """Nested central differences for the mixed partial given by multi-index mu."""
    active = [i for i, k in enumerate(mu) for _ in range(k)]
    if not active:
        return f(point)
    i = active[0]
    rest = list(mu)
    rest[i] -= 1
    up = list(point)
    up[i] += h
    dn = list(point)
    dn[i] -= h
    return (fd_partial(f, up, rest, h) - fd_partial(f, dn, rest, h)) / (2 * h)


def richardson_partial(f, point, mu, h):
    """Fourth-order Richardson extrapolation of the central-difference partial."""
    coarse = fd_partial(f, point, mu, h)
    fine = fd_partial(f, point, mu, h / 2)
    return (4.0 * fine - coarse) / 3.0


def richardson2_partial(f, point, mu, h):
    """Sixth-order (two-level Richardson) central-difference partial."""
    def level1(step):
        return (4.0 * fd_partial(f, point, mu, step / 2)
                - fd_partial(f, point, mu, step)) / 3.0
    return (16.0 * level1(h / 2) - level1(h)) / 15.0


def multi_indices(nvars, max_order):
    """All multi-indices with 1 <= |mu| <= max_order."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == nvars:
            if sum(prefix) >= 1:
                out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k)

    rec([], max_order)
    return out
