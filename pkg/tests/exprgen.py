"""Seeded random expression trees for parser and derivative tests."""

import numpy as np

from opvg import exprdsl as ex

SAFE_FNS = ("sin", "cos", "exp", "sinh", "cosh", "tan", "log", "sqrt")


def random_expr(rng, coords, consts=(), depth=5, allow_conj=False):
    """Raw AST (no simplification), so printed text parses back to the same tree."""
    if depth <= 0 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.5:
            i = int(rng.integers(len(coords)))
            return ex.Coord(i, coords[i])
        if r < 0.75 or not consts:
            return ex.RealLit(float(np.round(rng.uniform(0.1, 3.0), 3)))
        return ex.AConst(consts[int(rng.integers(len(consts)))])
    sub = lambda: random_expr(rng, coords, consts, depth - 1, allow_conj)  # noqa: E731
    kind = rng.choice(["add", "sub", "mul", "div", "neg", "pow", "call"])
    if kind == "add":
        return ex.Add(sub(), sub())
    if kind == "sub":
        return ex.Sub(sub(), sub())
    if kind == "mul":
        return ex.Mul(sub(), sub())
    if kind == "div":
        return ex.Div(sub(), _positive(sub()))
    if kind == "neg":
        return ex.Neg(sub())
    if kind == "pow":
        k = int(rng.integers(-2, 4))
        base = sub() if k >= 0 else _positive(sub())
        return ex.IntPow(base, k)
    fns = SAFE_FNS + (("conj",) if allow_conj else ())
    fn = str(rng.choice(fns))
    arg = sub()
    if fn in ("log", "sqrt"):
        arg = _positive(arg)
    elif fn in ("exp", "sinh", "cosh"):
        arg = ex.Call("sin", arg)
    elif fn == "tan":
        arg = ex.Mul(ex.RealLit(0.5), ex.Call("sin", arg))
    return ex.Call(fn, arg)


def _positive(e):
    """1.5 + e^2 is positive for real e."""
    return ex.Add(ex.RealLit(1.5), ex.IntPow(e, 2))
