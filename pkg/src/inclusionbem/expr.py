"""Scalar expressions for the nonlinear data F, G and auxiliary profiles.

Grammar (recursive descent)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' int)?
    base   := number | name | func '(' expr ')' | '(' expr ')'

Evaluation is vectorised over numpy arrays.  ``jet`` evaluation carries
exact first and second partial derivatives in two active variables using
truncated second-order Taylor arithmetic.
"""

import math
import re

import numpy as np

from .errors import AssumptionError, ExprDomainError, ExprSyntaxError, NoRootError

DEFAULT_VARIABLES = ("eps", "zeta", "t1", "t2", "t3")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "neg")
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[off]!r}", off)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


# AST nodes -------------------------------------------------------------------

class Node:
    span = (0, 0)


class Num(Node):
    def __init__(self, value):
        self.value = value


class Var(Node):
    def __init__(self, name):
        self.name = name


class BinOp(Node):
    def __init__(self, op, left, right):
        self.op, self.left, self.right = op, left, right


class Pow(Node):
    def __init__(self, base, n):
        self.base, self.n = base, n


class Call(Node):
    def __init__(self, fn, arg):
        self.fn, self.arg = fn, arg


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = set(variables)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value:
            got = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, got {got}", off)

    def spanned(self, node, start):
        node.span = (start, self.toks[self.i - 1][2] + len(self.toks[self.i - 1][1]))
        return node

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off)
        return node

    def expr(self):
        start = self.peek()[2]
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = self.spanned(BinOp(op, node, self.term()), start)
        return node

    def term(self):
        start = self.peek()[2]
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = self.spanned(BinOp(op, node, self.unary()), start)
        return node

    def unary(self):
        start = self.peek()[2]
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return self.spanned(Call("neg", self.unary()), start)
        return self.factor()

    def factor(self):
        start = self.peek()[2]
        node = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, val, off = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("non-integer exponent", off)
            node = self.spanned(Pow(node, sign * int(val)), start)
        return node

    def base(self):
        kind, val, off = self.take()
        if kind == "num":
            return self.spanned(Num(float(val)), off)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return self.spanned(Call(val, arg), off)
            if val in CONSTANTS:
                return self.spanned(Num(CONSTANTS[val]), off)
            if val not in self.variables:
                raise ExprSyntaxError(f"unknown identifier {val!r}", off)
            return self.spanned(Var(val), off)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {got}", off)


# second-order jets -------------------------------------------------------------

class Jet:
    """Value with first and second partials in two active variables a, b."""

    __slots__ = ("v", "a", "b", "aa", "ab", "bb")

    def __init__(self, v, a=0.0, b=0.0, aa=0.0, ab=0.0, bb=0.0):
        self.v, self.a, self.b, self.aa, self.ab, self.bb = v, a, b, aa, ab, bb

    def __add__(self, o):
        return Jet(self.v + o.v, self.a + o.a, self.b + o.b,
                   self.aa + o.aa, self.ab + o.ab, self.bb + o.bb)

    def __sub__(self, o):
        return Jet(self.v - o.v, self.a - o.a, self.b - o.b,
                   self.aa - o.aa, self.ab - o.ab, self.bb - o.bb)

    def __mul__(self, o):
        return Jet(self.v * o.v,
                   self.a * o.v + self.v * o.a,
                   self.b * o.v + self.v * o.b,
                   self.aa * o.v + 2.0 * self.a * o.a + self.v * o.aa,
                   self.ab * o.v + self.a * o.b + self.b * o.a + self.v * o.ab,
                   self.bb * o.v + 2.0 * self.b * o.b + self.v * o.bb)

    def chain(self, f, df, d2f):
        """Compose with a scalar function given its value and derivatives at v."""
        return Jet(f, df * self.a, df * self.b,
                   d2f * self.a * self.a + df * self.aa,
                   d2f * self.a * self.b + df * self.ab,
                   d2f * self.b * self.b + df * self.bb)


def _domain(ok, node, text, what):
    if not np.all(ok):
        a, b = node.span
        raise ExprDomainError(f"{what} in '{text[a:b]}'")


def _unary(fn, x, node, text, deriv):
    """Value and (optionally) first two derivatives of a library function."""
    if fn == "neg":
        return -x, -1.0, 0.0
    if fn == "sin":
        s, c = np.sin(x), np.cos(x)
        return s, c, -s
    if fn == "cos":
        s, c = np.sin(x), np.cos(x)
        return c, -s, -c
    if fn == "exp":
        e = np.exp(x)
        return e, e, e
    if fn == "tanh":
        t = np.tanh(x)
        d = 1.0 - t * t
        return t, d, -2.0 * t * d
    if fn == "log":
        _domain(x > 0, node, text, "log of non-positive value")
        return np.log(x), 1.0 / x, -1.0 / (x * x)
    if fn == "sqrt":
        if deriv:
            _domain(x > 0, node, text, "sqrt of non-positive value")
        else:
            _domain(x >= 0, node, text, "sqrt of negative value")
        r = np.sqrt(x)
        with np.errstate(divide="ignore"):
            return r, 0.5 / r, -0.25 / (r * x)
    raise AssertionError(fn)


class ExprFn:
    """Parsed expression; immutable and safe to evaluate concurrently."""

    def __init__(self, text, variables=DEFAULT_VARIABLES):
        self.text = text
        self.variables = tuple(variables)
        self.root = _Parser(text, variables).parse()

    def __repr__(self):
        return f"ExprFn({self.text!r})"

    def _bind(self, env):
        missing = [v for v in self.used() if v not in env]
        if missing:
            raise KeyError(f"no value for variable(s) {missing} in {self.text!r}")

    def used(self):
        out = set()

        def walk(n):
            if isinstance(n, Var):
                out.add(n.name)
            for c in ("left", "right", "base", "arg"):
                if hasattr(n, c):
                    walk(getattr(n, c))
        walk(self.root)
        return out

    def __call__(self, **env):
        self._bind(env)
        return np.asarray(self._eval(self.root, env), dtype=float) + 0.0 * _shape_hint(env)

    def _eval(self, n, env):
        if isinstance(n, Num):
            return n.value
        if isinstance(n, Var):
            return np.asarray(env[n.name], dtype=float)
        if isinstance(n, BinOp):
            x, y = self._eval(n.left, env), self._eval(n.right, env)
            if n.op == "+":
                return x + y
            if n.op == "-":
                return x - y
            if n.op == "*":
                return x * y
            _domain(np.asarray(y) != 0, n, self.text, "division by zero")
            return x / y
        if isinstance(n, Pow):
            x = self._eval(n.base, env)
            if n.n < 0:
                _domain(np.asarray(x) != 0, n, self.text, "division by zero")
            return x ** float(n.n) if n.n >= 0 else 1.0 / x ** float(-n.n)
        if isinstance(n, Call):
            return _unary(n.fn, self._eval(n.arg, env), n.arg, self.text, False)[0]
        raise AssertionError(n)

    def jet(self, active=("eps", "zeta"), **env):
        """Evaluate with second-order partials in the two ``active`` variables."""
        self._bind(env)
        hint = _shape_hint(env)
        j = self._jet(self.root, env, active)
        z = np.zeros_like(hint)
        return Jet(*(np.asarray(c, dtype=float) + z for c in (j.v, j.a, j.b, j.aa, j.ab, j.bb)))

    def _jet(self, n, env, active):
        if isinstance(n, Num):
            return Jet(n.value)
        if isinstance(n, Var):
            v = np.asarray(env[n.name], dtype=float)
            if n.name == active[0]:
                return Jet(v, a=1.0)
            if n.name == active[1]:
                return Jet(v, b=1.0)
            return Jet(v)
        if isinstance(n, BinOp):
            x, y = self._jet(n.left, env, active), self._jet(n.right, env, active)
            if n.op == "+":
                return x + y
            if n.op == "-":
                return x - y
            if n.op == "*":
                return x * y
            _domain(np.asarray(y.v) != 0, n, self.text, "division by zero")
            inv = 1.0 / y.v
            return x * y.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
        if isinstance(n, Pow):
            x = self._jet(n.base, env, active)
            k = n.n
            if k == 0:
                return Jet(1.0)
            if k < 0:
                _domain(np.asarray(x.v) != 0, n, self.text, "division by zero")
            v = np.asarray(x.v, dtype=float)
            return x.chain(v ** float(k), k * v ** float(k - 1), k * (k - 1) * v ** float(k - 2)
                           if k != 1 else 0.0)
        if isinstance(n, Call):
            x = self._jet(n.arg, env, active)
            return x.chain(*_unary(n.fn, x.v, n.arg, self.text, True))
        raise AssertionError(n)


def _shape_hint(env):
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
    return np.zeros(shape)


def parse_expr(text, variables=DEFAULT_VARIABLES):
    return ExprFn(text, variables)


def _t_env(t):
    t = np.asarray(t, dtype=float)
    return {"t1": t[..., 0], "t2": t[..., 1], "t3": t[..., 2]}


def eval_with_partials(f, eps, t, zeta):
    """(value, d_eps, d_zeta, d2_eps, d_eps d_zeta, d2_zeta) of f at (eps, t, zeta)."""
    j = f.jet(("eps", "zeta"), eps=eps, zeta=zeta, **_t_env(t))
    return j.v, j.a, j.b, j.aa, j.ab, j.bb


def nemytskii(H, eps, t, v):
    """Node-wise superposition t -> H(eps, t, v(t))."""
    return H(eps=eps, zeta=v, **_t_env(t))


def nemytskii_dzeta(H, eps, t, v):
    """Node-wise derivative t -> (d_zeta H)(eps, t, v(t)); the differential of
    the superposition operator in v acts by multiplication with this."""
    return eval_with_partials(H, eps, t, v)[2]


_TAU, _TAU_W = np.polynomial.legendre.leggauss(16)
_TAU = 0.5 * (_TAU + 1.0)
_TAU_W = 0.5 * _TAU_W


def tau_rule():
    """16-point Gauss-Legendre rule on [0, 1]."""
    return _TAU, _TAU_W


def f_tilde(F, eps, t, a, b):
    """Integral-form second-order Taylor remainder of eps -> F(eps, t, a + eps b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = 0.0
    for tau, w in zip(_TAU, _TAU_W):
        _, _, _, fee, fez, fzz = eval_with_partials(F, tau * eps, t, a + tau * eps * b)
        total = total + w * (1.0 - tau) * (fee + 2.0 * b * fez + b * b * fzz)
    return total


def find_zeta_i(F, target, nodes, tol=1e-9):
    """Root zeta^i of F(0, t, .) = target, checked to be uniform over ``nodes``.

    Returns (zeta_i, dzeta_F0) where dzeta_F0 is the (constant, positive)
    value of d_zeta F(0, t, zeta_i).
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    t0 = nodes[0]

    def g(z):
        return float(F(eps=0.0, zeta=z, **_t_env(t0))) - target

    root = None
    bound = 1.0
    while root is None and bound <= 2.0 ** 40:
        zs = np.linspace(-bound, bound, 129)
        gs = np.array([g(z) for z in zs])
        hits = np.flatnonzero(gs == 0.0)
        changes = np.flatnonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)
        cands = [(abs(zs[i]), zs[i], zs[i]) for i in hits]
        cands += [(abs(0.5 * (zs[i] + zs[i + 1])), zs[i], zs[i + 1]) for i in changes]
        if cands:
            _, lo, hi = min(cands)
            root = lo if lo == hi else _bisect_secant(g, lo, hi)
        bound *= 2.0
    if root is None:
        raise NoRootError(f"F(0, t, zeta) = {target} has no root in [-2^40, 2^40]")
    resid = g(root)
    if abs(resid) > 1e-13 * max(1.0, abs(target)):
        raise NoRootError(f"root iteration stalled with residual {resid:.3e}")

    val, _, dz, _, _, _ = eval_with_partials(F, 0.0, nodes, np.full(len(nodes), root))
    if np.std(dz) > tol:
        raise AssumptionError("d_zeta F(0, t, zeta_i) is not constant in t", "zetai-nonconstant")
    if np.max(np.abs(val - target)) > tol:
        raise AssumptionError("F(0, t, zeta_i) depends on t", "zetai-mismatch")
    dz0 = float(np.mean(dz))
    if dz0 <= 0:
        raise AssumptionError(f"d_zeta F(0, t, zeta_i) = {dz0:g} is not positive", "zetai-nonpositive")
    return float(root), dz0


def _bisect_secant(g, lo, hi):
    from scipy.optimize import brentq
    return brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
