"""Smooth scalar fields with exact first and second derivatives.

Fields are written in a small expression language over the coordinates
``x1 .. xN``::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x'k | func '(' expr ')' | '(' expr ')' | '-' base

with ``func`` one of ``sin, cos, exp, sqrt, log`` and integer (possibly
negative) exponents only.  Parsing builds an expression tree; gradients and
Hessians are produced by symbolic differentiation of that tree, so they are
exact up to floating-point rounding — no finite differencing anywhere.

The second half of the module evaluates the continuum quantities that the
discrete operators are measured against: the density-weighted Laplacian
``lap(u) + 2 grad(phi).grad(u) / phi``, the normalized infinity Laplacian,
and their (p, N)-weighted combination ``p_target``.
"""

import numpy as np

__all__ = [
    "ExpressionError",
    "SmoothField",
    "parse_expression",
    "kappa2",
    "KAPPA_INF",
    "kappa",
    "TargetConstants",
    "target_constants",
    "weighted_laplacian",
    "infinity_laplacian",
    "p_target",
    "manufactured_f",
    "GRADIENT_FLOOR",
]

# Gradient norms at or below this are treated as singular points of the
# normalized infinity Laplacian.
GRADIENT_FLOOR = 1e-12

# Minimum gradient norm demanded of a manufactured solution on its probe grid.
MANUFACTURED_GRADIENT_FLOOR = 1e-3


class ExpressionError(ValueError):
    """Raised for malformed expression text; carries the offending position."""

    def __init__(self, message, pos):
        super().__init__("%s (position %d)" % (message, pos))
        self.pos = pos


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------

class _Num:
    __slots__ = ("c",)

    def __init__(self, c):
        self.c = float(c)

    def eval(self, x):
        return self.c

    def deriv(self, k):
        return _Num(0.0)

    def text(self):
        return repr(self.c)


class _Var:
    __slots__ = ("k",)

    def __init__(self, k):
        self.k = k

    def eval(self, x):
        return x[..., self.k]

    def deriv(self, k):
        return _Num(1.0) if k == self.k else _Num(0.0)

    def text(self):
        return "x%d" % (self.k + 1)


class _Bin:
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = a
        self.b = b


class _Add(_Bin):
    def eval(self, x):
        return self.a.eval(x) + self.b.eval(x)

    def deriv(self, k):
        return _add(self.a.deriv(k), self.b.deriv(k))

    def text(self):
        return "(%s + %s)" % (self.a.text(), self.b.text())


class _Sub(_Bin):
    def eval(self, x):
        return self.a.eval(x) - self.b.eval(x)

    def deriv(self, k):
        return _sub(self.a.deriv(k), self.b.deriv(k))

    def text(self):
        return "(%s - %s)" % (self.a.text(), self.b.text())


class _Mul(_Bin):
    def eval(self, x):
        return self.a.eval(x) * self.b.eval(x)

    def deriv(self, k):
        return _add(_mul(self.a.deriv(k), self.b),
                    _mul(self.a, self.b.deriv(k)))

    def text(self):
        return "(%s * %s)" % (self.a.text(), self.b.text())


class _Div(_Bin):
    def eval(self, x):
        return self.a.eval(x) / self.b.eval(x)

    def deriv(self, k):
        num = _sub(_mul(self.a.deriv(k), self.b),
                   _mul(self.a, self.b.deriv(k)))
        return _div(num, _pow(self.b, 2))

    def text(self):
        return "(%s / %s)" % (self.a.text(), self.b.text())


class _Pow:
    __slots__ = ("a", "n")

    def __init__(self, a, n):
        self.a = a
        self.n = n

    def eval(self, x):
        return self.a.eval(x) ** self.n

    def deriv(self, k):
        return _mul(_mul(_Num(self.n), _pow(self.a, self.n - 1)),
                    self.a.deriv(k))

    def text(self):
        return "(%s^%d)" % (self.a.text(), self.n)


_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "log": np.log,
}


class _Call:
    __slots__ = ("name", "a")

    def __init__(self, name, a):
        self.name = name
        self.a = a

    def eval(self, x):
        return _FUNCS[self.name](self.a.eval(x))

    def deriv(self, k):
        da = self.a.deriv(k)
        if self.name == "sin":
            outer = _Call("cos", self.a)
        elif self.name == "cos":
            outer = _mul(_Num(-1.0), _Call("sin", self.a))
        elif self.name == "exp":
            outer = _Call("exp", self.a)
        elif self.name == "sqrt":
            outer = _div(_Num(0.5), _Call("sqrt", self.a))
        else:  # log
            outer = _div(_Num(1.0), self.a)
        return _mul(outer, da)

    def text(self):
        return "%s(%s)" % (self.name, self.a.text())


def _is_num(node, value=None):
    return isinstance(node, _Num) and (value is None or node.c == value)


# Smart constructors do light constant folding so derivative trees stay small.

def _add(a, b):
    if _is_num(a) and _is_num(b):
        return _Num(a.c + b.c)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return _Add(a, b)


def _sub(a, b):
    if _is_num(a) and _is_num(b):
        return _Num(a.c - b.c)
    if _is_num(b, 0.0):
        return a
    return _Sub(a, b)


def _mul(a, b):
    if _is_num(a) and _is_num(b):
        return _Num(a.c * b.c)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return _Mul(a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return _Num(0.0)
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b) and b.c != 0.0:
        return _Num(a.c / b.c)
    return _Div(a, b)


def _pow(a, n):
    if n == 0:
        return _Num(1.0)
    if n == 1:
        return a
    if _is_num(a):
        return _Num(a.c ** n)
    return _Pow(a, n)


def _collect_ops(node, acc):
    if isinstance(node, _Div):
        acc.add("div")
    elif isinstance(node, _Pow) and node.n < 0:
        acc.add("div")
    elif isinstance(node, _Call) and node.name in ("sqrt", "log"):
        acc.add(node.name)
    for attr in ("a", "b"):
        child = getattr(node, attr, None)
        if child is not None and not isinstance(child, (int, float)):
            _collect_ops(child, acc)
    return acc


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

def _tokenize(text):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            toks.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^()":
            toks.append((ch, ch, i))
            i += 1
            continue
        raise ExpressionError("unexpected character %r" % ch, i)
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text, dim):
        self.toks = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            raise ExpressionError(
                "expected %s, found %r" % (kind, tok[1] or "end of input"),
                tok[2])
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError("unexpected %r" % tok[1], tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            node = _add(node, rhs) if op == "+" else _sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.factor()
            node = _mul(node, rhs) if op == "*" else _div(node, rhs)
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "-":
                self.take()
                sign = -1
            elif self.peek()[0] == "+":
                self.take()
            tok = self.peek()
            if tok[0] != "num" or any(c in tok[1] for c in ".eE"):
                raise ExpressionError("integer exponent expected", tok[2])
            self.take()
            node = _pow(node, sign * int(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        if tok[0] == "-":
            self.take()
            return _sub(_Num(0.0), self.base())
        if tok[0] == "num":
            self.take()
            return _Num(float(tok[1]))
        if tok[0] == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if tok[0] == "ident":
            self.take()
            name = tok[1]
            if name in _FUNCS:
                self.take("(")
                node = self.expr()
                self.take(")")
                return _Call(name, node)
            if len(name) >= 2 and name[0] == "x" and name[1:].isdigit():
                k = int(name[1:])
                if not 1 <= k <= self.dim:
                    raise ExpressionError(
                        "coordinate %s out of range for dimension %d"
                        % (name, self.dim), tok[2])
                return _Var(k - 1)
            raise ExpressionError("unknown identifier %r" % name, tok[2])
        raise ExpressionError(
            "expected a value, found %r" % (tok[1] or "end of input"), tok[2])


# ---------------------------------------------------------------------------
# SmoothField
# ---------------------------------------------------------------------------

def _as_points(x, dim):
    """Coerce x to an (m, dim) float array; report whether input was a point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError("point has dimension %d, field expects %d"
                             % (arr.shape[0], dim))
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError("expected shape (m, %d), got %r" % (dim, arr.shape))
    return arr, False


class SmoothField:
    """A twice-differentiable scalar field on R^dim.

    Construct with :func:`parse_expression`.  ``value``, ``gradient`` and
    ``hessian`` accept a single point of shape ``(dim,)`` or a batch of shape
    ``(m, dim)`` and return correspondingly shaped results.  The Hessian is
    exactly symmetric: entry (j, i) is evaluated from the same derivative
    tree as (i, j).
    """

    def __init__(self, root, dim, source=""):
        self.root = root
        self.dim = dim
        self.source = source
        self.singular_ops = frozenset(_collect_ops(root, set()))
        self._grad = None
        self._hess = None

    def _grad_trees(self):
        if self._grad is None:
            self._grad = [self.root.deriv(k) for k in range(self.dim)]
        return self._grad

    def _hess_trees(self):
        if self._hess is None:
            g = self._grad_trees()
            h = [[None] * self.dim for _ in range(self.dim)]
            for i in range(self.dim):
                for j in range(i, self.dim):
                    h[i][j] = g[i].deriv(j)
                    h[j][i] = h[i][j]
            self._hess = h
        return self._hess

    def value(self, x):
        pts, single = _as_points(x, self.dim)
        out = np.broadcast_to(np.asarray(self.root.eval(pts), dtype=float),
                              (pts.shape[0],))
        return float(out[0]) if single else np.array(out)

    def gradient(self, x):
        pts, single = _as_points(x, self.dim)
        m = pts.shape[0]
        cols = [np.broadcast_to(np.asarray(t.eval(pts), dtype=float), (m,))
                for t in self._grad_trees()]
        out = np.stack(cols, axis=-1)
        return out[0] if single else out

    def hessian(self, x):
        pts, single = _as_points(x, self.dim)
        m = pts.shape[0]
        h = self._hess_trees()
        out = np.empty((m, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(i, self.dim):
                vals = np.broadcast_to(
                    np.asarray(h[i][j].eval(pts), dtype=float), (m,))
                out[:, i, j] = vals
                out[:, j, i] = vals
        return out[0] if single else out

    def laplacian(self, x):
        h = self.hessian(x)
        return np.trace(h, axis1=-2, axis2=-1)

    def __repr__(self):
        return "SmoothField(%r, dim=%d)" % (self.source or self.root.text(),
                                            self.dim)


def parse_expression(text, dim):
    """Parse expression text into a :class:`SmoothField` on R^dim.

    Parameters
    ----------
    text : str
        Expression in the module grammar, e.g. ``"x1 + 0.2*x1^2"`` or
        ``"exp(x1*x2) / (1 + x2^2)"``.
    dim : int
        Ambient dimension N; coordinates ``x1 .. xN`` are available.

    Raises
    ------
    ExpressionError
        On any syntax problem, with the character position attached.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    root = _Parser(text, dim).parse()
    return SmoothField(root, dim, source=text)


# ---------------------------------------------------------------------------
# Continuum targets
# ---------------------------------------------------------------------------

def kappa2(dim):
    """Scale carried by the neighborhood-average part: 1 / (2 (N + 2))."""
    return 1.0 / (2.0 * (dim + 2.0))


#: Scale carried by the min+max part.
KAPPA_INF = 0.5


def kappa(dim, p):
    """Combined scale 1 / (2 (N + p)) multiplying the continuum operator."""
    return 1.0 / (2.0 * (dim + p))


class TargetConstants:
    """Bundle of the three consistency scales for a given (N, p)."""

    __slots__ = ("kappa2", "kappa_inf", "kappa")

    def __init__(self, dim, p):
        self.kappa2 = kappa2(dim)
        self.kappa_inf = KAPPA_INF
        self.kappa = kappa(dim, p)

    def __repr__(self):
        return ("TargetConstants(kappa2=%r, kappa_inf=%r, kappa=%r)"
                % (self.kappa2, self.kappa_inf, self.kappa))


def target_constants(params):
    """Consistency scales for ``params`` (anything with .dim and .p)."""
    return TargetConstants(params.dim, params.p)


def weighted_laplacian(phi, u, x):
    """Density-weighted Laplacian ``lap(u) + 2 grad(phi).grad(u) / phi``.

    Equals ``phi^-2 div(phi^2 grad(u))`` wherever phi > 0.  Accepts a point
    ``(N,)`` or batch ``(m, N)``; raises ValueError if phi is not strictly
    positive at any evaluation point.
    """
    pts, single = _as_points(x, u.dim)
    pv = np.atleast_1d(np.asarray(phi.value(pts), dtype=float))
    if np.any(pv <= 0.0):
        raise ValueError("density must be strictly positive at the "
                         "evaluation point")
    lap = np.trace(u.hessian(pts), axis1=-2, axis2=-1)
    cross = np.einsum("mi,mi->m", phi.gradient(pts), u.gradient(pts))
    out = lap + 2.0 * cross / pv
    return float(out[0]) if single else out


def infinity_laplacian(u, x):
    """Normalized infinity Laplacian ``sum_ij u_ij u_i u_j / |grad u|^2``.

    Raises ValueError at points where ``|grad u| <= 1e-12`` (singular point
    of the normalization).
    """
    pts, single = _as_points(x, u.dim)
    g = u.gradient(pts)
    den = np.einsum("mi,mi->m", g, g)
    if np.any(np.sqrt(den) <= GRADIENT_FLOOR):
        raise ValueError("vanishing gradient: the normalized infinity "
                         "Laplacian is singular here")
    h = u.hessian(pts)
    num = np.einsum("mij,mi,mj->m", h, g, g)
    out = num / den
    return float(out[0]) if single else out


def p_target(params, phi, u, x, scale=1.0):
    """Continuum target matched by the discrete operator on smooth fields.

    Returns ``scale * kappa(N, p) * (weighted_laplacian + (p - 2) *
    infinity_laplacian)`` evaluated at ``x``.  For p = 2 the infinity-
    Laplacian term is dropped entirely (its weight vanishes), so no
    nonvanishing-gradient condition is imposed there.

    Parameters
    ----------
    params : object with ``dim`` and ``p`` attributes
        Game parameters; p >= 2.
    phi, u : SmoothField
        Sampling density and test function.
    x : array
        Point ``(N,)`` or batch ``(m, N)``.
    scale : float, optional
        Extra multiplier on the whole target (normalization override).
    """
    dim, p = params.dim, params.p
    wl = weighted_laplacian(phi, u, x)
    if p == 2:
        combo = wl
    else:
        combo = wl + (p - 2.0) * infinity_laplacian(u, x)
    return scale * kappa(dim, p) * combo


class ManufacturedRHS:
    """Right-hand side manufactured from a known solution.

    ``value(x)`` evaluates ``p_target(params, phi, u_star, x, scale)``, so a
    Dirichlet problem driven by this field has ``u_star`` as its continuum
    solution.
    """

    def __init__(self, params, phi, u_star, scale):
        self.params = params
        self.phi = phi
        self.u_star = u_star
        self.scale = scale
        self.dim = u_star.dim

    def value(self, x):
        return p_target(self.params, self.phi, self.u_star, x, self.scale)

    def __repr__(self):
        return ("ManufacturedRHS(p=%r, u_star=%r)"
                % (self.params.p, self.u_star.source))


def manufactured_f(params, phi, u_star, domain, probes_per_axis=33,
                   scale=1.0):
    """Manufacture the forcing field whose exact solution is ``u_star``.

    Refuses (ValueError) if ``|grad u_star|`` drops below 1e-3 anywhere on a
    ``probes_per_axis``-per-axis grid over the closed domain: the target is
    singular where the gradient vanishes, and a manufactured problem built
    across such a point would not converge to anything meaningful.
    """
    lo, hi = domain.bounding_box()
    axes = [np.linspace(lo[k], hi[k], probes_per_axis)
            for k in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    inside = domain.contains(pts) | (domain.boundary_distance(pts) <= 1e-12)
    pts = pts[inside]
    if pts.shape[0] == 0:
        raise ValueError("probe grid missed the domain entirely; "
                         "raise probes_per_axis")
    g = u_star.gradient(pts)
    gmin = float(np.min(np.sqrt(np.einsum("mi,mi->m", g, g))))
    if gmin < MANUFACTURED_GRADIENT_FLOOR:
        raise ValueError(
            "cannot manufacture a forcing for this solution: |grad u*| falls "
            "to %.3e (< %.0e) on the probe grid" % (
                gmin, MANUFACTURED_GRADIENT_FLOOR))
    return ManufacturedRHS(params, phi, u_star, scale)
