"""Forward-mode truncated Taylor jets, batched over sample points.

A ``Jet`` stores the value of a tensor field together with its partial
derivatives up to some order (at most 3) at a batch of ``N`` points.  The
coefficient of order ``k`` has shape ``(N, n, ..., n, *shape)`` with ``k``
derivative axes directly after the batch axis, followed by the tensor axes.
Derivative axes are symmetric by construction.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 3


class JetError(ArithmeticError):
    """Raised when a jet operation hits a singular or non-finite value."""


def _ins(x, k):
    """Insert ``k`` singleton derivative axes after the batch axis."""
    if k == 0:
        return x
    return x.reshape(x.shape[:1] + (1,) * k + x.shape[1:])


def _sym2(x):
    return x + np.swapaxes(x, 1, 2)


def _perm(x, axes3):
    rest = tuple(range(4, x.ndim))
    return x.transpose((0,) + axes3 + rest)


def _sym3_left(x):
    # x[a,b,c] = A_ab B_c  ->  sum over the three placements of c
    return x + _perm(x, (1, 3, 2)) + _perm(x, (3, 1, 2))


def _sym3_right(x):
    # x[a,b,c] = A_a B_bc  ->  sum over the three placements of a
    return x + _perm(x, (2, 1, 3)) + _perm(x, (2, 3, 1))


def _leibniz(a, b, op):
    """Coefficients of a bilinear product of two truncated expansions."""
    order = min(len(a), len(b)) - 1
    out = [op(a[0], b[0])]
    if order >= 1:
        out.append(op(a[1], _ins(b[0], 1)) + op(_ins(a[0], 1), b[1]))
    if order >= 2:
        cross = op(a[1][:, :, None], b[1][:, None, :])
        out.append(op(a[2], _ins(b[0], 2)) + _sym2(cross) + op(_ins(a[0], 2), b[2]))
    if order >= 3:
        left = op(a[2][:, :, :, None], b[1][:, None, None, :])
        right = op(a[1][:, :, None, None], b[2][:, None, :, :])
        out.append(op(a[3], _ins(b[0], 3)) + _sym3_left(left) + _sym3_right(right)
                   + op(_ins(a[0], 3), b[3]))
    return out


def _compose(f, u):
    """Apply an elementwise function given its derivative values ``f``."""
    order = len(u) - 1
    out = [f[0]]
    if order >= 1:
        out.append(_ins(f[1], 1) * u[1])
    if order >= 2:
        uu = u[1][:, :, None] * u[1][:, None, :]
        out.append(_ins(f[2], 2) * uu + _ins(f[1], 2) * u[2])
    if order >= 3:
        uuu = u[1][:, :, None, None] * u[1][:, None, :, None] * u[1][:, None, None, :]
        mixed = _sym3_left(u[2][:, :, :, None] * u[1][:, None, None, :])
        out.append(_ins(f[3], 3) * uuu + _ins(f[2], 3) * mixed + _ins(f[1], 3) * u[3])
    return out


class Jet:
    """Tensor-valued truncated Taylor expansion at a batch of points."""

    __slots__ = ("c", "nvar")
    __array_priority__ = 1000

    def __init__(self, coeffs, nvar):
        self.c = [np.asarray(x, dtype=float) for x in coeffs]
        self.nvar = int(nvar)
        if len(self.c) - 1 > MAX_ORDER:
            raise ValueError("jet order above %d" % MAX_ORDER)

    # construction

    @classmethod
    def variable(cls, points, index, order):
        points = np.asarray(points, dtype=float)
        npts, nvar = points.shape
        coeffs = [points[:, index].copy()]
        if order >= 1:
            d1 = np.zeros((npts, nvar))
            d1[:, index] = 1.0
            coeffs.append(d1)
        for k in range(2, order + 1):
            coeffs.append(np.zeros((npts,) + (nvar,) * k))
        return cls(coeffs, nvar)

    @classmethod
    def constant(cls, value, npts, nvar, order):
        value = np.asarray(value, dtype=float)
        base = np.broadcast_to(value, (npts,) + value.shape).copy()
        coeffs = [base]
        for k in range(1, order + 1):
            coeffs.append(np.zeros((npts,) + (nvar,) * k + value.shape))
        return cls(coeffs, nvar)

    @classmethod
    def from_gradient(cls, value, grad):
        """Build a scalar-shaped jet from its value and the jet of its gradient.

        ``grad`` has tensor shape ``shape + (nvar,)``; the result has order
        ``grad.order + 1``.
        """
        coeffs = [np.asarray(value, dtype=float)]
        for k in range(grad.order + 1):
            g = np.moveaxis(grad.c[k], -1, 1)
            if k >= 1:
                g = _symmetrize(g, k + 1)
            coeffs.append(g)
        return cls(coeffs, grad.nvar)

    @classmethod
    def array(cls, nested):
        """Assemble a tensor jet from a nested list of same-shaped jets."""
        flat, shape = _flatten(nested)
        order = min(j.order for j in flat)
        nvar = flat[0].nvar
        coeffs = []
        for k in range(order + 1):
            stacked = np.stack([j.c[k] for j in flat], axis=-1)
            coeffs.append(stacked.reshape(stacked.shape[:-1] + shape))
        return cls(coeffs, nvar)

    # basic properties

    @property
    def order(self):
        return len(self.c) - 1

    @property
    def npts(self):
        return self.c[0].shape[0]

    @property
    def shape(self):
        return self.c[0].shape[1:]

    @property
    def value(self):
        return self.c[0]

    @property
    def d1(self):
        return self.c[1] if self.order >= 1 else None

    @property
    def d2(self):
        return self.c[2] if self.order >= 2 else None

    @property
    def d3(self):
        return self.c[3] if self.order >= 3 else None

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.c[: order + 1], self.nvar)

    def copy(self):
        return Jet([x.copy() for x in self.c], self.nvar)

    # linear structure

    def linear(self, fn):
        """Apply a linear map acting on the trailing tensor axes."""
        return Jet([fn(x) for x in self.c], self.nvar)

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet([x[(slice(None),) * (k + 1) + key] for k, x in enumerate(self.c)], self.nvar)

    def transpose(self, *perm):
        if len(perm) == 1 and isinstance(perm[0], (tuple, list)):
            perm = tuple(perm[0])
        out = []
        for k, x in enumerate(self.c):
            lead = tuple(range(k + 1))
            out.append(x.transpose(lead + tuple(k + 1 + p for p in perm)))
        return Jet(out, self.nvar)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet([x.reshape(x.shape[: k + 1] + shape) for k, x in enumerate(self.c)], self.nvar)

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return None

    def _pad_to(self, ndim):
        """Coefficients with trailing singleton axes so the tensor rank is at least ``ndim``."""
        extra = ndim - len(self.shape)
        if extra <= 0:
            return [x.copy() for x in self.c]
        return [x.reshape(x.shape + (1,) * extra) for x in self.c]

    def _pad_pair(self, other):
        a, b = self, other
        order = min(a.order, b.order)
        na, nb = len(a.shape), len(b.shape)
        ac, bc = a.c[: order + 1], b.c[: order + 1]
        if na < nb:
            ac = [x.reshape(x.shape + (1,) * (nb - na)) for x in ac]
        elif nb < na:
            bc = [x.reshape(x.shape + (1,) * (na - nb)) for x in bc]
        return ac, bc

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            out = self._pad_to(other.ndim)
            out[0] = out[0] + other
            return Jet(out, self.nvar)
        ac, bc = self._pad_pair(o)
        return Jet([x + y for x, y in zip(ac, bc)], self.nvar)

    __radd__ = __add__

    def __neg__(self):
        return Jet([-x for x in self.c], self.nvar)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            return Jet([x * other for x in self._pad_to(other.ndim)], self.nvar)
        ac, bc = self._pad_pair(o)
        return Jet(_leibniz(ac, bc, np.multiply), self.nvar)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if not float(n).is_integer():
            raise TypeError("only integer powers are supported")
        n = int(n)
        if n < 0:
            return (self ** (-n)).reciprocal()
        if n == 0:
            return Jet.constant(np.ones(self.shape), self.npts, self.nvar, self.order)
        result, base = None, self
        while n:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # elementwise functions

    def apply(self, derivs):
        """Compose with an elementwise function given as a list of derivative arrays."""
        return Jet(_compose(derivs, self.c), self.nvar)

    def reciprocal(self):
        v = self.c[0]
        if np.any(np.abs(v) < 1e-300) or not np.all(np.isfinite(v)):
            raise JetError("division by zero in jet evaluation")
        inv = 1.0 / v
        f = [inv, -inv ** 2, 2 * inv ** 3, -6 * inv ** 4][: self.order + 1]
        return self.apply(f)

    def sqrt(self):
        v = self.c[0]
        if np.any(v < 0):
            raise JetError("square root of a negative value")
        if self.order >= 1 and np.any(v <= 0):
            raise JetError("square root is not differentiable at zero")
        s = np.sqrt(v)
        with np.errstate(divide="ignore"):
            f = [s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)]
        return self.apply(f[: self.order + 1])

    def exp(self):
        e = np.exp(self.c[0])
        return self.apply([e] * (self.order + 1))

    def log(self):
        v = self.c[0]
        if np.any(v <= 0):
            raise JetError("logarithm of a non-positive value")
        f = [np.log(v), 1 / v, -1 / v ** 2, 2 / v ** 3]
        return self.apply(f[: self.order + 1])

    def sin(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        return self.apply([s, c, -s, -c][: self.order + 1])

    def cos(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        return self.apply([c, -s, -c, s][: self.order + 1])

    def sinh(self):
        s, c = np.sinh(self.c[0]), np.cosh(self.c[0])
        return self.apply([s, c, s, c][: self.order + 1])

    def cosh(self):
        s, c = np.sinh(self.c[0]), np.cosh(self.c[0])
        return self.apply([c, s, c, s][: self.order + 1])

    # calculus

    def grad(self):
        """Jet of the gradient; the derivative index is appended to the tensor axes."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        return Jet([np.moveaxis(self.c[k + 1], 1, -1) for k in range(self.order)], self.nvar)

    def restrict(self, indices):
        """Keep only derivatives with respect to the listed variables."""
        idx = np.asarray(indices)
        out = []
        for k, x in enumerate(self.c):
            for ax in range(1, k + 1):
                x = np.take(x, idx, axis=ax)
            out.append(x)
        return Jet(out, len(idx))

    def embed(self, nvar, indices):
        """View as a jet in ``nvar`` variables; derivatives along the others are zero."""
        idx = np.asarray(indices)
        out = []
        for k, x in enumerate(self.c):
            for ax in range(1, k + 1):
                shape = list(x.shape)
                shape[ax] = nvar
                y = np.zeros(shape)
                sl = [slice(None)] * x.ndim
                sl[ax] = idx
                y[tuple(sl)] = x
                x = y
            out.append(x)
        return Jet(out, nvar)

    def check_finite(self):
        for x in self.c:
            if not np.all(np.isfinite(x)):
                raise JetError("non-finite value in jet evaluation")
        return self

    def __repr__(self):
        return "Jet(order=%d, npts=%d, nvar=%d, shape=%s)" % (
            self.order, self.npts, self.nvar, self.shape)


def _symmetrize(x, k):
    """Average a coefficient over permutations of its ``k`` derivative axes."""
    if k <= 1:
        return x
    import itertools
    rest = tuple(range(k + 1, x.ndim))
    acc = np.zeros_like(x)
    perms = list(itertools.permutations(range(1, k + 1)))
    for p in perms:
        acc += x.transpose((0,) + p + rest)
    return acc / len(perms)


def _flatten(nested):
    if isinstance(nested, Jet):
        if nested.shape != ():
            raise ValueError("Jet.array expects scalar-shaped jets")
        return [nested], ()
    items = [_flatten(x) for x in nested]
    shapes = {s for _, s in items}
    if len(shapes) != 1:
        raise ValueError("ragged nested list in Jet.array")
    inner = shapes.pop()
    flat = [j for sub, _ in items for j in sub]
    return flat, (len(items),) + inner


# tensor helpers


def contract(spec, a, b):
    """Einsum-style contraction of two jets over their tensor axes.

    ``spec`` is written for the tensor axes only, e.g. ``"ij,jk->ik"``.
    Either operand may be a plain array (a constant tensor).
    """
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    full = "...%s,...%s->...%s" % (sa, sb, out)
    if not isinstance(a, Jet):
        arr = np.asarray(a, dtype=float)
        return b.linear(lambda x: np.einsum(full, arr, x))
    if not isinstance(b, Jet):
        arr = np.asarray(b, dtype=float)
        return a.linear(lambda x: np.einsum(full, x, arr))
    order = min(a.order, b.order)
    coeffs = _leibniz(a.c[: order + 1], b.c[: order + 1],
                      lambda x, y: np.einsum(full, x, y))
    return Jet(coeffs, a.nvar)


def einsum1(spec, a):
    """Single-operand einsum on the tensor axes (traces, permutations)."""
    lhs, out = spec.split("->")
    full = "...%s->...%s" % (lhs, out)
    return a.linear(lambda x: np.einsum(full, x))


def inverse(m):
    """Jet of the inverse of a matrix-valued jet (last two tensor axes)."""
    m0 = m.c[0]
    try:
        x0 = np.linalg.inv(m0)
    except np.linalg.LinAlgError as exc:
        raise JetError("singular matrix in jet inversion") from exc
    if not np.all(np.isfinite(x0)):
        raise JetError("singular matrix in jet inversion")
    mm = np.matmul
    out = [x0]
    order = m.order
    if order >= 1:
        m1 = m.c[1]
        x1 = -mm(mm(_ins(x0, 1), m1), _ins(x0, 1))
        out.append(x1)
    if order >= 2:
        m2 = m.c[2]
        t = mm(m2, _ins(x0, 2)) + mm(m1[:, :, None], x1[:, None, :]) + mm(m1[:, None, :], x1[:, :, None])
        x2 = -mm(_ins(x0, 2), t)
        out.append(x2)
    if order >= 3:
        m3 = m.c[3]
        left = _sym3_left(mm(m2[:, :, :, None], x1[:, None, None, :]))
        right = _sym3_right(mm(m1[:, :, None, None], x2[:, None, :, :]))
        t = mm(m3, _ins(x0, 3)) + left + right
        out.append(-mm(_ins(x0, 3), t))
    return Jet(out, m.nvar)


def determinant(m):
    """Jet of the determinant of a small square matrix jet (Leibniz expansion)."""
    import itertools
    n = m.shape[-1]
    total = None
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = m[0, perm[0]]
        for row in range(1, n):
            term = term * m[row, perm[row]]
        term = term * float(sign)
        total = term if total is None else total + term
    return total


def _perm_sign(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def atan2(y, x):
    """Jet of ``atan2(y, x)`` for scalar-shaped jets."""
    value = np.arctan2(y.c[0], x.c[0])
    r2 = x * x + y * y
    if np.any(r2.c[0] < 1e-300):
        raise JetError("atan2 at the origin")
    order = min(x.order, y.order)
    if order == 0:
        return Jet([value], x.nvar)
    gx = x.truncate(order).grad().truncate(order - 1)
    gy = y.truncate(order).grad().truncate(order - 1)
    xs, ys, rs = x.truncate(order - 1), y.truncate(order - 1), r2.truncate(order - 1)
    g = (xs * gy - ys * gx) / rs
    return Jet.from_gradient(value, g)


def levi_civita(n):
    """Permutation symbol with ``n`` indices."""
    import itertools
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        eps[perm] = _perm_sign(perm)
    return eps


def factorial(k):
    return math.factorial(k)
