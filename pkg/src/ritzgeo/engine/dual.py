"""Forward-mode dual numbers, generic over the component type.

Components may be floats, numpy arrays (vectorized evaluation), or tape
variables (forward-over-reverse: the dual rules are recorded on the reverse
graph as first-class operations). Exact zeros are kept as the float 0.0 and
short-circuited so that lifting constants costs nothing on a tape.

Dual       first derivative along one direction
Dual2      first and second derivative along one direction
MultiDual  first derivatives along k directions (None marks a structural zero)
"""

from . import fmath


def _is0(x) -> bool:
    return isinstance(x, float) and x == 0.0


def _add(x, y):
    if _is0(x):
        return y
    if _is0(y):
        return x
    return x + y


def _sub(x, y):
    if _is0(y):
        return x
    if _is0(x):
        return -y
    return x - y


def _mul(x, y):
    if _is0(x) or _is0(y):
        return 0.0
    return x * y


class Dual:
    """Value plus derivative along a single input direction."""

    __slots__ = ("value", "deriv")

    def __init__(self, value, deriv=0.0):
        self.value = value
        self.deriv = deriv

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual) else Dual(x)

    def __add__(self, other):
        o = Dual._lift(other)
        return Dual(self.value + o.value, _add(self.deriv, o.deriv))

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual._lift(other)
        return Dual(self.value - o.value, _sub(self.deriv, o.deriv))

    def __rsub__(self, other):
        o = Dual._lift(other)
        return o.__sub__(self)

    def __mul__(self, other):
        o = Dual._lift(other)
        return Dual(
            self.value * o.value,
            _add(_mul(self.deriv, o.value), _mul(self.value, o.deriv)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual._lift(other)
        q = self.value / o.value
        return Dual(q, _sub(self.deriv, _mul(q, o.deriv)) / o.value)

    def __rtruediv__(self, other):
        return Dual._lift(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.value, -self.deriv if not _is0(self.deriv) else 0.0)

    def __pow__(self, c):
        if not isinstance(c, (int, float)):
            raise TypeError("dual exponent must be a constant")
        if c == 2:
            return self * self
        v = self.value
        return Dual(v ** c, _mul(float(c) * v ** (c - 1), self.deriv))

    def __rmatmul__(self, mat):
        # matrix @ dual-with-array-components, used for vectorized layers
        return Dual(mat @ self.value, mat @ self.deriv if not _is0(self.deriv) else 0.0)

    def tanh(self):
        y = fmath.tanh(self.value)
        return Dual(y, _mul(1.0 - y * y, self.deriv))

    def sin(self):
        return Dual(fmath.sin(self.value), _mul(fmath.cos(self.value), self.deriv))

    def cos(self):
        return Dual(fmath.cos(self.value), _mul(-fmath.sin(self.value), self.deriv))

    def exp(self):
        y = fmath.exp(self.value)
        return Dual(y, _mul(y, self.deriv))

    def sqrt(self):
        y = fmath.sqrt(self.value)
        return Dual(y, _mul(0.5 / y, self.deriv))

    def __repr__(self):
        return f"Dual({self.value!r}, {self.deriv!r})"


class Dual2:
    """Value plus first and second derivative along a single input direction."""

    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1=0.0, d2=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual2) else Dual2(x)

    def __add__(self, other):
        o = Dual2._lift(other)
        return Dual2(self.value + o.value, _add(self.d1, o.d1), _add(self.d2, o.d2))

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual2._lift(other)
        return Dual2(self.value - o.value, _sub(self.d1, o.d1), _sub(self.d2, o.d2))

    def __rsub__(self, other):
        return Dual2._lift(other).__sub__(self)

    def __mul__(self, other):
        o = Dual2._lift(other)
        d2 = _add(
            _add(_mul(self.d2, o.value), _mul(self.value, o.d2)),
            _mul(2.0, _mul(self.d1, o.d1)),
        )
        return Dual2(
            self.value * o.value,
            _add(_mul(self.d1, o.value), _mul(self.value, o.d1)),
            d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual2._lift(other)
        q = self.value / o.value
        dq = _sub(self.d1, _mul(q, o.d1)) / o.value
        ddq = _sub(self.d2, _add(_mul(2.0, _mul(dq, o.d1)), _mul(q, o.d2))) / o.value
        return Dual2(q, dq, ddq)

    def __rtruediv__(self, other):
        return Dual2._lift(other).__truediv__(self)

    def __neg__(self):
        return Dual2(
            -self.value,
            -self.d1 if not _is0(self.d1) else 0.0,
            -self.d2 if not _is0(self.d2) else 0.0,
        )

    def __pow__(self, c):
        if not isinstance(c, (int, float)):
            raise TypeError("dual exponent must be a constant")
        if c == 2:
            return self * self
        v = self.value
        d1 = _mul(float(c) * v ** (c - 1), self.d1)
        d2 = _add(
            _mul(float(c * (c - 1)) * v ** (c - 2), _mul(self.d1, self.d1)),
            _mul(float(c) * v ** (c - 1), self.d2),
        )
        return Dual2(v ** c, d1, d2)

    def __rmatmul__(self, mat):
        return Dual2(
            mat @ self.value,
            mat @ self.d1 if not _is0(self.d1) else 0.0,
            mat @ self.d2 if not _is0(self.d2) else 0.0,
        )

    def _chain(self, y, f1, f2):
        # y = f(v): chain rule through first and second derivative
        return Dual2(
            y,
            _mul(f1, self.d1),
            _add(_mul(f1, self.d2), _mul(f2, _mul(self.d1, self.d1))),
        )

    def tanh(self):
        y = fmath.tanh(self.value)
        s = 1.0 - y * y
        return self._chain(y, s, _mul(-2.0, _mul(y, s)))

    def sin(self):
        s, c = fmath.sin(self.value), fmath.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = fmath.sin(self.value), fmath.cos(self.value)
        return self._chain(c, -s, -c)

    def exp(self):
        y = fmath.exp(self.value)
        return self._chain(y, y, y)

    def sqrt(self):
        y = fmath.sqrt(self.value)
        d1 = _mul(0.5 / y, self.d1) if not _is0(self.d1) else 0.0
        num = _sub(self.d2, _mul(2.0, _mul(d1, d1)))
        return Dual2(y, d1, _mul(0.5 / y, num) if not _is0(num) else 0.0)

    def __repr__(self):
        return f"Dual2({self.value!r}, {self.d1!r}, {self.d2!r})"


class MultiDual:
    """Value plus first derivatives along k independent directions.

    tangents is a tuple of length k; None entries are structural zeros and
    never materialize an operation.
    """

    __slots__ = ("value", "tangents")

    def __init__(self, value, tangents):
        self.value = value
        self.tangents = tuple(tangents)

    @staticmethod
    def seed(values):
        """Lift a point into k MultiDuals with unit tangents along each axis."""
        k = len(values)
        out = []
        for i, v in enumerate(values):
            t = [None] * k
            t[i] = 1.0
            out.append(MultiDual(v, t))
        return out

    @staticmethod
    def constant(value, k):
        return MultiDual(value, (None,) * k)

    def _lift(self, x):
        if isinstance(x, MultiDual):
            return x
        return MultiDual(x, (None,) * len(self.tangents))

    def __add__(self, other):
        o = self._lift(other)
        return MultiDual(
            self.value + o.value,
            [_nadd(a, b) for a, b in zip(self.tangents, o.tangents)],
        )

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return MultiDual(
            self.value - o.value,
            [_nsub(a, b) for a, b in zip(self.tangents, o.tangents)],
        )

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        o = self._lift(other)
        return MultiDual(
            self.value * o.value,
            [
                _nadd(_nscale(o.value, a), _nscale(self.value, b))
                for a, b in zip(self.tangents, o.tangents)
            ],
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        q = self.value / o.value
        return MultiDual(
            q,
            [
                None if (a is None and b is None) else _nsub(a, _nscale(q, b)) / o.value
                for a, b in zip(self.tangents, o.tangents)
            ],
        )

    def __rtruediv__(self, other):
        return self._lift(other).__truediv__(self)

    def __neg__(self):
        return MultiDual(-self.value, [None if t is None else -t for t in self.tangents])

    def __pow__(self, c):
        if not isinstance(c, (int, float)):
            raise TypeError("dual exponent must be a constant")
        if c == 2:
            return self * self
        return self._apply(self.value ** c, float(c) * self.value ** (c - 1))

    def _apply(self, y, f1):
        return MultiDual(y, [None if t is None else f1 * t for t in self.tangents])

    def tanh(self):
        y = fmath.tanh(self.value)
        return self._apply(y, 1.0 - y * y)

    def sin(self):
        return self._apply(fmath.sin(self.value), fmath.cos(self.value))

    def cos(self):
        return self._apply(fmath.cos(self.value), -fmath.sin(self.value))

    def exp(self):
        y = fmath.exp(self.value)
        return self._apply(y, y)

    def sqrt(self):
        y = fmath.sqrt(self.value)
        return self._apply(y, 0.5 / y)

    def tangent(self, i):
        """Tangent i with structural zeros materialized as 0.0."""
        t = self.tangents[i]
        return 0.0 if t is None else t

    def __repr__(self):
        return f"MultiDual({self.value!r}, {self.tangents!r})"


def _nadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _nsub(a, b):
    if b is None:
        return a
    if a is None:
        return -b
    return a - b


def _nscale(c, t):
    if t is None or _is0(c):
        return None
    return c * t
