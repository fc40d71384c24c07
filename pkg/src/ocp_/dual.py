from typing import List, Sequence, Union

import numpy as np

Number = Union[int, float, np.floating]


class TangentBundle:
    """
    Scalar value carrying its directional derivatives along a fixed set of seeds.

    Arithmetic follows the chain rule exactly. The value part is computed with the
    same floating point operations as plain evaluation, so a bundle with zero seeds
    reproduces a float evaluation bit for bit.

    Attributes:
        value (float): primal value
        partials (np.ndarray): one directional derivative per seed direction
    """

    __slots__ = ("value", "partials")
    # Keeps numpy scalars from swallowing bundles in mixed expressions
    __array_ufunc__ = None

    def __init__(self, value: Number, partials: np.ndarray) -> None:
        self.value = value
        self.partials = partials

    def __repr__(self) -> str:
        return f"TangentBundle({self.value!r}, {self.partials!r})"

    @property
    def nseeds(self) -> int:
        return self.partials.shape[0]

    # Arithmetic
    def __add__(self, other):
        if isinstance(other, TangentBundle):
            return TangentBundle(self.value + other.value, self.partials + other.partials)
        return TangentBundle(self.value + other, self.partials)

    def __radd__(self, other):
        return TangentBundle(other + self.value, self.partials)

    def __sub__(self, other):
        if isinstance(other, TangentBundle):
            return TangentBundle(self.value - other.value, self.partials - other.partials)
        return TangentBundle(self.value - other, self.partials)

    def __rsub__(self, other):
        return TangentBundle(other - self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, TangentBundle):
            return TangentBundle(
                self.value * other.value,
                self.partials * other.value + other.partials * self.value,
            )
        return TangentBundle(self.value * other, self.partials * other)

    def __rmul__(self, other):
        return TangentBundle(other * self.value, other * self.partials)

    def __truediv__(self, other):
        if isinstance(other, TangentBundle):
            value = self.value / other.value
            return TangentBundle(
                value, (self.partials - value * other.partials) / other.value
            )
        return TangentBundle(self.value / other, self.partials / other)

    def __rtruediv__(self, other):
        value = other / self.value
        return TangentBundle(value, -value / self.value * self.partials)

    def __neg__(self):
        return TangentBundle(-self.value, -self.partials)

    def __pos__(self):
        return self

    def __pow__(self, power):
        if isinstance(power, TangentBundle):
            return exp(power * log(self))
        if power == 0:
            return TangentBundle(self.value**power, np.zeros_like(self.partials))
        return TangentBundle(
            self.value**power, power * self.value ** (power - 1) * self.partials
        )

    def __rpow__(self, base):
        value = base**self.value
        return TangentBundle(value, value * np.log(base) * self.partials)

    def __abs__(self):
        return TangentBundle(abs(self.value), np.sign(self.value) * self.partials)

    # Comparisons act on the value only
    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)

    def __float__(self) -> float:
        return float(self.value)


def _value(a):
    return a.value if isinstance(a, TangentBundle) else a


# Elementary functions shared by plain and bundle evaluation
def sin(a):
    if isinstance(a, TangentBundle):
        return TangentBundle(np.sin(a.value), np.cos(a.value) * a.partials)
    return np.sin(a)


def cos(a):
    if isinstance(a, TangentBundle):
        return TangentBundle(np.cos(a.value), -np.sin(a.value) * a.partials)
    return np.cos(a)


def exp(a):
    if isinstance(a, TangentBundle):
        value = np.exp(a.value)
        return TangentBundle(value, value * a.partials)
    return np.exp(a)


def log(a):
    if isinstance(a, TangentBundle):
        return TangentBundle(np.log(a.value), a.partials / a.value)
    return np.log(a)


def sqrt(a):
    if isinstance(a, TangentBundle):
        value = np.sqrt(a.value)
        return TangentBundle(value, a.partials / (2.0 * value))
    return np.sqrt(a)


def tanh(a):
    if isinstance(a, TangentBundle):
        value = np.tanh(a.value)
        return TangentBundle(value, (1.0 - value * value) * a.partials)
    return np.tanh(a)


def atan(a):
    if isinstance(a, TangentBundle):
        return TangentBundle(np.arctan(a.value), a.partials / (1.0 + a.value * a.value))
    return np.arctan(a)


# Seeding and extraction
def seed(values: Sequence[Number], nseeds: int, offset: int = 0) -> List[TangentBundle]:
    """Bundle each entry of `values` with a unit seed at `offset + i`."""
    bundles = []
    for i, v in enumerate(values):
        partials = np.zeros(nseeds)
        partials[offset + i] = 1.0
        bundles.append(TangentBundle(v, partials))
    return bundles


def seed_direction(values: Sequence[Number], direction: Sequence[Number]) -> List[TangentBundle]:
    """Bundle each entry with a single seed along `direction`."""
    return [TangentBundle(v, np.array([d], dtype=float)) for v, d in zip(values, direction)]


def values_of(outputs: Sequence) -> np.ndarray:
    return np.array([_value(o) for o in outputs], dtype=float)


def jacobian_of(outputs: Sequence, nseeds: int) -> np.ndarray:
    """Stack the partials of each output as the rows of a Jacobian."""
    jac = np.zeros((len(outputs), nseeds))
    for i, o in enumerate(outputs):
        if isinstance(o, TangentBundle):
            jac[i] = o.partials
    return jac
