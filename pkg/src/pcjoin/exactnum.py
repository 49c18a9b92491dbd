"""Exact values of the form sum of (rational * product of integer powers with
rational exponents), as produced by fractional-cover optima and their sums.

Everything stays symbolic: exponentiation to floats happens only for display.
Comparisons against rationals are exact, via big-integer cross-multiplication
for single products and adaptive rational enclosures for sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable


def nth_root_floor(m: int, k: int) -> int:
    """Largest r with r**k <= m, for m >= 0, k >= 1."""
    if m < 0 or k < 1:
        raise ValueError("nth_root_floor requires m >= 0, k >= 1")
    if m in (0, 1) or k == 1:
        return m
    if k == 2:
        return math.isqrt(m)
    r = int(round(m ** (1.0 / k))) if m.bit_length() < 900 else 1 << (m.bit_length() // k + 1)
    r = max(r, 1)
    while r**k > m:
        r = (r * (k - 1) + m // r ** (k - 1)) // k
    while (r + 1) ** k <= m:
        r += 1
    return r


class PrecisionError(ArithmeticError):
    """An adaptive comparison failed to separate two equal-looking irrationals."""


@dataclass(frozen=True)
class PowerProduct:
    """coefficient * prod(base ** exponent) in canonical form.

    Canonical: bases are integers >= 2 in ascending order with nonzero,
    non-integral contributions root-reduced away where possible; integral
    powers live in the rational coefficient. Zero is coefficient 0 with no
    factors. All values handled here are nonnegative.
    """

    coefficient: Fraction
    factors: tuple[tuple[int, Fraction], ...]

    @staticmethod
    def make(
        coefficient: Fraction | int = 1,
        factors: Iterable[tuple[int, Fraction]] = (),
    ) -> "PowerProduct":
        coef = Fraction(coefficient)
        if coef < 0:
            raise ValueError("negative values are not representable")
        merged: dict[int, Fraction] = {}
        for base, exp in factors:
            exp = Fraction(exp)
            if base < 0:
                raise ValueError("negative base")
            if exp == 0:
                continue
            if base == 0:
                if exp < 0:
                    raise ZeroDivisionError("0 to a negative power")
                coef = Fraction(0)
                continue
            if base == 1:
                continue
            merged[base] = merged.get(base, Fraction(0)) + exp
        if coef == 0:
            return PowerProduct(Fraction(0), ())
        out: dict[int, Fraction] = {}
        for base, exp in merged.items():
            if exp == 0:
                continue
            q = exp.denominator
            if q == 1:
                coef *= Fraction(base) ** exp.numerator
                continue
            root = nth_root_floor(base, q)
            if root**q == base:
                coef *= Fraction(root) ** exp.numerator
            else:
                out[base] = out.get(base, Fraction(0)) + exp
        return PowerProduct(coef, tuple(sorted(out.items())))

    @staticmethod
    def from_int(n: int) -> "PowerProduct":
        return PowerProduct.make(Fraction(n))

    @property
    def is_rational(self) -> bool:
        return not self.factors

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is irrational")
        return self.coefficient

    def __mul__(self, other: "PowerProduct") -> "PowerProduct":
        return PowerProduct.make(
            self.coefficient * other.coefficient, self.factors + other.factors
        )

    def scale(self, c: Fraction | int) -> "PowerProduct":
        return PowerProduct.make(self.coefficient * Fraction(c), self.factors)

    def __pow__(self, e: Fraction | int) -> "PowerProduct":
        e = Fraction(e)
        if self.coefficient == 0:
            if e <= 0:
                raise ZeroDivisionError("0 to a nonpositive power")
            return self
        coef_factors: list[tuple[int, Fraction]] = []
        c = self.coefficient
        if c.numerator != 1:
            coef_factors.append((c.numerator, e))
        if c.denominator != 1:
            coef_factors.append((c.denominator, -e))
        return PowerProduct.make(
            1, coef_factors + [(b, x * e) for b, x in self.factors]
        )

    def to_float(self) -> float:
        out = float(self.coefficient)
        for base, exp in self.factors:
            out *= base ** float(exp)
        return out

    def bounds(self, digits: int = 0) -> tuple[Fraction, Fraction]:
        """Rational enclosure [lo, hi] with roughly ``digits`` decimal digits."""
        lo = hi = self.coefficient
        scale = 10**digits
        for base, exp in self.factors:
            p, q = exp.numerator, exp.denominator
            if p > 0:
                m = base**p
                r = nth_root_floor(m * scale**q, q)
                flo, fhi = Fraction(r, scale), Fraction(r + 1, scale)
            else:
                m = base ** (-p)
                r = nth_root_floor(m * scale**q, q)
                flo, fhi = Fraction(scale, r + 1), Fraction(scale, r)
            lo *= flo
            hi *= fhi
        return lo, hi

    def _cmp(self, other: "PowerProduct") -> int:
        """Exact three-way comparison via clearing denominators."""
        if self.factors == other.factors:
            a, b = self.coefficient, other.coefficient
            return (a > b) - (a < b)
        exps = [x for _, x in self.factors] + [x for _, x in other.factors]
        lcm = reduce(math.lcm, (x.denominator for x in exps), 1)
        left = self.coefficient.numerator**lcm * other.coefficient.denominator**lcm
        right = other.coefficient.numerator**lcm * self.coefficient.denominator**lcm
        if left == 0 or right == 0:
            return (left > right) - (left < right)
        net: dict[int, int] = {}
        for base, exp in self.factors:
            net[base] = net.get(base, 0) + int(exp * lcm)
        for base, exp in other.factors:
            net[base] = net.get(base, 0) - int(exp * lcm)
        for base, e in net.items():
            if e > 0:
                left *= base**e
            elif e < 0:
                right *= base ** (-e)
        return (left > right) - (left < right)

    def __lt__(self, other: "PowerProduct") -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: "PowerProduct") -> bool:
        return self._cmp(other) <= 0

    def as_json(self) -> dict:
        doc: dict = {
            "coefficient": [self.coefficient.numerator, self.coefficient.denominator],
            "factors": [
                [base, [exp.numerator, exp.denominator]] for base, exp in self.factors
            ],
            "float": self.to_float(),
        }
        if self.is_rational and self.coefficient.denominator == 1:
            doc["integer"] = self.coefficient.numerator
        return doc

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.coefficient)
        parts = [] if self.coefficient == 1 else [str(self.coefficient)]
        parts += [f"{b}^{x}" for b, x in self.factors]
        return "*".join(parts)


_DIGIT_LADDER = (0, 8, 16, 32, 64, 128)


@dataclass(frozen=True)
class BoundValue:
    """A finite sum of PowerProducts (all nonnegative), kept exact."""

    terms: tuple[PowerProduct, ...]

    @staticmethod
    def make(terms: Iterable[PowerProduct]) -> "BoundValue":
        merged: dict[tuple[tuple[int, Fraction], ...], Fraction] = {}
        for t in terms:
            if t.coefficient == 0:
                continue
            merged[t.factors] = merged.get(t.factors, Fraction(0)) + t.coefficient
        out = tuple(
            PowerProduct(coef, factors)
            for factors, coef in sorted(merged.items())
            if coef != 0
        )
        return BoundValue(out)

    @staticmethod
    def from_int(n: int) -> "BoundValue":
        return BoundValue.make([PowerProduct.from_int(n)])

    @staticmethod
    def zero() -> "BoundValue":
        return BoundValue(())

    def __add__(self, other: "BoundValue") -> "BoundValue":
        return BoundValue.make(self.terms + other.terms)

    @property
    def is_rational(self) -> bool:
        return all(t.is_rational for t in self.terms)

    def as_fraction(self) -> Fraction:
        return sum((t.as_fraction() for t in self.terms), Fraction(0))

    def to_float(self) -> float:
        return sum(t.to_float() for t in self.terms)

    def bounds(self, digits: int = 0) -> tuple[Fraction, Fraction]:
        lo = hi = Fraction(0)
        for t in self.terms:
            tlo, thi = t.bounds(digits)
            lo += tlo
            hi += thi
        return lo, hi

    def compare_fraction(self, x: Fraction | int) -> int:
        """Exact three-way comparison against a rational."""
        x = Fraction(x)
        if self.is_rational:
            v = self.as_fraction()
            return (v > x) - (v < x)
        if len(self.terms) == 1:
            return self.terms[0]._cmp(PowerProduct.make(x))
        for digits in _DIGIT_LADDER:
            lo, hi = self.bounds(digits)
            if lo > x:
                return 1
            if hi < x:
                return -1
        raise PrecisionError(f"cannot separate {self} from {x}")

    def ge_fraction(self, x: Fraction | int) -> bool:
        return self.compare_fraction(x) >= 0

    def compare(self, other: "BoundValue") -> int:
        if self.terms == other.terms:
            return 0
        if self.is_rational and other.is_rational:
            a, b = self.as_fraction(), other.as_fraction()
            return (a > b) - (a < b)
        if len(self.terms) == 1 and len(other.terms) == 1:
            return self.terms[0]._cmp(other.terms[0])
        for digits in _DIGIT_LADDER:
            alo, ahi = self.bounds(digits)
            blo, bhi = other.bounds(digits)
            if ahi < blo:
                return -1
            if alo > bhi:
                return 1
        raise PrecisionError(f"cannot separate {self} from {other}")

    def __le__(self, other: "BoundValue") -> bool:
        return self.compare(other) <= 0

    def as_json(self) -> dict:
        doc: dict = {
            "terms": [t.as_json() for t in self.terms],
            "float": self.to_float(),
        }
        if self.is_rational:
            v = self.as_fraction()
            doc["rational"] = [v.numerator, v.denominator]
            if v.denominator == 1:
                doc["integer"] = v.numerator
        return doc

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(str(t) for t in self.terms)
