"""Potentials, angular-momentum channels and basis parameters.

A potential is a finite sum of power terms ``a(q) * r**q`` together with the
prefactor of the radial kinetic operator (1 for ``-d2/dr2``, 1/2 for the
atomic-units convention).  Potentials can be written as short expressions::

    >>> parse_potential("r^2 + 0.001/r^4")
    Potential(terms=(PowerTerm(coefficient=0.001, exponent=-4.0), PowerTerm(coefficient=1.0, exponent=2.0)), kinetic_factor=1.0)
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import DomainError, PotentialSyntaxError

KINETIC_FACTORS = (1.0, 0.5)


@dataclass(frozen=True)
class PowerTerm:
    coefficient: float
    exponent: float

    def __post_init__(self):
        c, q = float(self.coefficient), float(self.exponent)
        if not (math.isfinite(c) and math.isfinite(q)):
            raise DomainError(f"power term must be finite, got {c!r}*r^{q!r}")
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "exponent", q)


@dataclass(frozen=True)
class Potential:
    """V(r) = sum of coefficient * r**exponent, plus the kinetic prefactor.

    Terms are merged by exponent, zero coefficients dropped and the result
    sorted by ascending exponent, so two potentials describing the same
    function compare equal.
    """

    terms: tuple[PowerTerm, ...] = ()
    kinetic_factor: float = 1.0

    def __post_init__(self):
        merged: dict[float, float] = {}
        for term in self.terms:
            if not isinstance(term, PowerTerm):
                term = PowerTerm(*term)
            merged[term.exponent] = merged.get(term.exponent, 0.0) + term.coefficient
        terms = tuple(
            PowerTerm(c, q) for q, c in sorted(merged.items()) if c != 0.0
        )
        object.__setattr__(self, "terms", terms)
        kf = float(self.kinetic_factor)
        if kf not in KINETIC_FACTORS:
            raise DomainError(
                f"kinetic_factor must be 1 or 1/2, got {self.kinetic_factor!r}"
            )
        object.__setattr__(self, "kinetic_factor", kf)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], kinetic_factor=1.0):
        """Build from ``(coefficient, exponent)`` pairs."""
        return cls(tuple(PowerTerm(c, q) for c, q in pairs), kinetic_factor)

    @property
    def exponents(self) -> tuple[float, ...]:
        return tuple(term.exponent for term in self.terms)

    def coefficient(self, exponent: float) -> float:
        for term in self.terms:
            if term.exponent == exponent:
                return term.coefficient
        return 0.0

    def min_exponent(self) -> float:
        return self.terms[0].exponent if self.terms else math.inf

    def max_exponent(self) -> float:
        return self.terms[-1].exponent if self.terms else -math.inf

    def with_kinetic_factor(self, kinetic_factor: float) -> "Potential":
        return replace(self, kinetic_factor=kinetic_factor)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for term in self.terms:
            out = out + term.coefficient * r**term.exponent
        return out

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Channel:
    """Angular-momentum subspace; only ``nu = 2l + d`` matters for spectra."""

    dimension: int = 3
    angular_momentum: int = 0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.dimension!r}")
        if int(self.angular_momentum) != self.angular_momentum or self.angular_momentum < 0:
            raise DomainError(
                f"angular momentum must be an integer >= 0, got {self.angular_momentum!r}"
            )
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "angular_momentum", int(self.angular_momentum))

    @property
    def nu(self) -> int:
        return 2 * self.angular_momentum + self.dimension

    @property
    def centrifugal(self) -> float:
        """Coefficient of 1/r^2 in the effective radial potential."""
        nu = self.nu
        return (nu - 1) * (nu - 3) / 4.0


@dataclass(frozen=True)
class BasisSpec:
    """Basis size ``n`` and the shape parameters ``p``, ``t`` and scale ``s``."""

    size: int
    power: float = 2.0
    exponent_shift: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise DomainError(f"basis size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        for name in ("power", "exponent_shift", "scale"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.power <= 0:
            raise DomainError(f"power p must be positive, got {self.power!r}")
        if self.exponent_shift <= 0:
            raise DomainError(f"exponent shift t must be positive, got {self.exponent_shift!r}")
        if self.scale <= 0:
            raise DomainError(f"scale s must be positive, got {self.scale!r}")

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.power, self.exponent_shift, self.scale)

    def check(self, potential: Potential) -> None:
        """Raise DomainError if some potential term has no finite matrix element."""
        t_min = minimum_t(potential)
        if self.exponent_shift <= t_min:
            q = potential.min_exponent()
            raise DomainError(
                f"exponent shift t={self.exponent_shift!r} too small for the term r^{q:g}; "
                f"need t > {t_min:g}"
            )


def minimum_t(potential: Potential) -> float:
    """Infimum of admissible exponent shifts: t must exceed this strictly."""
    if not potential.terms:
        return 0.0
    return max(0.0, -(2.0 + potential.min_exponent()))


def degeneracy(channel: Channel) -> int:
    d, l = channel.dimension, channel.angular_momentum
    if l == 0:
        return 1
    num = (2 * l + d - 2) * math.factorial(l + d - 3)
    den = math.factorial(l) * math.factorial(d - 2)
    return num // den


# --- expression syntax -----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<op>[-+*/^r]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PotentialSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start("num") if m.group("num") else m.start("op")
        if m.group("num"):
            tokens.append(("num", m.group("num"), start))
        else:
            tokens.append((m.group("op"), m.group("op"), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            want = "a number" if kind == "num" else repr(kind)
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise PotentialSyntaxError(f"expected {want}, found {got}", self.text, tok[2])
        self.i += 1
        return tok

    def number(self):
        return float(self.take("num")[1])

    def exponent(self):
        # 'r' ['^' signed-number]
        self.take("r")
        if self.peek()[0] != "^":
            return 1.0
        self.take("^")
        sign = 1.0
        if self.peek()[0] in "+-":
            sign = -1.0 if self.take()[0] == "-" else 1.0
        return sign * self.number()

    def term(self):
        kind = self.peek()[0]
        if kind == "r":
            return 1.0, self.exponent()
        if kind != "num":
            tok = self.peek()
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise PotentialSyntaxError(
                f"expected a number or 'r', found {got}", self.text, tok[2]
            )
        c = self.number()
        nxt = self.peek()[0]
        if nxt == "*":
            self.take()
            return c, self.exponent()
        if nxt == "/":
            self.take()
            return c, -self.exponent()
        return c, 0.0

    def sign(self):
        tok = self.peek()
        if tok[0] not in "+-" or tok[0] == "end":
            return None
        self.take()
        if self.peek()[0] in ("+", "-"):
            dup = self.peek()
            raise PotentialSyntaxError(
                "ambiguous repeated sign; write a single '+' or '-'", self.text, dup[2]
            )
        return -1.0 if tok[0] == "-" else 1.0

    def parse(self):
        if self.peek()[0] == "end":
            raise PotentialSyntaxError("empty potential expression", self.text, 0)
        pairs = []
        s = self.sign() or 1.0
        c, q = self.term()
        pairs.append((s * c, q))
        while self.peek()[0] != "end":
            s = self.sign()
            if s is None:
                tok = self.peek()
                raise PotentialSyntaxError(
                    f"expected '+' or '-', found {tok[1]!r}", self.text, tok[2]
                )
            c, q = self.term()
            pairs.append((s * c, q))
        return pairs


def parse_potential(expression: str, kinetic_factor: float = 1.0) -> Potential:
    """Parse an expression such as ``"-1/r + 0.5*r + r^2"`` into a Potential.

    Grammar (whitespace-insensitive)::

        expr := [sign] term (sign term)*
        term := [number '*'] 'r' ['^' number] | number ['/' 'r' ['^' number]]

    ``c/r^k`` means ``c * r**-k``; a bare number is a constant term.
    """
    if expression is None or not expression.strip():
        raise PotentialSyntaxError("empty potential expression", expression or "", 0)
    return Potential.from_pairs(_Parser(expression).parse(), kinetic_factor)


def render(potential: Potential) -> str:
    """Canonical text form; ``parse_potential(render(V))`` reproduces V exactly."""
    if not potential.terms:
        return "0"
    parts = []
    for k, term in enumerate(potential.terms):
        c, q = term.coefficient, term.exponent
        body = repr(abs(c)) if q == 0.0 else f"{abs(c)!r}*r^{q!r}"
        if k == 0:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)
