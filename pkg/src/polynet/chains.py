"""Pair potentials acting along mesh edges.

Two potentials are provided: the free energy of a freely-jointed polymer
chain, evaluated through the order-7 odd-polynomial truncation of the
inverse Langevin function, and a plain quadratic spring.  Both are functions
of the stretch ratio r = (deformed edge length) / (reference edge length)
and come with analytic derivatives.  Everything here is a pure function of
its inputs; scalars in give scalars out, arrays give arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Truncated inverse-Langevin coefficients for rho, rho^3, rho^5, rho^7.
# Kept as exact rationals; the float copies are derived from them once.
INV_LANGEVIN_COEFFS = (
    Fraction(3),
    Fraction(9, 5),
    Fraction(297, 175),
    Fraction(1539, 875),
)
_C1, _C3, _C5, _C7 = (float(c) for c in INV_LANGEVIN_COEFFS)

_LN2 = math.log(2.0)

LANGEVIN_CHAIN = "langevin-chain"
QUADRATIC_SPRING = "quadratic-spring"


def inv_langevin_series(rho):
    """Order-7 odd polynomial approximating the inverse Langevin function.

    Returns 3*rho + (9/5)*rho**3 + (297/175)*rho**5 + (1539/875)*rho**7.
    Total on finite reals; the physically meaningful range is |rho| < 1.
    """
    rho = np.asarray(rho, dtype=float)
    r2 = rho * rho
    out = rho * (_C1 + r2 * (_C3 + r2 * (_C5 + r2 * _C7)))
    return out if out.ndim else float(out)


def _inv_langevin_series_prime(rho):
    """Derivative of the truncated series with respect to rho."""
    r2 = rho * rho
    return _C1 + r2 * (3.0 * _C3 + r2 * (5.0 * _C5 + r2 * (7.0 * _C7)))


def _log_x_over_sinh(x):
    """log(x / sinh x), stable for every finite x.

    Even in x.  Below 1e-4 the Taylor expansion -x^2/6 + x^4/180 is used
    (both branches agree to ~1e-16 at the seam); above it the exact rewrite
    log a - a - log1p(-exp(-2a)) + log 2 avoids sinh overflow.
    """
    a = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(a)
    small = a < 1e-4
    asml = a[small]
    out[small] = asml * asml * (asml * asml / 180.0 - 1.0 / 6.0)
    abig = a[~small]
    out[~small] = np.log(abig) - abig - np.log1p(-np.exp(-2.0 * abig)) + _LN2
    return out


def _langevin(x):
    """Langevin function coth x - 1/x with a series branch near the origin."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    small = np.abs(x) < 0.05
    xs = x[small]
    x2 = xs * xs
    out[small] = xs * (1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 - x2 / 4725.0)))
    xb = x[~small]
    out[~small] = 1.0 / np.tanh(xb) - 1.0 / xb
    return out


@dataclass(frozen=True)
class ChainParams:
    """Physical constants of the polymer-chain free energy.

    k and beta play the role of a Boltzmann-like constant and an inverse
    temperature, c is an additive constant and n the number of segments per
    chain.  The segment length l does not enter the energy as implemented;
    it is stored for documentation only (the chain is interpreted at
    end-to-end length sqrt(n)*l).
    """

    k: float = 1.0
    beta: float = 1.0
    c: float = 0.0
    n: float = 8.0
    l: float = 1.0

    def __post_init__(self):
        if not (self.k > 0.0 and self.beta > 0.0 and self.n > 0.0):
            raise ValueError("ChainParams requires k > 0, beta > 0, n > 0")


DEFAULT_CHAIN = ChainParams()


def chain_energy(r, params: ChainParams | None = None):
    """Free energy of a polymer chain at stretch ratio r >= 0.

    With rho = r/sqrt(n) and x the truncated inverse Langevin of rho, returns
    (k/beta)*n*(rho*x + log(x/sinh x)) - c/beta.  At r = 0 the limit -c/beta
    is returned exactly.
    """
    p = params if params is not None else DEFAULT_CHAIN
    r = np.asarray(r, dtype=float)
    rho = r / math.sqrt(p.n)
    x = rho * (_C1 + rho * rho * (_C3 + rho * rho * (_C5 + rho * rho * _C7)))
    out = (p.k / p.beta) * p.n * (rho * x + _log_x_over_sinh(x)) - p.c / p.beta
    return out if out.ndim else float(out)


def chain_energy_derivative(r, params: ChainParams | None = None):
    """Analytic d/dr of chain_energy as implemented (series substituted).

    Equals (k/beta)*sqrt(n)*(x + (rho - L(x))*x'(rho)) with L the Langevin
    function; the bracket is the exact derivative of rho*x + log(x/sinh x).
    Vanishes at r = 0.
    """
    p = params if params is not None else DEFAULT_CHAIN
    r = np.asarray(r, dtype=float)
    rho = r / math.sqrt(p.n)
    x = rho * (_C1 + rho * rho * (_C3 + rho * rho * (_C5 + rho * rho * _C7)))
    out = (p.k / p.beta) * math.sqrt(p.n) * (
        x + (rho - _langevin(x)) * _inv_langevin_series_prime(rho)
    )
    return out if out.ndim else float(out)


def quadratic_spring_energy(r, stiffness: float = 1.0):
    """Linear-spring pair energy stiffness * r**2."""
    r = np.asarray(r, dtype=float)
    out = stiffness * r * r
    return out if out.ndim else float(out)


def quadratic_spring_derivative(r, stiffness: float = 1.0):
    """d/dr of the quadratic spring energy."""
    r = np.asarray(r, dtype=float)
    out = 2.0 * stiffness * r
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PairPotential:
    """Tagged pair potential: a Langevin chain or a quadratic spring.

    Defined for every stretch ratio r >= 0.
    """

    kind: str
    chain: ChainParams | None = None
    stiffness: float | None = None

    def __post_init__(self):
        if self.kind == LANGEVIN_CHAIN:
            if self.chain is None:
                object.__setattr__(self, "chain", DEFAULT_CHAIN)
        elif self.kind == QUADRATIC_SPRING:
            if self.stiffness is None:
                object.__setattr__(self, "stiffness", 1.0)
            if not self.stiffness > 0.0:
                raise ValueError("spring stiffness must be positive")
        else:
            raise ValueError(f"unknown pair potential kind {self.kind!r}")

    @classmethod
    def langevin_chain(cls, params: ChainParams | None = None) -> "PairPotential":
        return cls(kind=LANGEVIN_CHAIN, chain=params)

    @classmethod
    def quadratic_spring(cls, stiffness: float = 1.0) -> "PairPotential":
        return cls(kind=QUADRATIC_SPRING, stiffness=stiffness)

    def energy(self, r):
        if self.kind == LANGEVIN_CHAIN:
            return chain_energy(r, self.chain)
        return quadratic_spring_energy(r, self.stiffness)

    def derivative(self, r):
        if self.kind == LANGEVIN_CHAIN:
            return chain_energy_derivative(r, self.chain)
        return quadratic_spring_derivative(r, self.stiffness)


@dataclass(frozen=True)
class GrowthBounds:
    """Constants of the two-sided growth condition of order p.

    The condition reads c_lo*|r|**p - 1 <= W(r) <= c_hi*(|r|**p + 1).
    """

    p: float
    c_lo: float
    c_hi: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("growth exponent p must exceed 1")
        if not (0.0 < self.c_lo <= self.c_hi):
            raise ValueError("growth constants must satisfy 0 < c_lo <= c_hi")


@dataclass(frozen=True)
class GrowthReport:
    holds: bool
    worst_violation: float  # worst signed margin; >= 0 iff both bounds hold
    witness: float  # sample r at which the worst margin occurs


def check_growth_condition(
    potential: PairPotential,
    bounds: GrowthBounds,
    r_max: float,
    samples: int = 512,
) -> GrowthReport:
    """Sample the growth condition on [0, r_max].

    Evaluates both bounds on r = 0 plus a log-uniform grid up to r_max and
    reports the worst signed margin (distance to the violated side) together
    with the sample where it occurs.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if not r_max > 0.0:
        raise ValueError("r_max must be positive")
    rs = np.concatenate(([0.0], np.geomspace(r_max * 1e-9, r_max, samples - 1)))
    w = np.asarray(potential.energy(rs), dtype=float)
    rp = rs**bounds.p
    lower_margin = w - (bounds.c_lo * rp - 1.0)
    upper_margin = bounds.c_hi * (rp + 1.0) - w
    margins = np.concatenate((lower_margin, upper_margin))
    i = int(np.argmin(margins))
    worst = float(margins[i])
    witness = float(rs[i % rs.size])
    return GrowthReport(holds=worst >= 0.0, worst_violation=worst, witness=witness)
