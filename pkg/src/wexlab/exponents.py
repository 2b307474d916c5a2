"""Exact exponent algebra.

Exponents are ``fractions.Fraction`` values or the singleton :data:`INF`.
Every formula below is evaluated in exact rational arithmetic.  The only
exceptions are constants carrying an irrational power (a power of 3 with a
non-integer exponent, say); those are rounded in the direction that keeps
downstream ``measured <= bound`` checks valid, and the direction is stated
on each function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, NamedTuple, Sequence

import mpmath

__all__ = [
    "INF", "Infinity", "ExponentError", "EndpointError", "IncompatibleExponentError",
    "exponent", "is_inf", "recip", "from_recip", "dual_exponent", "xdiv",
    "LimitedRange", "BoundFunction", "tau", "gamma_extrapolation", "buckley_bound",
    "rh_gamma", "diag_extrapolation_constant", "weak_strong_exponent",
    "commutator_bound_fn", "offdiag_solve", "multilinear_holder", "class_to_atau",
    "product_weight_exponents", "ProductExponents", "remark_ss_exponents",
    "check_dual_tau_identity", "check_rbeta_identity", "power_upper", "power_lower",
    "to_float",
]


class ExponentError(ValueError):
    """An exponent outside the admissible set for an operation."""


class EndpointError(ExponentError):
    """A formula hit a zero denominator at an endpoint of its range."""


class IncompatibleExponentError(ExponentError):
    """A solved exponent is not positive."""


@total_ordering
class Infinity:
    """The exponent infinity.  Ordered above every real number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __float__(self):
        return math.inf

    def __hash__(self):
        return hash(math.inf)

    def __eq__(self, other):
        if isinstance(other, Infinity):
            return True
        if isinstance(other, (int, float, Fraction)):
            return other == math.inf
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, (Infinity, int, float, Fraction)):
            return False
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, Infinity):
            return False
        if isinstance(other, (int, float, Fraction)):
            return other != math.inf
        return NotImplemented

    def __reduce__(self):
        return (Infinity, ())


INF = Infinity()


def is_inf(x) -> bool:
    return isinstance(x, Infinity)


def exponent(x, *, allow_zero: bool = False):
    """Coerce ``x`` to an exact exponent.

    Accepts ints, Fractions, strings such as ``"3/2"`` or ``"inf"``, floats
    (converted through their shortest decimal repr, so ``0.1`` is ``1/10``)
    and :data:`INF`.  Zero and negative values are rejected unless
    ``allow_zero`` is set, in which case zero passes.
    """
    if isinstance(x, Infinity):
        return INF
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return INF
        val = Fraction(s)
    elif isinstance(x, float):
        if math.isinf(x) and x > 0:
            return INF
        if not math.isfinite(x):
            raise ExponentError(f"not a valid exponent: {x!r}")
        val = Fraction(repr(x))
    elif isinstance(x, (int, Fraction)):
        val = Fraction(x)
    else:
        try:
            val = Fraction(x)
        except (TypeError, ValueError) as exc:
            raise ExponentError(f"not a valid exponent: {x!r}") from exc
    if val < 0 or (val == 0 and not allow_zero):
        raise ExponentError(f"exponent must be positive, got {val}")
    return val


def to_float(x) -> float:
    return math.inf if is_inf(x) else float(x)


def recip(x) -> Fraction:
    """1/x with 1/INF = 0."""
    x = exponent(x)
    return Fraction(0) if is_inf(x) else 1 / x


def from_recip(r) -> Fraction | Infinity:
    """Inverse of :func:`recip`: 0 maps to INF, negatives are rejected."""
    r = Fraction(r)
    if r < 0:
        raise IncompatibleExponentError(f"reciprocal {r} is negative")
    return INF if r == 0 else 1 / r


def dual_exponent(p):
    """Hölder conjugate p/(p-1) on [1, INF]."""
    p = exponent(p)
    if p < 1:
        raise ExponentError(f"dual exponent needs p >= 1, got {p}")
    if is_inf(p):
        return Fraction(1)
    if p == 1:
        return INF
    return p / (p - 1)


def xdiv(a, b):
    """a/b for extended exponents; INF/finite = INF, finite/INF = 0 is rejected."""
    a, b = exponent(a), exponent(b)
    if is_inf(a) and is_inf(b):
        raise ExponentError("INF/INF is undefined")
    if is_inf(a):
        return INF
    if is_inf(b):
        raise ExponentError(f"{a}/INF is zero, not an exponent")
    return a / b


@dataclass(frozen=True)
class LimitedRange:
    """A pair 1 <= lower < upper <= INF."""

    lower: Fraction | Infinity
    upper: Fraction | Infinity

    def __post_init__(self):
        lo, hi = exponent(self.lower), exponent(self.upper)
        if is_inf(lo) or lo < 1 or not lo < hi:
            raise ExponentError(f"need 1 <= lower < upper <= inf, got ({lo}, {hi})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def full(cls) -> "LimitedRange":
        return cls(1, INF)

    @classmethod
    def coerce(cls, value) -> "LimitedRange":
        if isinstance(value, LimitedRange):
            return value
        if value is None:
            return cls.full()
        lo, hi = value
        return cls(lo, hi)

    @property
    def beta(self) -> Fraction:
        """1/lower - 1/upper."""
        return recip(self.lower) - recip(self.upper)

    def dual(self) -> "LimitedRange":
        """The range (upper', lower') describing dual exponents."""
        return LimitedRange(dual_exponent(self.upper), dual_exponent(self.lower))

    def contains(self, p, *, closed: bool = True) -> bool:
        p = exponent(p)
        if closed:
            return self.lower <= p <= self.upper
        return self.lower < p < self.upper

    def __str__(self):
        return f"({self.lower}, {self.upper})"


def _check_in_range(p, rng: LimitedRange):
    if not rng.contains(p):
        raise ExponentError(f"p = {p} outside [{rng.lower}, {rng.upper}]")


def tau(p, rng) -> Fraction | Infinity:
    """τ_p = (1/lower - 1/upper) / (1/p - 1/upper); INF at p = upper."""
    p, rng = exponent(p), LimitedRange.coerce(rng)
    if is_inf(p):
        raise ExponentError("tau needs a finite p")
    _check_in_range(p, rng)
    den = recip(p) - recip(rng.upper)
    if den == 0:
        return INF
    return rng.beta / den


def _tau_product_form(p, rng: LimitedRange) -> Fraction:
    """(upper/p)'(p/lower - 1) + 1, the other closed form of τ_p."""
    p = exponent(p)
    ratio_dual = dual_exponent(xdiv(rng.upper, p))
    if is_inf(ratio_dual):
        raise EndpointError("p equals the upper endpoint")
    return ratio_dual * (p / rng.lower - 1) + 1


def gamma_extrapolation(p, q, rng) -> Fraction:
    """Exponent carried by the characteristic when extrapolating from p to q."""
    p, q, rng = exponent(p), exponent(q), LimitedRange.coerce(rng)
    if is_inf(q):
        raise ExponentError("q must be finite")
    if not rng.contains(p, closed=False):
        if p == rng.lower:
            raise EndpointError("p at the lower endpoint makes tau_p - 1 vanish")
        raise ExponentError(f"p = {p} must lie strictly inside {rng}")
    _check_in_range(q, rng)
    tp = tau(p, rng)
    if q == rng.upper:
        return q * rng.beta / (tp - 1)
    tq = tau(q, rng)
    return max(Fraction(1), (tq - 1) / (tp - 1))


# Irrational powers.  We evaluate with mpmath at generous precision, then
# step one float ulp in the safe direction and return the result exactly.

_MP_DPS = 60


def power_upper(base, power) -> Fraction:
    """A rational upper bound for base**power, exact when the power is an integer."""
    base, power = Fraction(base), Fraction(power)
    if power.denominator == 1:
        return base ** power.numerator
    with mpmath.workdps(_MP_DPS):
        val = mpmath.power(mpmath.mpf(base.numerator) / base.denominator,
                           mpmath.mpf(power.numerator) / power.denominator)
        f = float(val)
    return Fraction(math.nextafter(f, math.inf))


def power_lower(base, power) -> Fraction:
    """A rational lower bound for base**power, exact when the power is an integer."""
    base, power = Fraction(base), Fraction(power)
    if power.denominator == 1:
        return base ** power.numerator
    with mpmath.workdps(_MP_DPS):
        val = mpmath.power(mpmath.mpf(base.numerator) / base.denominator,
                           mpmath.mpf(power.numerator) / power.denominator)
        f = float(val)
    return Fraction(math.nextafter(f, -math.inf))


def _finite_open(p, name="p"):
    p = exponent(p)
    if is_inf(p) or p <= 1:
        raise ExponentError(f"{name} must lie in (1, inf), got {p}")
    return p


def buckley_bound(n: int, p, ap_constant) -> Fraction:
    """Upper bound for the maximal operator norm on L^p(w) given [w]_{A_p}.

    Evaluates 2^n * 3^{n(p' + 6/p)} * [w]^{1/(p-1)}, rounded up when a factor
    is irrational.
    """
    p = _finite_open(p)
    n = _dimension(n)
    char = Fraction(ap_constant)
    if char < 1:
        raise ExponentError(f"an A_p constant is at least 1, got {char}")
    three_pow = n * (dual_exponent(p) + 6 / p)
    return Fraction(2) ** n * power_upper(3, three_pow) * power_upper(char, 1 / (p - 1))


def _dimension(n) -> int:
    if int(n) != n or n < 1:
        raise ExponentError(f"dimension must be a positive integer, got {n}")
    return int(n)


def rh_gamma(n: int, p, char) -> Fraction:
    """Reverse Hölder exponent gain for a weight with the given characteristic.

    p = 1 uses [w]_{A_1}, 1 < p < INF uses [w]_{A_p}, p = INF uses [w]_{A_inf}.
    When 2p is not an integer the power of two is irrational; the result is
    then rounded *down*, which only weakens the gain and keeps every
    conclusion drawn from it valid.
    """
    p, n = exponent(p), _dimension(n)
    if p < 1:
        raise ExponentError(f"p must be >= 1, got {p}")
    char = Fraction(char)
    if char < 1:
        raise ExponentError(f"characteristic must be >= 1, got {char}")
    if is_inf(p):
        return 1 / (Fraction(2) ** (n + 11) * char)
    if p == 1:
        return 1 / (Fraction(2) ** (n + 1) * char)
    return 1 / (power_upper(2, n + 1 + 2 * p) * char)


def diag_extrapolation_constant(n: int, p, p0) -> Fraction:
    """Constant of the diagonal extrapolation estimate from p to p0.

    3^{n(p'+8)(p0-p)} when p < p0, 3^{n(p+8)} when p > p0 and 1 when p = p0.
    Irrational powers are rounded up.
    """
    p, n = _finite_open(p), _dimension(n)
    p0 = exponent(p0)
    if p0 < 1:
        raise ExponentError(f"p0 must be >= 1, got {p0}")
    if p0 == p:
        return Fraction(1)
    if p < p0:
        if is_inf(p0):
            raise ExponentError("the constant is infinite for p0 = inf")
        return power_upper(3, n * (dual_exponent(p) + 8) * (p0 - p))
    return power_upper(3, n * (p + 8))


def weak_strong_exponent(p, p0) -> Fraction:
    p = _finite_open(p)
    p0 = exponent(p0)
    if is_inf(p0) or p0 < 1:
        raise ExponentError(f"p0 must lie in [1, inf), got {p0}")
    return max(Fraction(1), 3 * (p0 - 1) / (p - 1))


@dataclass(frozen=True)
class BoundFunction:
    """A monomial t -> coefficient * t**exponent with an exact symbolic coefficient.

    The coefficient is stored as a product of ``(base, power)`` factors so
    that compositions stay exact even when a power is fractional.
    """

    factors: tuple = ((Fraction(1), Fraction(1)),)
    exponent: Fraction = Fraction(1)

    def __post_init__(self):
        facs = tuple((Fraction(b), Fraction(e)) for b, e in self.factors)
        for b, _ in facs:
            if b < 0:
                raise ExponentError("coefficient factors must be nonnegative")
        e = Fraction(self.exponent)
        if e < 0:
            raise ExponentError("bound functions must be increasing (exponent >= 0)")
        object.__setattr__(self, "factors", _merge_factors(facs))
        object.__setattr__(self, "exponent", e)

    @classmethod
    def monomial(cls, coefficient=1, exponent=1) -> "BoundFunction":
        return cls(((Fraction(coefficient), Fraction(1)),), Fraction(exponent))

    @classmethod
    def identity(cls) -> "BoundFunction":
        return cls.monomial(1, 1)

    @property
    def is_exact(self) -> bool:
        return all(e.denominator == 1 for _, e in self.factors)

    @property
    def coefficient(self) -> Fraction:
        """Exact when possible, otherwise a rational upper bound."""
        out = Fraction(1)
        for b, e in self.factors:
            out *= power_upper(b, e)
        return out

    def __call__(self, t) -> float:
        t = float(t)
        val = 1.0
        for b, e in self.factors:
            val *= float(b) ** float(e)
        return val * t ** float(self.exponent)

    def compose(self, inner: "BoundFunction") -> "BoundFunction":
        """self(inner(t))."""
        facs = self.factors + tuple((b, e * self.exponent) for b, e in inner.factors)
        return BoundFunction(facs, self.exponent * inner.exponent)

    def __mul__(self, other: "BoundFunction") -> "BoundFunction":
        return BoundFunction(self.factors + other.factors, self.exponent + other.exponent)

    def scaled_argument(self, c) -> "BoundFunction":
        """t -> self(c t)."""
        return self.compose(BoundFunction.monomial(c, 1))

    def __str__(self):
        coef = " * ".join(f"{b}^{e}" if e != 1 else f"{b}" for b, e in self.factors
                          if not (b == 1 or e == 0)) or "1"
        return f"t -> {coef} * t^{self.exponent}"


def _merge_factors(facs):
    merged: dict[Fraction, Fraction] = {}
    for b, e in facs:
        if e == 0 or b == 1:
            continue
        merged[b] = merged.get(b, Fraction(0)) + e
    out = tuple(sorted((b, e) for b, e in merged.items() if e != 0))
    return out or ((Fraction(1), Fraction(1)),)


def commutator_bound_fn(alpha: int, s, q, rng, phi: BoundFunction, C=1) -> BoundFunction:
    """t -> t^{alpha*max(1, 1/(tau_s - 1))} * phi(C t^{gamma(s, q)})."""
    if int(alpha) != alpha or alpha < 0:
        raise ExponentError("alpha must be a nonnegative integer")
    rng = LimitedRange.coerce(rng)
    s = exponent(s)
    if s == rng.lower:
        raise EndpointError("s at the lower endpoint makes tau_s - 1 vanish")
    if not rng.contains(s, closed=False):
        raise ExponentError(f"s = {s} must lie strictly inside {rng}")
    C = Fraction(C)
    if C < 1:
        raise ExponentError("C must be >= 1")
    ts = tau(s, rng)
    g = gamma_extrapolation(s, q, rng)
    prefactor = BoundFunction.monomial(1, int(alpha) * max(Fraction(1), 1 / (ts - 1)))
    inner = BoundFunction.monomial(C, g)
    return prefactor * phi.compose(inner)


def offdiag_solve(p, p0, q0):
    """q with 1/q = 1/p - 1/p0 + 1/q0."""
    r = recip(p) - recip(p0) + recip(q0)
    if r <= 0:
        raise IncompatibleExponentError(f"1/q = {r} is not positive")
    return from_recip(r)


def multilinear_holder(p_list: Iterable) -> Fraction | Infinity:
    ps = [exponent(p) for p in p_list]
    if not ps:
        raise ExponentError("empty exponent list")
    return from_recip(sum((recip(p) for p in ps), Fraction(0)))


def class_to_atau(p, rng):
    """Reduce the limited-range class at p to a single A_tau condition.

    Returns ``(tau_p, s)`` with s = p (upper/p)', meaning the class is
    ``w^s in A_{tau_p}``.  At p = upper returns ``None``: the class is then
    the intersection A_{p/lower} with RH_infinity and has no single A_tau form.
    """
    p, rng = exponent(p), LimitedRange.coerce(rng)
    if is_inf(p):
        raise ExponentError("p must be finite")
    _check_in_range(p, rng)
    if p == rng.upper:
        return None
    return tau(p, rng), p * dual_exponent(xdiv(rng.upper, p))


class ProductExponents(NamedTuple):
    primal: tuple
    dual: tuple | None


def _harmonic_range(ranges: Sequence[LimitedRange]):
    lo = sum((recip(r.lower) for r in ranges), Fraction(0))
    hi = sum((recip(r.upper) for r in ranges), Fraction(0))
    return lo, hi


def product_weight_exponents(p_list, range_list) -> ProductExponents:
    """Exponents for bounding the product weight characteristic by its factors.

    primal_i = (1/p_i - 1/upper_i) / (1/p - 1/upper) and
    dual_i   = (1/p_i - 1/upper_i) / (1/lower - 1/p), where p, lower and
    upper are the harmonic combinations.  ``dual`` is None when its
    denominator vanishes (every p_i at its lower endpoint).
    """
    ps = [exponent(p) for p in p_list]
    ranges = [LimitedRange.coerce(r) for r in range_list]
    if not ps or len(ps) != len(ranges):
        raise ExponentError("need matching nonempty exponent and range lists")
    for p, r in zip(ps, ranges):
        _check_in_range(p, r)
    inv_p = sum((recip(p) for p in ps), Fraction(0))
    inv_lo, inv_hi = _harmonic_range(ranges)
    den = inv_p - inv_hi
    if den == 0:
        raise EndpointError("p equals the harmonic upper endpoint")
    nums = [recip(p) - recip(r.upper) for p, r in zip(ps, ranges)]
    primal = tuple(n / den for n in nums)
    dden = inv_lo - inv_p
    dual = None if dden == 0 else tuple(n / dden for n in nums)
    return ProductExponents(primal, dual)


def remark_ss_exponents(range_list) -> list:
    """s_i = lower_i (1 + beta) with beta = 1/lower - 1/upper (harmonic)."""
    ranges = [LimitedRange.coerce(r) for r in range_list]
    if not ranges:
        raise ExponentError("empty range list")
    inv_lo, inv_hi = _harmonic_range(ranges)
    beta = inv_lo - inv_hi
    out = []
    for i, r in enumerate(ranges):
        cap = INF if is_inf(r.upper) else r.upper * r.beta
        if not beta < cap:
            raise ExponentError(f"hypothesis fails at index {i}: {beta} >= {cap}")
        s = r.lower * (1 + beta)
        if not r.contains(s, closed=False):
            raise ExponentError(f"s_{i} = {s} not inside {r}")
        out.append(s)
    if inv_hi < 1:  # harmonic upper endpoint > 1
        total = sum((1 / s for s in out), Fraction(0))
        if total > 1:
            raise ExponentError(f"sum of 1/s_i = {total} exceeds 1")
    return out


def check_dual_tau_identity(p, rng) -> bool:
    """Exact check of the two duality identities for τ at p inside the range.

    (upper/p)'(τ_p' - 1) = (lower'/p')'(p' - 1) and
    τ_p' = (lower'/p')'(p'/upper' - 1) + 1.
    """
    p, rng = exponent(p), LimitedRange.coerce(rng)
    tp_dual = dual_exponent(tau(p, rng))
    pd = dual_exponent(p)
    lo_d, hi_d = dual_exponent(rng.lower), dual_exponent(rng.upper)
    left = dual_exponent(xdiv(rng.upper, p)) * (tp_dual - 1)
    a = dual_exponent(xdiv(lo_d, pd))
    right = a * (pd - 1)
    second = a * (pd / hi_d - 1) + 1
    return left == right and tp_dual == second


def check_rbeta_identity(p, rng) -> bool:
    """Exact check that r * beta = τ_p for r = p (upper/p)'."""
    p, rng = exponent(p), LimitedRange.coerce(rng)
    r = p * dual_exponent(xdiv(rng.upper, p))
    return r * rng.beta == tau(p, rng) == _tau_product_form(p, rng)
