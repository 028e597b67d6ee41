"""M-maps on a multiset lattice and the star operations of the moment algebra.

An M-map assigns a coefficient-ring value to every multiset over the
ground set 1..n (per-label multiplicities bounded by `caps`; plain subsets
are caps = 1).  The convolution product, the lifted functions (log*, exp*,
the inverse, general F*), the power series and the raising operator are
all partition or bipartition sums over :mod:`momalg.combinatorics`.

The coefficient ring is duck-typed.  Complex numbers work out of the box;
:class:`momalg.jets.Jet` values work because they implement the same
arithmetic plus ``exp``/``log``/``inverse`` methods and expose their
constant part.  One implementation therefore serves both plain numeric
moments and coupling-strength expansions.
"""

from __future__ import annotations

import cmath
import math
from math import factorial
from typing import Callable, Iterable

from .combinatorics import (
    EMPTY,
    Multiset,
    multiset_lattice,
    ordered_bipartitions_of,
    partitions_of,
)
from .errors import (
    CapExceededError,
    DomainError,
    NonInvertibleError,
    NotBipartitionError,
    SeriesDivergenceError,
    ShapeMismatchError,
)

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# coefficient-ring helpers (complex scalars or jets, dispatched by duck type)

def ring_exp(x):
    return x.exp() if hasattr(x, "exp") else cmath.exp(x)


def ring_log(x):
    return x.log() if hasattr(x, "log") else cmath.log(x)


def ring_inv(x):
    return x.inverse() if hasattr(x, "inverse") else 1.0 / x


def constant_part(x) -> complex:
    """The scalar 'value at zero coupling' of a ring element."""
    return complex(x.constant) if hasattr(x, "constant") else complex(x)


def value_allclose(x, y, tol: float = DEFAULT_TOL) -> bool:
    """Entrywise absolute-error comparison, mixing scalars and jets freely."""
    jx, jy = hasattr(x, "coeffs"), hasattr(y, "coeffs")
    if jx or jy:
        if jx and not jy:
            return x.allclose(x.promote(y), tol)
        if jy and not jx:
            return y.allclose(y.promote(x), tol)
        return x.allclose(y, tol)
    return abs(x - y) <= tol


def _sum_terms(terms: list):
    """Sum partition-sum terms; compensated (fsum) for plain scalars."""
    if not terms:
        return 0.0
    if all(isinstance(t, (int, float, complex)) for t in terms):
        return complex(
            math.fsum(t.real for t in map(complex, terms)),
            math.fsum(t.imag for t in map(complex, terms)),
        )
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc


# ---------------------------------------------------------------------------


class MMap:
    """Total mapping from the multiset lattice to coefficient-ring values.

    Missing entries read as zero.  Instances are treated as immutable;
    every operation returns a new map.
    """

    __slots__ = ("n", "caps", "_entries")

    def __init__(self, n: int, entries=None, caps: tuple[int, ...] | None = None):
        self.n = int(n)
        self.caps = tuple(caps) if caps is not None else (1,) * self.n
        if len(self.caps) != self.n:
            raise ShapeMismatchError("caps length must equal ground size")
        self._entries = {}
        if entries:
            for a, v in dict(entries).items():
                if not isinstance(a, Multiset):
                    a = Multiset(a)
                if not a.fits(self.caps):
                    raise CapExceededError(f"multiset {a} exceeds caps {self.caps}")
                self._entries[a] = v

    @classmethod
    def from_function(cls, n, fn: Callable[[Multiset], object], caps=None) -> "MMap":
        caps = tuple(caps) if caps is not None else (1,) * n
        return cls(n, {a: fn(a) for a in multiset_lattice(n, caps)}, caps)

    def __call__(self, a: Multiset):
        return self._entries.get(a, 0.0)

    def domain(self) -> tuple[Multiset, ...]:
        return multiset_lattice(self.n, self.caps)

    def entries(self) -> dict:
        return dict(self._entries)

    def replace(self, a: Multiset, value) -> "MMap":
        new = dict(self._entries)
        new[a] = value
        return MMap(self.n, new, self.caps)

    def map_values(self, fn) -> "MMap":
        return MMap(self.n, {a: fn(v) for a, v in self._entries.items()}, self.caps)

    def allclose(self, other: "MMap", tol: float = DEFAULT_TOL) -> bool:
        _check_shapes(self, other)
        return all(value_allclose(self(a), other(a), tol) for a in self.domain())

    def max_abs_diff(self, other: "MMap") -> float:
        _check_shapes(self, other)
        worst = 0.0
        for a in self.domain():
            x, y = self(a), other(a)
            if hasattr(x, "coeffs") or hasattr(y, "coeffs"):
                jx = x if hasattr(x, "coeffs") else y.promote(x)
                jy = y if hasattr(y, "coeffs") else x.promote(y)
                worst = max(worst, jx.max_abs_diff(jy))
            else:
                worst = max(worst, abs(x - y))
        return worst

    def __repr__(self) -> str:
        body = ", ".join(f"{a}: {v}" for a, v in sorted(
            self._entries.items(), key=lambda kv: kv[0].sort_key))
        return f"MMap(n={self.n}, caps={self.caps}, {{{body}}})"


def _check_shapes(f: MMap, g: MMap) -> None:
    if f.n != g.n or f.caps != g.caps:
        raise ShapeMismatchError(
            f"shape mismatch: (n={f.n}, caps={f.caps}) vs (n={g.n}, caps={g.caps})"
        )


def identity_mmap(n: int, caps=None) -> MMap:
    """The convolution identity 1*: value 1 at the empty multiset."""
    return MMap(n, {EMPTY: 1.0}, caps)


def scalar_mmap(alpha, n: int, caps=None) -> MMap:
    """The scalar alpha*: convolving with it scales every entry by alpha."""
    return MMap(n, {EMPTY: alpha}, caps)


def convolve(f: MMap, g: MMap) -> MMap:
    """Convolution product (f*g)(a) = sum over ordered bipartitions of
    weight * f(a1) * g(a2); at the empty multiset, f(0)g(0)."""
    _check_shapes(f, g)
    out = {}
    for a in f.domain():
        terms = [bp.weight * f(bp.first) * g(bp.second)
                 for bp in ordered_bipartitions_of(a)]
        out[a] = _sum_terms(terms)
    return MMap(f.n, out, f.caps)


def _partition_sum(f: MMap, a: Multiset, prefactor) -> object:
    """sum over partitions p of a of coeff(p) * prefactor(|p|) * prod f(c).

    Partitions are consumed in descending block-count order to limit
    cancellation; scalar sums are compensated.
    """
    parts = sorted(partitions_of(a), key=lambda pc: -pc[0].part_count)
    terms = []
    for part, coeff in parts:
        t = coeff * prefactor(part.part_count)
        for c in part.blocks:
            t = t * f(c)
        terms.append(t)
    return _sum_terms(terms)


def _inv_const_powers(f: MMap, top: int) -> list:
    c = f(EMPTY)
    if constant_part(c) == 0:
        raise NonInvertibleError("f(empty) is not invertible")
    inv = ring_inv(c)
    powers = [1.0, inv]
    for _ in range(top - 1):
        powers.append(powers[-1] * inv)
    return powers


def apply_fstar(derivs: Callable[[int, object], object], f: MMap) -> MMap:
    """Lift a scalar function F to the algebra: (F*f)(a) is the partition
    sum of F^(|p|)(f(empty)) times the block product.

    `derivs(k, x)` must return the k-th derivative of F at x, for k from 0
    up to the largest multiset size in the lattice.  Satisfies the
    composition law (FG)* = F* G*.
    """
    c = f(EMPTY)
    out = {EMPTY: derivs(0, c)}
    for a in f.domain():
        if a.is_empty:
            continue
        out[a] = _partition_sum(f, a, lambda k: derivs(k, c))
    return MMap(f.n, out, f.caps)


def log_star(f: MMap) -> MMap:
    """The cumulant: signed partition sum with (|p|-1)! (-1)^(|p|-1) and
    division by f(empty)^|p|; log f(empty) at the empty multiset."""
    top = max(a.size for a in f.domain())
    inv_pow = _inv_const_powers(f, top)
    out = {EMPTY: ring_log(f(EMPTY))}
    for a in f.domain():
        if a.is_empty:
            continue
        out[a] = _partition_sum(
            f, a,
            lambda k: factorial(k - 1) * (-1) ** (k - 1) * inv_pow[k],
        )
    return MMap(f.n, out, f.caps)


def exp_star(f: MMap) -> MMap:
    """The anticumulant, inverse of log_star: e^f(empty) times the plain
    partition sum of block products."""
    scale = ring_exp(f(EMPTY))
    out = {EMPTY: scale}
    for a in f.domain():
        if a.is_empty:
            continue
        out[a] = scale * _partition_sum(f, a, lambda k: 1.0)
    return MMap(f.n, out, f.caps)


def inverse_star(f: MMap) -> MMap:
    """Convolution inverse: partition sum with |p|! (-1)^|p| / f(empty)^(|p|+1)."""
    top = max(a.size for a in f.domain())
    inv_pow = _inv_const_powers(f, top + 1)
    out = {EMPTY: inv_pow[1]}
    for a in f.domain():
        if a.is_empty:
            continue
        out[a] = _partition_sum(
            f, a,
            lambda k: factorial(k) * (-1) ** k * inv_pow[k + 1],
        )
    return MMap(f.n, out, f.caps)


def log1p_series(f: MMap, depth: int, with_deltas: bool = False):
    """Partial sum f - f*f/2 + f*f*f/3 - ... to `depth` terms.

    Converges to log_star(identity + f) when |f(empty)| < 1.  No
    convergence rate is asserted on nonempty multisets; with
    ``with_deltas=True`` the per-entry magnitude of the last added term is
    returned alongside, as a truncation diagnostic.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if abs(constant_part(f(EMPTY))) >= 1.0:
        raise SeriesDivergenceError(
            "series requires |f(empty)| < 1, got "
            f"{abs(constant_part(f(EMPTY))):.6g}"
        )
    acc = {a: f(a) for a in f.domain()}
    last = dict(acc)
    power = f
    for k in range(2, depth + 1):
        power = convolve(power, f)
        sign = (-1) ** (k + 1)
        last = {a: power(a) * (sign / k) for a in f.domain()}
        acc = {a: acc[a] + last[a] for a in f.domain()}
    result = MMap(f.n, acc, f.caps)
    if not with_deltas:
        return result
    deltas = {a: _value_magnitude(v) for a, v in last.items()}
    return result, deltas


def _value_magnitude(v) -> float:
    if hasattr(v, "coeffs"):
        return max((abs(c) for c in v.coeffs.values()), default=0.0)
    return abs(v)


def raise_label(f: MMap, i: int) -> MMap:
    """Raising operator: (d_i* f)(a) = f(a + {i}).

    Entries at the cap boundary (multiplicity of i already at its cap)
    would need values beyond the stored lattice; they read as zero, so the
    raised map is faithful only below the boundary.
    """
    if not (1 <= i <= f.n):
        raise CapExceededError(f"label {i} outside ground set 1..{f.n}")
    out = {}
    for a in f.domain():
        lifted = a.add(i)
        if lifted.fits(f.caps):
            out[a] = f(lifted)
    return MMap(f.n, out, f.caps)


def is_factorizing(f: MMap, part_a: Iterable[int], part_b: Iterable[int],
                   tol: float = DEFAULT_TOL) -> bool:
    """True iff f(c) = f(c & A) f(c & B) for every c, within tol.

    {A, B} must be a bipartition of the ground set 1..n.
    """
    sa, sb = set(part_a), set(part_b)
    if sa & sb or sa | sb != set(range(1, f.n + 1)):
        raise NotBipartitionError(f"{sorted(sa)} / {sorted(sb)} is not a bipartition")
    for c in f.domain():
        prod = f(c.restrict(sa)) * f(c.restrict(sb))
        if not value_allclose(f(c), prod, tol):
            return False
    return True
