"""Truncated multivariate polynomials (jets) in the coupling strengths.

A jet stores the monomial coefficients of a polynomial in gamma_1..gamma_n
truncated by per-variable degree caps; products drop any monomial that
exceeds a cap.  Mixed partial derivatives at gamma = 0 are then exact ring
reads: the derivative equals the monomial coefficient times the product of
multiplicity factorials.  Multilinear jets (all caps 1) multiply exactly
like moment-algebra convolution of their coefficient maps.

JetMatrix holds a square matrix with jet entries as a stack of dense
complex coefficient blocks, one per lattice multiset, so matrix products
reduce to a short list of ordinary BLAS products.  jet_matrix_exp is the
scaling-and-squaring exponential in this ring; its multilinear coefficient
of prod_{j in a} gamma_j equals the permutation-summed simplex integral of
the Dyson expansion, which is what every 'lowest joint order' statement
consumes.
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np

from .combinatorics import EMPTY, Multiset, multiset_lattice
from .errors import CapExceededError, DomainError, NonInvertibleError

_TAYLOR_DEGREE = 20
_SCALE_TARGET = 0.5


@lru_cache(maxsize=None)
def _pair_table(caps: tuple[int, ...]):
    """All (a, b) lattice pairs whose multiset sum stays within caps."""
    lattice = multiset_lattice(len(caps), caps)
    index = {a: i for i, a in enumerate(lattice)}
    triples = []
    for a in lattice:
        for b in lattice:
            s = a + b
            if s.fits(caps):
                triples.append((index[a], index[b], index[s]))
    return lattice, index, tuple(triples)


def _mult_factorial(a: Multiset) -> int:
    out = 1
    for _, m in a.items:
        out *= math.factorial(m)
    return out


class Jet:
    """Truncated polynomial; coefficients are monomial-convention complex."""

    __slots__ = ("n", "caps", "coeffs")

    def __init__(self, n: int, caps: tuple[int, ...], coeffs=None):
        self.n = int(n)
        self.caps = tuple(caps)
        if len(self.caps) != self.n:
            raise DomainError("caps length must equal number of variables")
        self.coeffs: dict[Multiset, complex] = {}
        if coeffs:
            for a, c in dict(coeffs).items():
                if not isinstance(a, Multiset):
                    a = Multiset(a)
                if not a.fits(self.caps):
                    raise CapExceededError(f"monomial {a} exceeds caps {self.caps}")
                c = complex(c)
                if c != 0:
                    self.coeffs[a] = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def scalar(cls, value, n: int, caps: tuple[int, ...]) -> "Jet":
        return cls(n, caps, {EMPTY: value})

    @classmethod
    def variable(cls, i: int, n: int, caps: tuple[int, ...], scale=1.0) -> "Jet":
        if not (1 <= i <= n) or caps[i - 1] < 1:
            raise CapExceededError(f"no variable slot for gamma_{i}")
        return cls(n, caps, {Multiset([i]): scale})

    @classmethod
    def ensure(cls, value, n: int, caps: tuple[int, ...]) -> "Jet":
        if isinstance(value, Jet):
            return value
        return cls.scalar(value, n, caps)

    def promote(self, scalar) -> "Jet":
        return Jet.scalar(scalar, self.n, self.caps)

    # -- reads -------------------------------------------------------------

    @property
    def constant(self) -> complex:
        return self.coeffs.get(EMPTY, 0j)

    def coefficient(self, a: Multiset) -> complex:
        """Monomial coefficient of prod gamma^mult."""
        if not a.fits(self.caps):
            raise CapExceededError(f"monomial {a} exceeds caps {self.caps}")
        return self.coeffs.get(a, 0j)

    def derivative(self, a: Multiset) -> complex:
        """Mixed partial at gamma = 0: coefficient times prod(mult!)."""
        return self.coefficient(a) * _mult_factorial(a)

    # -- arithmetic --------------------------------------------------------

    def _wrap(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.n != self.n or other.caps != self.caps:
                raise DomainError("jet shape mismatch")
            return other
        if isinstance(other, (int, float, complex)):
            return Jet.scalar(other, self.n, self.caps)
        return None

    def __add__(self, other):
        other = self._wrap(other)
        if other is None:
            return NotImplemented
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out.get(a, 0j) + c
        return Jet(self.n, self.caps, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, self.caps, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other):
        other = self._wrap(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        other = self._wrap(other)
        if other is None:
            return NotImplemented
        caps = self.caps
        out: dict[Multiset, complex] = {}
        for a, ca in self.coeffs.items():
            for b, cb in other.coeffs.items():
                s = a + b
                if s.fits(caps):
                    out[s] = out.get(s, 0j) + ca * cb
        return Jet(self.n, caps, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    # -- transcendental ----------------------------------------------------

    def _nilpotent(self) -> "Jet":
        out = dict(self.coeffs)
        out.pop(EMPTY, None)
        return Jet(self.n, self.caps, out)

    def exp(self) -> "Jet":
        """exp(c + N) = e^c sum_k N^k / k!, the sum finite by nilpotency."""
        nil = self._nilpotent()
        acc = Jet.scalar(1.0, self.n, self.caps)
        term = acc
        for k in range(1, sum(self.caps) + 1):
            term = term * nil * (1.0 / k)
            if not term.coeffs:
                break
            acc = acc + term
        return acc * cmath.exp(self.constant)

    def log(self) -> "Jet":
        if self.constant == 0:
            raise NonInvertibleError("log of a jet with zero constant part")
        u = self * (1.0 / self.constant) - 1.0
        acc = Jet.scalar(cmath.log(self.constant), self.n, self.caps)
        term = Jet.scalar(1.0, self.n, self.caps)
        for k in range(1, sum(self.caps) + 1):
            term = term * u
            if not term.coeffs:
                break
            acc = acc + term * ((-1.0) ** (k + 1) / k)
        return acc

    def inverse(self) -> "Jet":
        if self.constant == 0:
            raise NonInvertibleError("inverse of a jet with zero constant part")
        u = 1.0 - self * (1.0 / self.constant)
        acc = Jet.scalar(1.0, self.n, self.caps)
        term = acc
        for _ in range(sum(self.caps)):
            term = term * u
            if not term.coeffs:
                break
            acc = acc + term
        return acc * (1.0 / self.constant)

    # -- comparisons -------------------------------------------------------

    def max_abs_diff(self, other: "Jet") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self.coeffs.get(a, 0j) - other.coeffs.get(a, 0j))
                    for a in keys), default=0.0)

    def allclose(self, other: "Jet", tol: float = 1e-12) -> bool:
        return self.max_abs_diff(other) <= tol

    def __repr__(self) -> str:
        body = " + ".join(
            f"({c:.6g})*g{a}" if not a.is_empty else f"({c:.6g})"
            for a, c in sorted(self.coeffs.items(), key=lambda kv: kv[0].sort_key)
        )
        return f"Jet[{body or '0'}]"


class JetMatrix:
    """Square matrix with jet entries, stored as coefficient blocks.

    blocks[k] is the dense complex matrix coefficient of the k-th lattice
    monomial; blocks[0] (the empty multiset) is the constant part.
    """

    __slots__ = ("n", "caps", "lattice", "index", "blocks")

    def __init__(self, n: int, caps: tuple[int, ...], blocks: np.ndarray):
        self.n = int(n)
        self.caps = tuple(caps)
        self.lattice, self.index, _ = _pair_table(self.caps)
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim != 3 or blocks.shape[0] != len(self.lattice):
            raise DomainError("blocks must have shape (lattice, d, d)")
        if blocks.shape[1] != blocks.shape[2]:
            raise DomainError("jet matrices must be square")
        self.blocks = blocks

    @classmethod
    def zeros(cls, dim: int, n: int, caps: tuple[int, ...]) -> "JetMatrix":
        lattice = multiset_lattice(n, caps)
        return cls(n, caps, np.zeros((len(lattice), dim, dim), dtype=complex))

    @classmethod
    def identity(cls, dim: int, n: int, caps: tuple[int, ...]) -> "JetMatrix":
        out = cls.zeros(dim, n, caps)
        out.blocks[out.index[EMPTY]] = np.eye(dim, dtype=complex)
        return out

    @classmethod
    def from_terms(cls, terms: dict, dim: int, n: int,
                   caps: tuple[int, ...]) -> "JetMatrix":
        out = cls.zeros(dim, n, caps)
        for a, mat in terms.items():
            if not isinstance(a, Multiset):
                a = Multiset(a)
            out.blocks[out.index[a]] += np.asarray(mat, dtype=complex)
        return out

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]

    @property
    def constant(self) -> np.ndarray:
        return self.blocks[self.index[EMPTY]]

    def _check(self, other: "JetMatrix") -> None:
        if self.caps != other.caps or self.dim != other.dim:
            raise DomainError("jet matrix shape mismatch")

    def __add__(self, other: "JetMatrix") -> "JetMatrix":
        self._check(other)
        return JetMatrix(self.n, self.caps, self.blocks + other.blocks)

    def __sub__(self, other: "JetMatrix") -> "JetMatrix":
        self._check(other)
        return JetMatrix(self.n, self.caps, self.blocks - other.blocks)

    def __mul__(self, scalar) -> "JetMatrix":
        if isinstance(scalar, Jet):
            return self.scale_by_jet(scalar)
        return JetMatrix(self.n, self.caps, self.blocks * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "JetMatrix") -> "JetMatrix":
        self._check(other)
        _, _, triples = _pair_table(self.caps)
        out = np.zeros_like(self.blocks)
        for ia, ib, ic in triples:
            a = self.blocks[ia]
            if not a.any():
                continue
            b = other.blocks[ib]
            if not b.any():
                continue
            out[ic] += a @ b
        return JetMatrix(self.n, self.caps, out)

    def scale_by_jet(self, jet: Jet) -> "JetMatrix":
        if jet.n != self.n or jet.caps != self.caps:
            raise DomainError("jet matrix shape mismatch")
        out = np.zeros_like(self.blocks)
        for a, c in jet.coeffs.items():
            for b in self.lattice:
                s = a + b
                if s.fits(self.caps):
                    out[self.index[s]] += c * self.blocks[self.index[b]]
        return JetMatrix(self.n, self.caps, out)

    def dagger(self) -> "JetMatrix":
        """Conjugate transpose; the gammas are formal real variables, so
        only the matrix blocks are conjugated."""
        return JetMatrix(self.n, self.caps,
                         np.conj(np.transpose(self.blocks, (0, 2, 1))))

    def trace(self) -> Jet:
        return Jet(self.n, self.caps,
                   {a: np.trace(self.blocks[i]) for i, a in enumerate(self.lattice)})

    def bilinear(self, bra: np.ndarray, ket: np.ndarray) -> Jet:
        """<bra| M |ket> as a jet (bra is conjugated)."""
        bra = np.asarray(bra, dtype=complex).conj()
        ket = np.asarray(ket, dtype=complex)
        vals = np.einsum("i,kij,j->k", bra, self.blocks, ket)
        return Jet(self.n, self.caps,
                   {a: vals[i] for i, a in enumerate(self.lattice)})

    def entry(self, i: int, j: int) -> Jet:
        return Jet(self.n, self.caps,
                   {a: self.blocks[k][i, j] for k, a in enumerate(self.lattice)})


def jet_matrix_exp(m: JetMatrix) -> JetMatrix:
    """Matrix exponential in the truncated polynomial ring.

    Scaling and squaring: halve until the total block 1-norm (an upper
    bound for the algebra norm, submultiplicative by the Cauchy product)
    is at most 0.5, run the degree-20 Taylor polynomial, square back.
    """
    total = sum(np.linalg.norm(b, 1) for b in m.blocks)
    squarings = 0
    if total > _SCALE_TARGET:
        squarings = max(0, math.ceil(math.log2(total / _SCALE_TARGET)))
    scaled = m * (2.0 ** -squarings)
    acc = JetMatrix.identity(m.dim, m.n, m.caps)
    term = acc
    for k in range(1, _TAYLOR_DEGREE + 1):
        term = (term @ scaled) * (1.0 / k)
        acc = acc + term
    for _ in range(squarings):
        acc = acc @ acc
    return acc
