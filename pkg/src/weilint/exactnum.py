"""Exact rational and cyclotomic arithmetic.

Scalars live in ``CycNumber``: an element of Q(zeta_M) stored by its M
coefficients modulo x^M - 1.  Reduction modulo the cyclotomic polynomial
is done lazily, only when equality or integrality is asked for.

``CycArray`` is the bulk counterpart used for vectors and matrices.  It
keeps canonical coordinates (degree < phi(M)) as an integer numpy array
with one shared denominator, which is what makes |D| x |D| products
over Q(zeta_M) affordable.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache, reduce
from math import gcd, lcm
from typing import Iterable, Sequence

import numpy as np

Rational = Fraction

_FLOAT_EXACT = 2 ** 52
_INT_EXACT = 2 ** 62
# CycArray.matmul switches to evaluation at roots mod primes above these sizes
_MODULAR_MIN_PHI = 16
_MODULAR_MIN_WORK = 4096


# ---------------------------------------------------------------------------
# elementary number theory

def factorize(n: int) -> dict[int, int]:
    """Prime factorisation by trial division (n is always small here)."""
    if n < 1:
        raise ValueError(f"cannot factor {n}")
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@lru_cache(maxsize=None)
def euler_phi(n: int) -> int:
    r = n
    for p in factorize(n):
        r = r // p * (p - 1)
    return r


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def is_prime(n: int) -> bool:
    return n >= 2 and factorize(n) == {n: 1}


def legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def squarefree_part(n: int) -> tuple[int, int]:
    """Return (s, r) with n = s * r^2 and s squarefree."""
    s, r = 1, 1
    for p, e in factorize(n).items():
        r *= p ** (e // 2)
        if e % 2:
            s *= p
    return s, r


def sqrt_conductor(n: int) -> int:
    """Smallest M with sqrt(n) in Q(zeta_M)."""
    s, _ = squarefree_part(n)
    if s == 1:
        return 1
    return s if s % 4 == 1 else 4 * s


def fraction_str(x: Fraction) -> str:
    """Canonical text form: "3", "-1/2"."""
    return str(Fraction(x))


def parse_fraction(s: str | int | Fraction) -> Fraction:
    return Fraction(s)


# ---------------------------------------------------------------------------
# cyclotomic polynomials and reduction tables

def _poly_divexact(num: list[int], den: list[int]) -> list[int]:
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    lead = den[-1]
    for i in range(len(out) - 1, -1, -1):
        c = num[i + len(den) - 1] // lead
        out[i] = c
        if c:
            for j, d in enumerate(den):
                num[i + j] -= c * d
    if any(num):
        raise ArithmeticError("inexact polynomial division")
    return out


@lru_cache(maxsize=None)
def cyclotomic_poly(M: int) -> tuple[int, ...]:
    """Coefficients of Phi_M, lowest degree first."""
    if M == 1:
        return (-1, 1)
    poly = [-1] + [0] * (M - 1) + [1]
    for d in divisors(M)[:-1]:
        poly = _poly_divexact(poly, list(cyclotomic_poly(d)))
    return tuple(poly)


@lru_cache(maxsize=None)
def _power_table(M: int, length: int) -> np.ndarray:
    """Row k holds the canonical coordinates of x^k modulo Phi_M."""
    phi = euler_phi(M)
    cyc = cyclotomic_poly(M)
    rows = []
    cur = [0] * phi
    cur[0] = 1
    for _ in range(length):
        rows.append(list(cur))
        top = cur[-1]
        cur = [0] + cur[:-1]
        if top:
            for i in range(phi):
                cur[i] -= top * cyc[i]
    arr = np.array(rows, dtype=object).reshape(length, phi)
    if all(abs(int(v)) < _INT_EXACT for v in arr.flat):
        arr = arr.astype(np.int64)
    arr.setflags(write=False)
    return arr


def reduction_table(M: int, length: int | None = None) -> np.ndarray:
    if length is None:
        length = M
    return _power_table(M, max(length, 1))


@lru_cache(maxsize=None)
def _embed_table(M: int, M2: int) -> np.ndarray:
    """Canonical coords of zeta_M^j, j < phi(M), inside Q(zeta_M2)."""
    if M2 % M:
        raise ValueError(f"cannot embed conductor {M} into {M2}")
    step = M2 // M
    tab = reduction_table(M2)
    return tab[[(j * step) % M2 for j in range(euler_phi(M))]]


# ---------------------------------------------------------------------------
# scalars

def _canon_from_cyclic(M: int, coeffs: Sequence[Fraction]) -> tuple[Fraction, ...]:
    phi = euler_phi(M)
    tab = reduction_table(M)
    out = [Fraction(0)] * phi
    for k, c in enumerate(coeffs):
        if c:
            row = tab[k]
            for i in range(phi):
                if row[i]:
                    out[i] += c * int(row[i])
    return tuple(out)


_ZERO, _ONE = Fraction(0), Fraction(1)


class CycNumber:
    """Element of Q(zeta_M) stored as M rational coefficients mod x^M - 1."""

    __slots__ = ("conductor", "coeffs", "_canon")

    def __init__(self, conductor: int, coeffs: Iterable):
        if conductor < 1:
            raise ValueError("conductor must be positive")
        cs = tuple(c if type(c) is Fraction else Fraction(c) for c in coeffs)
        if len(cs) != conductor:
            raise ValueError(f"expected {conductor} coefficients, got {len(cs)}")
        self.conductor = conductor
        self.coeffs = cs
        self._canon = None

    # construction
    @classmethod
    def zero(cls, M: int = 1) -> "CycNumber":
        return cls(M, [0] * M)

    @classmethod
    def from_rational(cls, x, M: int = 1) -> "CycNumber":
        return cls(M, [Fraction(x)] + [0] * (M - 1))

    @classmethod
    def from_canonical(cls, M: int, canon: Sequence) -> "CycNumber":
        cs = [Fraction(c) for c in canon] + [Fraction(0)] * (M - len(canon))
        return cls(M, cs)

    @classmethod
    def root(cls, a: int, M: int) -> "CycNumber":
        cs = [_ZERO] * M
        cs[a % M] = _ONE
        return cls(M, cs)

    # views
    def canonical(self) -> tuple[Fraction, ...]:
        if self._canon is None:
            self._canon = _canon_from_cyclic(self.conductor, self.coeffs)
        return self._canon

    def embed(self, M2: int) -> "CycNumber":
        if M2 == self.conductor:
            return self
        if M2 % self.conductor:
            raise ValueError(f"cannot embed conductor {self.conductor} into {M2}")
        step = M2 // self.conductor
        cs = [Fraction(0)] * M2
        for k, c in enumerate(self.coeffs):
            cs[k * step] = c
        return CycNumber(M2, cs)

    def restrict(self, M2: int) -> "CycNumber":
        """Inverse of ``embed``; fails if the value is not in Q(zeta_M2)."""
        if self.conductor % M2:
            raise ValueError(f"{M2} does not divide {self.conductor}")
        step = self.conductor // M2
        canon = self.canonical()
        # solve in the smaller field by trying the natural preimage
        cand = CycNumber(M2, [self._coeff_sum(k, step) for k in range(M2)])
        if cand.embed(self.conductor) != self:
            # fall back to a linear solve over Q
            tab = _embed_table(M2, self.conductor)
            sol = solve_rational(
                [[Fraction(int(tab[j][i])) for j in range(tab.shape[0])] for i in range(tab.shape[1])],
                list(canon),
            )
            if sol is None:
                raise ValueError(f"value does not lie in Q(zeta_{M2})")
            cand = CycNumber.from_canonical(M2, sol)
        return cand

    def _coeff_sum(self, k: int, step: int) -> Fraction:
        return self.coeffs[k * step] if k * step < self.conductor else Fraction(0)

    # predicates
    def is_zero(self) -> bool:
        return not any(self.canonical())

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.canonical())

    def is_rational(self) -> bool:
        return not any(self.canonical()[1:])

    def rational_value(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("not a rational number")
        return self.canonical()[0]

    # arithmetic
    def _common(self, other) -> tuple["CycNumber", "CycNumber"]:
        if not isinstance(other, CycNumber):
            other = CycNumber.from_rational(other, self.conductor)
        M = lcm(self.conductor, other.conductor)
        return self.embed(M), other.embed(M)

    def __add__(self, other):
        a, b = self._common(other)
        return CycNumber(a.conductor, [x + y for x, y in zip(a.coeffs, b.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return CycNumber(self.conductor, [-x for x in self.coeffs])

    def __sub__(self, other):
        a, b = self._common(other)
        return CycNumber(a.conductor, [x - y for x, y in zip(a.coeffs, b.coeffs)])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return CycNumber(self.conductor, [x * other for x in self.coeffs])
        a, b = self._common(other)
        M = a.conductor
        da = reduce(lcm, (x.denominator for x in a.coeffs), 1)
        db = reduce(lcm, (y.denominator for y in b.coeffs), 1)
        ia = [x.numerator * (da // x.denominator) for x in a.coeffs]
        ib = [y.numerator * (db // y.denominator) for y in b.coeffs]
        bound = max(map(abs, ia)) * max(map(abs, ib)) * M
        if bound < _INT_EXACT:
            conv = np.convolve(np.array(ia, dtype=np.int64), np.array(ib, dtype=np.int64))
            folded = conv[:M].copy()
            folded[: M - 1] += conv[M:]
            vals = folded.tolist()
        else:
            vals = [0] * M
            nz = [(j, y) for j, y in enumerate(ib) if y]
            for i, x in enumerate(ia):
                if x:
                    for j, y in nz:
                        vals[(i + j) % M] += x * y
        d = da * db
        return CycNumber(M, [Fraction(v, d) if v else _ZERO for v in vals])

    __rmul__ = __mul__

    def inverse(self) -> "CycNumber":
        M = self.conductor
        nz = [(k, c) for k, c in enumerate(self.coeffs) if c]
        if len(nz) == 1:
            k, c = nz[0]
            return CycNumber.root(-k, M) * (1 / c)
        phi = euler_phi(M)
        canon = self.canonical()
        if not any(canon):
            raise ZeroDivisionError("division by zero in Q(zeta_M)")
        # columns: canonical coords of self * x^j
        cols = [CycNumber.from_canonical(M, canon) * CycNumber.root(j, M) for j in range(phi)]
        mat = [[cols[j].canonical()[i] for j in range(phi)] for i in range(phi)]
        rhs = [Fraction(1)] + [Fraction(0)] * (phi - 1)
        sol = solve_rational(mat, rhs)
        return CycNumber.from_canonical(M, sol)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return self * (1 / Fraction(other))
        a, b = self._common(other)
        return a * b.inverse()

    def __rtruediv__(self, other):
        return CycNumber.from_rational(other, self.conductor) / self

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        out = CycNumber.from_rational(1, self.conductor)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def conj(self) -> "CycNumber":
        M = self.conductor
        return CycNumber(M, [self.coeffs[(-k) % M] for k in range(M)])

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNumber.from_rational(other, self.conductor)
        if not isinstance(other, CycNumber):
            return NotImplemented
        a, b = self._common(other)
        return a.canonical() == b.canonical()

    def __hash__(self):
        # hash the value in its minimal field so embeddings hash alike
        return hash(("cyc", self.canonical_minimal()))

    def canonical_minimal(self) -> tuple[int, tuple[Fraction, ...]]:
        M = self.conductor
        for d in divisors(M):
            try:
                r = self.restrict(d)
            except ValueError:
                continue
            return d, r.canonical()
        return M, self.canonical()

    def __repr__(self):
        terms = [f"{fraction_str(c)}*z{self.conductor}^{i}" for i, c in enumerate(self.canonical()) if c]
        return "CycNumber(" + (" + ".join(terms) if terms else "0") + ")"

    def to_json(self) -> dict:
        return {"conductor": self.conductor, "coeffs": [fraction_str(c) for c in self.canonical()]}

    @classmethod
    def from_json(cls, obj: dict) -> "CycNumber":
        return cls.from_canonical(int(obj["conductor"]), [parse_fraction(c) for c in obj["coeffs"]])


def root_of_unity(a: int, M: int) -> CycNumber:
    """e(a/M) as the monomial zeta_M^(a mod M)."""
    if M < 1:
        raise ValueError("conductor must be positive")
    return CycNumber.root(a, M)


def e_frac(x: Fraction, M: int) -> CycNumber:
    """e(x) for rational x whose denominator divides M."""
    x = Fraction(x)
    if M % x.denominator:
        raise ValueError(f"e({x}) does not lie in Q(zeta_{M})")
    return CycNumber.root(x.numerator * (M // x.denominator), M)


def inv_root_difference(a: int, b: int, M: int) -> CycNumber:
    """1 / (zeta_M^a - zeta_M^b), using sum_j j w^j = n / (w - 1) for w of order n."""
    d = (a - b) % M
    if d == 0:
        raise ZeroDivisionError("equal roots of unity")
    n = M // gcd(d, M)
    cs = [_ZERO] * M
    for j in range(1, n):
        cs[(d * j - b) % M] += Fraction(j, n)
    return CycNumber(M, cs)


def canonical_reduce(z: CycNumber) -> tuple[Fraction, ...]:
    return z.canonical()


def is_integral(z: CycNumber) -> bool:
    return z.is_integral()


@lru_cache(maxsize=None)
def _sqrt_prime(p: int, M: int) -> CycNumber:
    if p == 2:
        return CycNumber.root(1, 8).embed(M) + CycNumber.root(-1, 8).embed(M)
    g = CycNumber.zero(p)
    for x in range(p):
        g = g + CycNumber.root(x * x, p)
    g = g.embed(M)
    if p % 4 == 3:
        g = g * CycNumber.root(-1, 4).embed(M)
    return g


def sqrt_nat(n: int, M: int | None = None) -> CycNumber:
    """Positive square root of n inside Q(zeta_M)."""
    if n < 1:
        raise ValueError("sqrt_nat needs a positive integer")
    need = sqrt_conductor(n)
    if M is None:
        M = need
    if M % need:
        raise ValueError(f"sqrt({n}) is not in Q(zeta_{M}); minimal valid conductor is {need}")
    s, r = squarefree_part(n)
    out = CycNumber.from_rational(r, M)
    for p in factorize(s):
        out = out * _sqrt_prime(p, M)
    return out


# ---------------------------------------------------------------------------
# small exact linear algebra over Q

def rref_rational(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    m = [list(map(Fraction, r)) for r in rows]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def solve_rational(mat: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """A solution of mat @ x = rhs (free variables set to zero), or None."""
    ncols = len(mat[0]) if mat else 0
    aug = [list(row) + [b] for row, b in zip(mat, rhs)]
    red, piv = rref_rational(aug)
    if piv and piv[-1] == ncols:
        return None
    x = [Fraction(0)] * ncols
    for row, c in zip(red, piv):
        x[c] = row[-1]
    return x


def nullspace_rational(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    red, piv = rref_rational(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, c in zip(red, piv):
            v[c] = -row[f]
        basis.append(v)
    return basis


def integer_primitive(v: Sequence[Fraction]) -> list[int]:
    """Scale a rational vector to a primitive integer vector."""
    den = reduce(lcm, (Fraction(x).denominator for x in v), 1)
    ints = [int(Fraction(x) * den) for x in v]
    g = reduce(gcd, ints, 0)
    return [x // g for x in ints] if g else ints


def _mod_prime_for(M: int, lo: int = 1 << 28) -> int:
    p = lo - (lo % M) + 1
    while not is_prime_fast(p):
        p += M
    return p


def is_prime_fast(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def rank_mod_p(mat: np.ndarray, p: int) -> int:
    """Rank of an integer matrix over F_p."""
    a = np.array(mat, dtype=object) % p
    a = a.astype(np.int64)
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        inv = pow(int(a[r, c]), p - 2, p)
        a[r] = (a[r] * inv) % p
        col = a[:, c].copy()
        col[r] = 0
        nzr = np.nonzero(col)[0]
        if nzr.size:
            a[nzr] = (a[nzr] - np.outer(col[nzr], a[r]) % p) % p
        r += 1
        if r == rows:
            break
    return r


def independent_rows_mod_p(mat: np.ndarray, p: int) -> list[int]:
    """Indices of a maximal set of rows independent over F_p (greedy, in order)."""
    a = (np.array(mat, dtype=object) % p).astype(np.int64)
    basis: list[np.ndarray] = []
    pivots: list[int] = []
    chosen = []
    for i, row in enumerate(a):
        v = row.copy()
        for b, c in zip(basis, pivots):
            if v[c]:
                v = (v - v[c] * b) % p
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            continue
        c = int(nz[0])
        v = (v * pow(int(v[c]), p - 2, p)) % p
        # keep basis reduced on the new pivot
        for k in range(len(basis)):
            if basis[k][c]:
                basis[k] = (basis[k] - basis[k][c] * v) % p
        basis.append(v)
        pivots.append(c)
        chosen.append(i)
        if len(chosen) == a.shape[1]:
            break
    return chosen


# ---------------------------------------------------------------------------
# bulk arrays over Q(zeta_M)

def _maxabs(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return int(np.abs(a).max())


def _fit(a: np.ndarray) -> np.ndarray:
    """Use int64 storage whenever the values allow it."""
    if a.dtype == object:
        if _maxabs(a) < _INT_EXACT:
            return a.astype(np.int64)
        return a
    if a.dtype != np.int64:
        return a.astype(np.int64)
    return a


def _as_obj(a: np.ndarray) -> np.ndarray:
    return a if a.dtype == object else a.astype(object)


def _matmul_exact(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integer matrix product, using BLAS when it cannot round."""
    inner = a.shape[-1]
    bound = _maxabs(a) * _maxabs(b) * max(inner, 1)
    if bound < _FLOAT_EXACT:
        return np.rint(a.astype(np.float64) @ b.astype(np.float64)).astype(np.int64)
    if bound < _INT_EXACT:
        if a.dtype != object and b.dtype != object:
            return _matmul_limbs(a, b, inner)
        return a.astype(np.int64) @ b.astype(np.int64)
    return _as_obj(a) @ _as_obj(b)


def _matmul_limbs(a: np.ndarray, b: np.ndarray, inner: int) -> np.ndarray:
    """Split the larger factor into small limbs so each product fits BLAS."""
    swap = _maxabs(a) > _maxabs(b)
    if swap:
        a, b = b.T, a.T
    amax = max(_maxabs(a), 1)
    bits = (_FLOAT_EXACT // (amax * max(inner, 1))).bit_length() - 2
    if bits < 8:
        out = a.astype(np.int64) @ b.astype(np.int64)
        return out.T if swap else out
    af = a.astype(np.float64)
    sign = np.sign(b)
    rest = np.abs(b).astype(np.int64)
    mask = (1 << bits) - 1
    out = None
    shift = 0
    while rest.any():
        limb = ((rest & mask) * sign).astype(np.float64)
        part = np.rint(af @ limb).astype(np.int64) << shift
        out = part if out is None else out + part
        rest >>= bits
        shift += bits
    if out is None:
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    return out.T if swap else out


def _array_gcd(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    if a.dtype == object:
        return reduce(gcd, (int(x) for x in a.flat), 0)
    return int(np.gcd.reduce(np.abs(a).ravel()))


class CycArray:
    """Dense array over Q(zeta_M) in canonical coordinates.

    ``num`` has shape ``(*shape, phi(M))`` and holds integers; the value
    of an entry is ``num[idx] / den`` read in the power basis.
    """

    __slots__ = ("conductor", "num", "den")

    def __init__(self, conductor: int, num: np.ndarray, den: int = 1):
        if den <= 0:
            raise ValueError("denominator must be positive")
        self.conductor = conductor
        self.num = _fit(np.asarray(num))
        self.den = int(den)

    # construction
    @property
    def phi(self) -> int:
        return self.num.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.num.shape[:-1]

    @classmethod
    def zeros(cls, shape, M: int) -> "CycArray":
        if isinstance(shape, int):
            shape = (shape,)
        return cls(M, np.zeros(tuple(shape) + (euler_phi(M),), dtype=np.int64))

    @classmethod
    def identity(cls, n: int, M: int) -> "CycArray":
        num = np.zeros((n, n, euler_phi(M)), dtype=np.int64)
        num[np.arange(n), np.arange(n), 0] = 1
        return cls(M, num)

    @classmethod
    def roots(cls, exps, M: int, mask=None) -> "CycArray":
        """Entries zeta_M^exps (set to 0 where ``mask`` is false)."""
        exps = np.asarray(exps, dtype=np.int64) % M
        num = np.array(reduction_table(M)[exps])
        if mask is not None:
            num = num * np.asarray(mask, dtype=np.int64)[..., None]
        return cls(M, num)

    @classmethod
    def from_numbers(cls, entries, M: int | None = None) -> "CycArray":
        shape = entries.shape if isinstance(entries, np.ndarray) else _nested_shape(entries)
        flat = list(_flatten(entries))
        if M is None:
            M = reduce(lcm, (z.conductor for z in flat if isinstance(z, CycNumber)), 1)
        canon = []
        for z in flat:
            if not isinstance(z, CycNumber):
                z = CycNumber.from_rational(z, M)
            canon.append(z.embed(M).canonical())
        den = reduce(lcm, (c.denominator for row in canon for c in row), 1)
        phi = euler_phi(M)
        num = np.array([[int(c * den) for c in row] for row in canon], dtype=object)
        num = num.reshape(tuple(shape) + (phi,))
        return cls(M, num, den).normalized()

    @classmethod
    def from_rationals(cls, values, M: int) -> "CycArray":
        vals = np.asarray(values, dtype=object)
        den = reduce(lcm, (Fraction(x).denominator for x in vals.flat), 1)
        num = np.zeros(vals.shape + (euler_phi(M),), dtype=object)
        num[..., 0] = np.vectorize(lambda x: int(Fraction(x) * den), otypes=[object])(vals) if vals.size else 0
        return cls(M, num, den).normalized()

    # basic views
    def copy(self) -> "CycArray":
        return CycArray(self.conductor, self.num.copy(), self.den)

    def __getitem__(self, idx) -> "CycArray":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return CycArray(self.conductor, self.num[idx + (Ellipsis,)], self.den)

    def entry(self, *idx) -> CycNumber:
        coords = self.num[tuple(idx)]
        return CycNumber.from_canonical(self.conductor, [Fraction(int(c), self.den) for c in coords])

    def to_numbers(self) -> list:
        def build(prefix):
            if len(prefix) == len(self.shape):
                return self.entry(*prefix)
            return [build(prefix + (i,)) for i in range(self.shape[len(prefix)])]
        return build(())

    def normalized(self) -> "CycArray":
        if self.den == 1:
            return self
        g = gcd(_array_gcd(self.num), self.den)
        if g > 1:
            num = self.num // g if self.num.dtype != object else np.vectorize(lambda x: x // g, otypes=[object])(self.num)
            return CycArray(self.conductor, num, self.den // g)
        return self

    def embed(self, M2: int) -> "CycArray":
        if M2 == self.conductor:
            return self
        tab = _embed_table(self.conductor, M2)
        return CycArray(M2, _matmul_exact(self.num, tab), self.den)

    def _aligned(self, other: "CycArray") -> tuple["CycArray", "CycArray"]:
        M = lcm(self.conductor, other.conductor)
        return self.embed(M), other.embed(M)

    # ring operations
    def _lin(self, other: "CycArray", sign: int) -> "CycArray":
        a, b = self._aligned(other)
        d = lcm(a.den, b.den)
        fa, fb = d // a.den, d // b.den
        bound = _maxabs(a.num) * fa + _maxabs(b.num) * fb
        if bound < _INT_EXACT:
            num = a.num.astype(np.int64) * fa + sign * (b.num.astype(np.int64) * fb)
        else:
            num = _as_obj(a.num) * fa + sign * (_as_obj(b.num) * fb)
        return CycArray(a.conductor, num, d).normalized()

    def __add__(self, other):
        return self._lin(other, 1)

    def __sub__(self, other):
        return self._lin(other, -1)

    def __neg__(self):
        return CycArray(self.conductor, -self.num, self.den)

    def scale(self, c) -> "CycArray":
        """Multiply every entry by the scalar c (CycNumber or rational)."""
        if isinstance(c, (int, Fraction)):
            c = Fraction(c)
            bound = _maxabs(self.num) * abs(c.numerator)
            num = self.num * c.numerator if bound < _INT_EXACT else _as_obj(self.num) * c.numerator
            return CycArray(self.conductor, num, self.den * c.denominator).normalized()
        M = lcm(self.conductor, c.conductor)
        a = self.embed(M)
        ca = CycArray.from_numbers([c.embed(M)], M)
        mult = _mult_matrix(ca.num[0], M)
        phi = a.phi
        prod = _matmul_exact(a.num.reshape(-1, phi), mult).reshape(a.num.shape)
        return CycArray(M, prod, a.den * ca.den).normalized()

    def mul(self, other: "CycArray") -> "CycArray":
        """Entrywise product with broadcasting over leading axes."""
        a, b = self._aligned(other)
        shape = np.broadcast_shapes(a.num.shape, b.num.shape)
        prod = _conv_reduce(np.broadcast_to(a.num, shape), np.broadcast_to(b.num, shape), a.conductor)
        return CycArray(a.conductor, prod, a.den * b.den).normalized()

    def mul_roots(self, exps) -> "CycArray":
        """Entrywise multiplication by zeta_M^exps (exps broadcast over shape)."""
        M = self.conductor
        exps = np.broadcast_to(np.asarray(exps, dtype=np.int64) % M, self.shape)
        tab = reduction_table(M)
        phi = self.phi
        lifted_idx = (np.arange(phi)[None, :] + exps.reshape(-1, 1)) % M
        flat = self.num.reshape(-1, phi)
        out = np.zeros((flat.shape[0], M), dtype=flat.dtype)
        np.put_along_axis(out, lifted_idx, flat, axis=1)
        red = _matmul_exact(out, tab)
        return CycArray(M, red.reshape(self.num.shape), self.den)

    def matmul(self, other: "CycArray") -> "CycArray":
        a, b = self._aligned(other)
        M = a.conductor
        phi = euler_phi(M)
        A, B = a.num, b.num
        vec = B.ndim == 2
        if vec:
            B = B[:, None, :]
        n, k = A.shape[0], A.shape[1]
        m = B.shape[1]
        if k == 0:
            out = np.zeros((n, m, phi), dtype=np.int64)
        elif phi >= _MODULAR_MIN_PHI and n * k * m >= _MODULAR_MIN_WORK:
            out = modular_matmul(A, B, M)
        else:
            terms = [(A[:, :, s], s) for s in range(phi) if A[:, :, s].any()]
            out = stacked_products(terms, B, M) if terms else np.zeros((n, m, phi), dtype=np.int64)
        if vec:
            out = out[:, 0, :]
        return CycArray(M, out, a.den * b.den).normalized()

    def __matmul__(self, other):
        return self.matmul(other)

    def conj(self) -> "CycArray":
        M = self.conductor
        tab = reduction_table(M)
        conj_tab = tab[[(-j) % M for j in range(self.phi)]]
        return CycArray(M, _matmul_exact(self.num, conj_tab), self.den)

    @property
    def T(self) -> "CycArray":
        return CycArray(self.conductor, np.swapaxes(self.num, 0, 1), self.den)

    def H(self) -> "CycArray":
        return self.conj().T

    def take(self, idx, axis: int = 0) -> "CycArray":
        return CycArray(self.conductor, np.take(self.num, idx, axis=axis), self.den)

    def inner(self, other: "CycArray") -> CycNumber:
        """Hermitian inner product sum conj(self_i) * other_i of two vectors."""
        a, b = self._aligned(other)
        prod = a.conj().mul(b)
        tot = prod.num.sum(axis=0)
        return CycNumber.from_canonical(prod.conductor, [Fraction(int(x), prod.den) for x in tot])

    # predicates
    def is_zero(self) -> bool:
        return not self.num.any()

    def __eq__(self, other):
        if not isinstance(other, CycArray):
            return NotImplemented
        if self.shape != other.shape:
            return False
        return (self - other).is_zero()

    __hash__ = None

    def is_integral(self) -> bool:
        return self.normalized().den == 1

    def entry_denominators(self) -> np.ndarray:
        """Per-entry least common denominator of the canonical coordinates."""
        d = self.den
        flat = self.num.reshape(-1, self.phi)
        out = [d // reduce(gcd, (int(x) for x in row), d) for row in flat]
        return np.array(out, dtype=object).reshape(self.shape)

    def is_rational(self) -> bool:
        return not self.num[..., 1:].any()

    def rational_values(self) -> np.ndarray:
        if not self.is_rational():
            raise ValueError("array has irrational entries")
        return np.vectorize(lambda x: Fraction(int(x), self.den), otypes=[object])(self.num[..., 0])

    def column_stack(self, others: Sequence["CycArray"]) -> "CycArray":
        return stack([self, *others], axis=1)


def stack(arrs: Sequence[CycArray], axis: int = 0) -> CycArray:
    M = reduce(lcm, (a.conductor for a in arrs), 1)
    arrs = [a.embed(M) for a in arrs]
    d = reduce(lcm, (a.den for a in arrs), 1)
    nums = [_as_obj(a.num) * (d // a.den) if a.den != d else a.num for a in arrs]
    if any(n.dtype == object for n in nums):
        nums = [_as_obj(n) for n in nums]
    return CycArray(M, np.stack(nums, axis=axis), d).normalized()


def kron(a: CycArray, b: CycArray) -> CycArray:
    """Kronecker product of two matrices."""
    a, b = a._aligned(b)
    (n1, k1), (n2, k2) = a.shape, b.shape
    phi = a.phi
    prod = a[:, None, :, None].mul(CycArray(b.conductor, b.num[None, :, None, :, :], b.den))
    return CycArray(prod.conductor, prod.num.reshape(n1 * n2, k1 * k2, phi), prod.den)


def _mult_matrix(c: np.ndarray, M: int) -> np.ndarray:
    """Integer matrix of x -> c x on canonical coordinates (row vectors)."""
    return _mult_matrix_cached(M, tuple(int(x) for x in c))


@lru_cache(maxsize=4096)
def _mult_matrix_cached(M: int, c: tuple) -> np.ndarray:
    phi = len(c)
    R = reduction_table(M, 2 * phi - 1)
    # W[j, t, s] = R[j + s, t]
    W = np.lib.stride_tricks.sliding_window_view(R, phi, axis=0)
    cv = np.array(c, dtype=object)
    if _maxabs(R) * max(abs(x) for x in c) * phi < _INT_EXACT:
        out = W.astype(np.int64) @ cv.astype(np.int64)
    else:
        out = W.astype(object) @ cv
    out = _fit(np.asarray(out))
    out.setflags(write=False)
    return out


def stacked_products(terms, X: np.ndarray, M: int, chunk: int = 1 << 22) -> np.ndarray:
    """sum_i zeta_M^{o_i} (G_i @ X) for integer matrices G_i and numerators X.

    ``terms`` lists pairs (G_i, o_i) with G_i of shape (n, k); X has shape
    (k, ..., phi).  Products are batched into stacked BLAS calls and
    accumulated on lifted exponents before one reduction.
    """
    k = X.shape[0]
    phi = X.shape[-1]
    rest = X.shape[1:-1]
    Xf = X.reshape(k, -1)
    width = Xf.shape[1]
    if not terms:
        raise ValueError("stacked_products needs at least one term")
    n = terms[0][0].shape[0]
    L = max(o for _, o in terms) + phi
    gmax = max(_maxabs(G) for G, _ in terms)
    bound = gmax * _maxabs(Xf) * max(k, 1) * len(terms)
    dt = object if bound >= _INT_EXACT else np.int64
    lifted = np.zeros((n, width // phi, L), dtype=dt)
    per = max(1, chunk // max(1, n * width))
    for i in range(0, len(terms), per):
        block = terms[i:i + per]
        G = np.concatenate([g for g, _ in block], axis=0)
        R = _matmul_exact(G, Xf).reshape(len(block), n, width // phi, phi)
        if R.dtype != dt:
            R = R.astype(dt)
        for j, (_, o) in enumerate(block):
            lifted[:, :, o:o + phi] += R[j]
    out = _matmul_exact(lifted.reshape(-1, L), reduction_table(M, L))
    return out.reshape((n,) + rest + (phi,))


def _conv_reduce(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    phi = a.shape[-1]
    bound = _maxabs(a) * _maxabs(b) * phi
    dt = object if bound >= _INT_EXACT else np.int64
    a = a.astype(dt)
    b = b.astype(dt)
    conv = np.zeros(a.shape[:-1] + (2 * phi - 1,), dtype=dt)
    for s in range(phi):
        conv[..., s:s + phi] += a[..., s:s + 1] * b
    flat = conv.reshape(-1, 2 * phi - 1)
    return _matmul_exact(flat, reduction_table(M, 2 * phi - 1)).reshape(a.shape)


def _nested_shape(x) -> tuple[int, ...]:
    shape = []
    while isinstance(x, (list, tuple)):
        shape.append(len(x))
        if not x:
            break
        x = x[0]
    return tuple(shape)


def _flatten(x):
    if isinstance(x, (list, tuple)):
        for y in x:
            yield from _flatten(y)
    elif isinstance(x, np.ndarray):
        for y in x.flat:
            yield y
    else:
        yield x


def embed_modp(arr: CycArray, p: int, root: int) -> np.ndarray:
    """Image of the numerators under zeta_M -> root in F_p (den ignored)."""
    phi = arr.phi
    powers = np.array([pow(root, j, p) for j in range(phi)], dtype=object)
    vals = (_as_obj(arr.num) % p) @ powers
    return (vals % p).astype(np.int64)


def prime_with_root(M: int, lo: int = 1 << 28) -> tuple[int, int]:
    """A prime p = 1 mod M below 2^31 and a primitive M-th root of unity mod p."""
    p = _mod_prime_for(M, lo)
    for g in range(2, p):
        w = pow(g, (p - 1) // M, p)
        if all(pow(w, M // q, p) != 1 for q in factorize(M)) if M > 1 else True:
            return p, w
    raise ArithmeticError("no root found")


# ---------------------------------------------------------------------------
# products through evaluation at the roots of Phi_M modulo small primes

_NTT_BITS = 21


@lru_cache(maxsize=None)
def _ntt_prime(M: int, index: int) -> tuple[int, int]:
    """The index-th largest prime p = 1 mod M below 2^21, with a primitive M-th root."""
    top = (1 << _NTT_BITS) - 1
    p = top - ((top - 1) % M)
    found = -1
    while p > M:
        if is_prime_fast(p):
            found += 1
            if found == index:
                g = 2
                while True:
                    w = pow(g, (p - 1) // M, p)
                    if M == 1 or all(pow(w, M // q, p) != 1 for q in factorize(M)):
                        return p, w
                    g += 1
        p -= M
    raise ArithmeticError(f"ran out of primes = 1 mod {M}")


def _inv_mod_matrix(E: np.ndarray, p: int) -> np.ndarray:
    """Inverse of a square matrix over F_p by vectorised Gauss-Jordan elimination."""
    n = E.shape[0]
    A = np.concatenate([E % p, np.eye(n, dtype=np.int64)], axis=1)
    for c in range(n):
        r = c + int(np.nonzero(A[c:, c])[0][0])
        if r != c:
            A[[c, r]] = A[[r, c]]
        A[c] = A[c] * pow(int(A[c, c]), -1, p) % p
        f = A[:, c].copy()
        f[c] = 0
        A = (A - f[:, None] * A[c][None, :]) % p
    return A[:, n:]


@lru_cache(maxsize=None)
def _ntt_tables(M: int, index: int) -> tuple[int, np.ndarray, np.ndarray]:
    """p, the evaluation matrix E[j, i] = w^(u_i j) at the units u_i, and E^-1 mod p."""
    p, w = _ntt_prime(M, index)
    units = [u for u in range(M) if gcd(u, M) == 1]
    phi = len(units)
    powers = [pow(w, e, p) for e in range(M)]
    E = np.array([[powers[(u * j) % M] for u in units] for j in range(phi)], dtype=np.int64)
    return p, E, _inv_mod_matrix(E, p)


def _fmod_exact(x: np.ndarray, p: int) -> np.ndarray:
    """x mod p for integral floats below 2^53 (np.fmod is far slower)."""
    r = x - p * np.floor(x * (1.0 / p))
    r[r < 0] += p
    r[r >= p] -= p
    return r


def _mulmod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """(a @ b) mod p for reduced int64 operands, exact through float BLAS."""
    k = a.shape[-1]
    step = max(1, _FLOAT_EXACT // ((p - 1) * (p - 1)))
    af = np.ascontiguousarray(a, dtype=np.float64)
    bf = np.ascontiguousarray(b, dtype=np.float64)
    out = None
    for s in range(0, k, step):
        part = _fmod_exact(af[..., s:s + step] @ bf[..., s:s + step, :], p)
        out = part if out is None else _fmod_exact(out + part, p)
    return out.astype(np.int64)


def _residues(a: np.ndarray, p: int) -> np.ndarray:
    if a.dtype == object:
        return np.asarray(a % p, dtype=np.int64)
    return a % p


def modular_matmul(A: np.ndarray, B: np.ndarray, M: int) -> np.ndarray:
    """Exact product of numerator arrays A (n, k, phi) and B (k, m, phi) over Z[zeta_M].

    Each factor is evaluated at the primitive M-th roots modulo primes
    p = 1 mod M, multiplied rootwise, interpolated back and recombined by
    CRT.  The number of primes comes from a bound on the reduced coefficients.
    """
    n, k, phi = A.shape
    m = B.shape[1]
    amax, bmax = _maxabs(A), _maxabs(B)
    if amax == 0 or bmax == 0 or k == 0:
        return np.zeros((n, m, phi), dtype=np.int64)
    red = reduction_table(M, 2 * phi - 1)
    colsum = int(np.abs(_as_obj(red)).sum(axis=0).max())
    bound = k * phi * amax * bmax * colsum
    primes, residues = [], []
    P = 1
    index = 0
    while P <= 2 * bound:
        p, E, Einv = _ntt_tables(M, index)
        Ae = _mulmod(_residues(A, p).reshape(-1, phi), E, p).reshape(n, k, phi)
        Be = _mulmod(_residues(B, p).reshape(-1, phi), E, p).reshape(k, m, phi)
        Ce = _mulmod(np.moveaxis(Ae, 2, 0), np.moveaxis(Be, 2, 0), p)
        C = _mulmod(np.moveaxis(Ce, 0, 2).reshape(-1, phi), Einv, p)
        primes.append(p)
        residues.append(C)
        P *= p
        index += 1
    # Garner mixed radix digits, then a symmetric lift
    digits = []
    for i, (p, r) in enumerate(zip(primes, residues)):
        v = r.copy()
        for j in range(i):
            v = (v - digits[j]) * pow(primes[j], -1, p) % p
        digits.append(v)
    if P < _INT_EXACT:
        out = np.zeros_like(digits[0])
        radix = 1
        for p, d in zip(primes, digits):
            out = out + d * radix
            radix *= p
        out = np.where(out > P // 2, out - P, out)
    else:
        out = np.zeros(digits[0].shape, dtype=object)
        radix = 1
        for p, d in zip(primes, digits):
            out = out + d.astype(object) * radix
            radix *= p
        out = np.where(out > P // 2, out - P, out)
    return _fit(out.reshape(n, m, phi))
