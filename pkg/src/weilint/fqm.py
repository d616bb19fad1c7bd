"""Finite quadratic modules (discriminant forms) and their subgroups.

A form is stored on a cyclic decomposition ``orders`` with diagonal values
``q_diag`` and off-diagonal pairings ``b_off``.  Elements are coordinate
tuples; internally every element is addressed by its index in the
lexicographic enumeration of coordinates, so subgroups are just sorted
index tuples.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from functools import cached_property, reduce
from math import gcd, lcm, prod
from typing import Callable, Iterable, Sequence

import numpy as np

from .exactnum import (
    CycNumber,
    factorize,
    fraction_str,
    is_prime,
    legendre,
    parse_fraction,
    sqrt_nat,
)

DEFAULT_MAX_ORDER = 256


class FormError(ValueError):
    """Invalid form data or symbol."""


def _mod1(x) -> Fraction:
    x = Fraction(x)
    return x - (x.numerator // x.denominator)


class DiscForm:
    """A finite abelian group with a nondegenerate Q/Z-valued quadratic form."""

    def __init__(self, orders: Sequence[int], q_diag: Sequence, b_off=None, label: str | None = None):
        self.orders = tuple(int(n) for n in orders)
        if any(n < 1 for n in self.orders):
            raise FormError("orders must be positive")
        if len(q_diag) != len(self.orders):
            raise FormError("q_diag must have one entry per cyclic factor")
        self.q_diag = tuple(_mod1(x) for x in q_diag)
        boff: dict[tuple[int, int], Fraction] = {}
        items = b_off.items() if isinstance(b_off, dict) else (((i, j), v) for i, j, v in (b_off or ()))
        for (i, j), v in items:
            i, j = int(i), int(j)
            if i == j or not (0 <= i < len(self.orders) and 0 <= j < len(self.orders)):
                raise FormError(f"bad off-diagonal index ({i}, {j})")
            key = (min(i, j), max(i, j))
            boff[key] = _mod1(boff.get(key, 0) + Fraction(v))
        self.b_off = {k: v for k, v in sorted(boff.items()) if v}
        self.label = label
        self._validate_denominators()
        self._check_nondegenerate()
        self._check_milgram()

    # -- validation -------------------------------------------------------
    def _validate_denominators(self):
        for n, q in zip(self.orders, self.q_diag):
            bound = n if n % 2 else 2 * n
            if bound % q.denominator:
                raise FormError(f"q value {q} is not well defined on Z/{n}")
        for (i, j), b in self.b_off.items():
            if gcd(self.orders[i], self.orders[j]) % b.denominator:
                raise FormError(f"pairing {b} between factors {i} and {j} is not well defined")

    def _check_nondegenerate(self):
        # the radical is the set of elements pairing trivially with every generator
        gens = [self.index(tuple(int(k == i) for k in range(self.rank))) for i in range(self.rank)]
        if not gens:
            return
        rad = np.all(self.bil[:, gens] == 0, axis=1)
        rad[0] = False
        if rad.any():
            bad = self.element(int(np.nonzero(rad)[0][0]))
            raise FormError(f"degenerate pairing: {bad} is orthogonal to everything")

    def _check_milgram(self):
        s = self.signature  # raises if no eighth root matches
        del s

    # -- basic data -------------------------------------------------------
    @property
    def rank(self) -> int:
        return len(self.orders)

    @cached_property
    def size(self) -> int:
        return prod(self.orders)

    @cached_property
    def level(self) -> int:
        dens = [q.denominator for q in self.q_diag] + [b.denominator for b in self.b_off.values()]
        return reduce(lcm, dens, 1)

    @cached_property
    def conductor(self) -> int:
        return lcm(8, self.level)

    @cached_property
    def coords(self) -> np.ndarray:
        if not self.orders:
            return np.zeros((1, 0), dtype=np.int64)
        grids = itertools.product(*(range(n) for n in self.orders))
        return np.array(list(grids), dtype=np.int64).reshape(self.size, self.rank)

    @cached_property
    def _strides(self) -> np.ndarray:
        st = [1] * self.rank
        for i in range(self.rank - 2, -1, -1):
            st[i] = st[i + 1] * self.orders[i + 1]
        return np.array(st, dtype=np.int64)

    def index(self, elem: Sequence[int]) -> int:
        if len(elem) != self.rank:
            raise FormError(f"element {tuple(elem)} has wrong length for orders {self.orders}")
        return int(sum((int(x) % n) * s for x, n, s in zip(elem, self.orders, self._strides)))

    def element(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.coords[i])

    def index_of_coords(self, coords: np.ndarray) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64) % np.array(self.orders, dtype=np.int64)
        return c @ self._strides

    @cached_property
    def add_table(self) -> np.ndarray:
        c = self.coords
        s = (c[:, None, :] + c[None, :, :]) % np.array(self.orders or (1,), dtype=np.int64)[: self.rank]
        return (s @ self._strides).astype(np.int64) if self.rank else np.zeros((1, 1), dtype=np.int64)

    @cached_property
    def neg(self) -> np.ndarray:
        return self.index_of_coords(-self.coords) if self.rank else np.zeros(1, dtype=np.int64)

    def mul(self, m: int, i) -> np.ndarray | int:
        """Index of m * element (vectorised over i)."""
        out = self.index_of_coords(m * self.coords[i]) if self.rank else np.zeros_like(np.asarray(i))
        return int(out) if np.ndim(out) == 0 else out

    def add(self, i: int, j: int) -> int:
        return int(self.add_table[i, j])

    @cached_property
    def qnum(self) -> np.ndarray:
        """level * q(gamma) mod level for every element."""
        N = self.level
        c = self.coords
        tot = np.zeros(self.size, dtype=np.int64)
        for i, q in enumerate(self.q_diag):
            tot += (c[:, i] ** 2 % (2 * self.orders[i])) * int(q * N)
        for (i, j), b in self.b_off.items():
            tot += (c[:, i] * c[:, j]) % (self.orders[i] * self.orders[j]) * int(b * N)
        return tot % N

    @cached_property
    def bil(self) -> np.ndarray:
        """level * (gamma, delta) mod level as a |D| x |D| table."""
        q = self.qnum
        return (q[self.add_table] - q[:, None] - q[None, :]) % self.level

    @cached_property
    def order_of(self) -> np.ndarray:
        c = self.coords
        out = np.ones(self.size, dtype=np.int64)
        for i, n in enumerate(self.orders):
            out = np.lcm(out, n // np.gcd(c[:, i], n))
        return out

    def q_value(self, g) -> Fraction:
        i = g if isinstance(g, (int, np.integer)) else self.index(g)
        return Fraction(int(self.qnum[i]), self.level)

    def bilinear(self, g, h) -> Fraction:
        i = g if isinstance(g, (int, np.integer)) else self.index(g)
        j = h if isinstance(h, (int, np.integer)) else self.index(h)
        return Fraction(int(self.bil[i, j]), self.level)

    # -- signature --------------------------------------------------------
    @cached_property
    def gauss_sum(self) -> CycNumber:
        M = self.conductor
        coeffs = [0] * M
        step = M // self.level
        for v in self.qnum:
            coeffs[int(v) * step] += 1
        return CycNumber(M, coeffs)

    @cached_property
    def signature(self) -> int:
        M = self.conductor
        root = sqrt_nat(self.size, M)
        g = self.gauss_sum
        for s in range(8):
            if CycNumber.root(s * M // 8, M) * root == g:
                return s
        raise FormError("Milgram identity fails: no eighth root of unity matches the Gauss sum")

    # -- constructions ----------------------------------------------------
    def direct_sum(self, other: "DiscForm") -> "DiscForm":
        k = self.rank
        b = dict(self.b_off)
        for (i, j), v in other.b_off.items():
            b[(i + k, j + k)] = v
        lab = None
        if self.label and other.label:
            lab = f"{self.label} ⊕ {other.label}"
        return DiscForm(self.orders + other.orders, self.q_diag + other.q_diag, b, label=lab)

    def rescale(self, l: int) -> "DiscForm":
        """The form l*q on the same group (must stay nondegenerate)."""
        return DiscForm(self.orders, [l * q for q in self.q_diag], {k: l * v for k, v in self.b_off.items()})

    def is_cyclic(self) -> bool:
        return bool((self.order_of == self.size).any())

    def data_key(self) -> tuple:
        return (self.orders, self.q_diag, tuple(sorted(self.b_off.items())))

    def __eq__(self, other):
        return isinstance(other, DiscForm) and self.data_key() == other.data_key()

    def __hash__(self):
        return hash(self.data_key())

    def __repr__(self):
        if self.label:
            return f"DiscForm({self.label!r})"
        return f"DiscForm(orders={self.orders}, q_diag={[str(q) for q in self.q_diag]}, b_off={ {k: str(v) for k, v in self.b_off.items()} })"

    def to_json(self) -> dict:
        return {
            "orders": list(self.orders),
            "q_diag": [fraction_str(q) for q in self.q_diag],
            "b_off": [[i, j, fraction_str(v)] for (i, j), v in self.b_off.items()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DiscForm":
        try:
            return cls(
                obj["orders"],
                [parse_fraction(x) for x in obj["q_diag"]],
                [(int(i), int(j), parse_fraction(v)) for i, j, v in obj.get("b_off", [])],
                label=obj.get("label"),
            )
        except (KeyError, TypeError) as exc:
            raise FormError(f"malformed form JSON: {exc}") from exc

    # -- subgroups --------------------------------------------------------
    def subgroup(self, gens: Iterable = ()) -> "Subgroup":
        idx = [g if isinstance(g, (int, np.integer)) else self.index(g) for g in gens]
        return Subgroup(self, _span(self, [0], [int(i) for i in idx]))

    @cached_property
    def trivial_subgroup(self) -> "Subgroup":
        return Subgroup(self, (0,))

    @cached_property
    def whole(self) -> "Subgroup":
        return Subgroup(self, tuple(range(self.size)))

    @cached_property
    def isotropic_elements(self) -> np.ndarray:
        return np.nonzero(self.qnum == 0)[0]


def construct(orders, q_diag, b_off=None) -> DiscForm:
    return DiscForm(orders, q_diag, b_off)


def q_value(D: DiscForm, g) -> Fraction:
    return D.q_value(g)


def bilinear(D: DiscForm, g, h) -> Fraction:
    return D.bilinear(g, h)


def signature(D: DiscForm) -> tuple[int, CycNumber]:
    return D.signature, D.gauss_sum


# ---------------------------------------------------------------------------
# subgroups

def _span(D: DiscForm, base: Sequence[int], gens: Sequence[int]) -> tuple[int, ...]:
    """Elements of the subgroup generated by a subgroup ``base`` and ``gens``."""
    elems = set(base)
    add = D.add_table
    for g in gens:
        if g in elems:
            continue
        cur = list(elems)
        layer = cur
        while True:
            nxt = [int(add[x, g]) for x in layer]
            if nxt[0] in elems:
                break
            elems.update(nxt)
            layer = nxt
    return tuple(sorted(elems))


class Subgroup:
    """Subgroup of a DiscForm, canonically stored as its sorted element indices."""

    __slots__ = ("form", "elements", "_set", "_gens")

    def __init__(self, form: DiscForm, elements: Iterable[int]):
        self.form = form
        self.elements = tuple(sorted(int(e) for e in elements))
        self._set = frozenset(self.elements)
        self._gens = None
        if len(self._set) != len(self.elements) or 0 not in self._set:
            raise ValueError("not a subgroup")

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def gens(self) -> tuple[int, ...]:
        """Greedy generating set: scan elements in order, keep those not yet spanned."""
        if self._gens is None:
            gens: list[int] = []
            cur: tuple[int, ...] = (0,)
            cur_set = {0}
            for e in self.elements:
                if e not in cur_set:
                    gens.append(e)
                    cur = _span(self.form, cur, [e])
                    cur_set = set(cur)
                    if len(cur) == self.order:
                        break
            self._gens = tuple(gens)
        return self._gens

    def __contains__(self, i) -> bool:
        if not isinstance(i, (int, np.integer)):
            i = self.form.index(i)
        return int(i) in self._set

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return self.order

    def __eq__(self, other):
        return isinstance(other, Subgroup) and self.form == other.form and self.elements == other.elements

    def __hash__(self):
        return hash(self.elements)

    def __le__(self, other: "Subgroup") -> bool:
        return self._set <= other._set

    def key(self) -> tuple:
        return (-self.order, self.elements)

    def element_tuples(self) -> list[tuple[int, ...]]:
        return [self.form.element(e) for e in self.elements]

    def __repr__(self):
        return f"Subgroup(order={self.order}, gens={[self.form.element(g) for g in self.gens]})"

    def join(self, other: "Subgroup") -> "Subgroup":
        return Subgroup(self.form, _span(self.form, self.elements, list(other.gens)))

    def intersect(self, other: "Subgroup") -> "Subgroup":
        return Subgroup(self.form, sorted(self._set & other._set))

    def coset_rep(self) -> np.ndarray:
        """For every element of D, the least index in its coset modulo this subgroup."""
        add = self.form.add_table
        return add[:, list(self.elements)].min(axis=1)


def orthogonal_complement(H: Subgroup) -> Subgroup:
    D = H.form
    gens = list(H.gens)
    if not gens:
        return D.whole
    mask = np.all(D.bil[:, gens] == 0, axis=1)
    perp = Subgroup(D, np.nonzero(mask)[0])
    assert perp.order * H.order == D.size, "orthogonal complement has the wrong order"
    return perp


def classify(H: Subgroup) -> str:
    D = H.form
    el = np.fromiter(H.elements, dtype=np.int64, count=H.order)
    if not D.qnum[el].any():
        return "isotropic"
    if not D.bil[el][:, el].any():
        return "quasi_isotropic"
    return "generic"


def xi_l_H(H: Subgroup, l: int) -> tuple[int, ...]:
    """Least element xi with l*q(g) = (g, xi) on the generators of H."""
    D = H.form
    N = D.level
    el = list(H.elements)
    bad = (l * D.bil[np.ix_(el, el)]) % N
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"pairing of {D.element(el[i])} and {D.element(el[j])} is not in (1/{l})Z/Z"
        )
    return D.element(_xi_index(H, l))


def _xi_index(H: Subgroup, l: int) -> int:
    D = H.form
    gens = list(H.gens)
    if not gens:
        return 0
    target = (l * D.qnum[gens]) % D.level
    ok = np.all(D.bil[:, gens] == target[None, :], axis=1)
    hits = np.nonzero(ok)[0]
    if hits.size == 0:
        raise ArithmeticError("no solution for xi (degenerate form?)")
    return int(hits[0])


def xi_H(H: Subgroup) -> tuple[int, ...]:
    if classify(H) == "generic":
        raise ValueError("xi_H needs a quasi-isotropic subgroup")
    return xi_l_H(H, 1)


def maximal_isotropic_in(H: Subgroup) -> Subgroup:
    """The kernel H_0 of pairing with xi_H inside a quasi-isotropic H."""
    D = H.form
    if classify(H) == "generic":
        raise ValueError("maximal_isotropic_in needs a quasi-isotropic subgroup")
    xi = _xi_index(H, 1)
    el = np.array(H.elements)
    H0 = Subgroup(D, el[D.bil[el, xi] == 0])
    assert H.order in (H0.order, 2 * H0.order)
    assert classify(H0) == "isotropic"
    perp0 = orthogonal_complement(H0)
    perp = orthogonal_complement(H)
    shifted = {D.add(xi, s) for s in perp.elements}
    assert set(perp0.elements) == set(perp.elements) | shifted
    return H0


# ---------------------------------------------------------------------------
# bases of abstract finite abelian groups

def _order_in(x: int, add: Callable[[int, int], int], zero: int) -> int:
    n, y = 1, x
    while y != zero:
        y = add(y, x)
        n += 1
    return n


def _p_basis(elems: list[int], add, zero) -> list[tuple[int, int]]:
    """Basis (element, order) of an abelian p-group given by its element list."""
    if len(elems) <= 1:
        return []
    orders = {x: _order_in(x, add, zero) for x in elems}
    g = min(elems, key=lambda x: (-orders[x], x))
    cyc = [zero]
    y = g
    while y != zero:
        cyc.append(y)
        y = add(y, g)
    rep_cache: dict[int, int] = {}

    def rep(x):
        r = rep_cache.get(x)
        if r is None:
            r = min(add(x, c) for c in cyc)
            rep_cache[x] = r
        return r

    reps = sorted({rep(x) for x in elems})
    sub = _p_basis(reps, lambda a, b: rep(add(a, b)), rep(zero))
    out = [(g, orders[g])]
    for y, o in sub:
        z = y
        for _ in range(orders[g]):
            if orders.get(z, None) == o:
                break
            z = add(z, g)
        else:
            raise ArithmeticError("failed to lift a basis element")
        out.append((z, o))
    return out


def abelian_basis(elems: Sequence[int], add, zero: int) -> list[tuple[int, int]]:
    """Basis of a finite abelian group as (element, order) pairs, p-parts in increasing p."""
    elems = list(elems)
    n = len(elems)
    orders = {x: _order_in(x, add, zero) for x in elems}
    out = []
    for p in sorted(factorize(n)) if n > 1 else []:
        part = [x for x in elems if set(factorize(orders[x])) <= {p}]
        out.extend(_p_basis(part, add, zero))
    return out


# ---------------------------------------------------------------------------
# subquotients

class Subquotient:
    """A form S/K with q scaled by ``mult``, plus projection and section maps."""

    def __init__(self, S: Subgroup, K: Subgroup, mult: int = 1):
        D = S.form
        assert K <= S
        self.ambient = D
        self.S, self.K, self.mult = S, K, mult
        rep = K.coset_rep()
        self.rep = rep
        reps = sorted({int(rep[s]) for s in S.elements})
        add = D.add_table
        basis = abelian_basis(reps, lambda a, b: int(rep[add[a, b]]), 0)
        self.basis = [b for b, _ in basis]
        orders = [o for _, o in basis]
        N = D.level
        qd = [Fraction(mult * int(D.qnum[b]), N) for b in self.basis]
        boff = {}
        for i, j in itertools.combinations(range(len(self.basis)), 2):
            v = Fraction(mult * int(D.bil[self.basis[i], self.basis[j]]), N)
            if v % 1:
                boff[(i, j)] = v
        self.form = DiscForm(orders, qd, boff)
        A = self.form
        # section: A index -> least representative in D
        sec = np.zeros(A.size, dtype=np.int64)
        for a in range(A.size):
            x = 0
            for c, b in zip(A.coords[a], self.basis):
                for _ in range(int(c)):
                    x = int(add[x, b])
            sec[a] = rep[x]
        self.section = sec
        lookup = {int(r): a for a, r in enumerate(sec)}
        assert len(lookup) == A.size == len(reps)
        self._lookup = lookup

    def project(self, s: int) -> int:
        return self._lookup[int(self.rep[s])]

    def projection_array(self) -> dict[int, int]:
        return {s: self.project(s) for s in self.S.elements}


def quotient_form(H: Subgroup) -> Subquotient:
    """A = H^perp / H for isotropic H, with projection and least-representative section."""
    if classify(H) != "isotropic":
        raise ValueError("quotient_form needs an isotropic subgroup")
    sq = Subquotient(orthogonal_complement(H), H, 1)
    assert sq.form.signature == H.form.signature, "quotient changed the signature"
    return sq


def rescaled_quotient(H: Subgroup, l: int) -> DiscForm:
    """The form written A_0(l): rescale H_0^perp/H_0 by l, or for non-isotropic H
    and even l, the quotient H^perp/H of l times q."""
    cls = classify(H)
    if cls == "generic":
        raise ValueError("rescaled_quotient needs a quasi-isotropic subgroup")
    if cls == "isotropic" or l % 2:
        H0 = maximal_isotropic_in(H)
        return Subquotient(orthogonal_complement(H0), H0, l).form
    return Subquotient(orthogonal_complement(H), H, l).form


def milgram_k(H: Subgroup, l: int) -> int:
    """The auxiliary integer k of the twisted Milgram identity, least positive solution."""
    D = H.form
    perp = orthogonal_complement(H)
    xi = _xi_index(H, l)
    N = D.level
    dens = [Fraction(int(D.bil[g, xi]), N).denominator for g in perp.elements]
    dens += [Fraction(int(D.qnum[g]), N).denominator for g in perp.elements]
    dens.append(Fraction(int(D.qnum[xi]), N).denominator)
    L = reduce(lcm, dens, 1)
    even_case = classify(H) != "isotropic" and l % 2 == 0
    if even_case:
        while L % 2 == 0:
            L //= 2
    if gcd(l, L) != 1:
        raise ValueError(f"l={l} is not invertible modulo {L}")
    k0 = pow(l, -1, L) if L > 1 else 0
    if even_case:
        k = k0 if k0 % 2 == 0 else k0 + L
        if L == 1:
            k = 2
        if k == 0:
            k = 2 * L
        return k
    return k0 if k0 > 0 else L


def lift_complement(H: Subgroup) -> tuple[Subgroup, tuple[int, ...]]:
    """Complement of H/H_0 in H^perp/H_0 (as a subgroup of H^perp) and xi_{H,H~}."""
    D = H.form
    if classify(H) == "generic":
        raise ValueError("lift_complement needs a quasi-isotropic subgroup")
    perp = orthogonal_complement(H)
    p = _quotient_exponent(perp, H)
    if p > 1 and not is_prime(p):
        raise ValueError(f"H^perp/H has exponent {p}, not a prime")
    H0 = maximal_isotropic_in(H)
    if H0 == H:
        return perp, D.element(0)
    if p % 2 == 1:
        m = perp.order // H0.order
        while m % 2 == 0:
            m //= 2
        mult = D.mul(m, np.array(perp.elements))
        Ht = Subgroup(D, [s for s, ms in zip(perp.elements, mult) if int(ms) in H0._set])
    else:
        Ht = _greedy_complement(perp, H, H0)
    assert Ht.order * 2 == perp.order
    assert not (set(Ht.elements) & (set(H.elements) - set(H0.elements)))
    gens = list(Ht.gens)
    outside = next(h for h in H.elements if h not in H0._set)
    half = D.level // 2
    ok = np.all(D.bil[:, gens] == 0, axis=1) & (D.bil[:, outside] == half) if gens else (D.bil[:, outside] == half)
    xi = int(np.nonzero(ok)[0][0])
    assert D.mul(2, xi) in H._set, "2 xi must lie in H"
    assert 8 % Fraction(int(D.qnum[xi]), D.level).denominator == 0
    return Ht, D.element(xi)


def _quotient_exponent(S: Subgroup, K: Subgroup) -> int:
    D = S.form
    e = 1
    for s in S.gens:
        m = 1
        x = s
        while x not in K._set:
            x = D.add(x, s)
            m += 1
        e = lcm(e, m)
    return e


def _greedy_complement(perp: Subgroup, H: Subgroup, H0: Subgroup) -> Subgroup:
    D = perp.form
    bad = set(H.elements) - set(H0.elements)
    target = perp.order // 2
    cur = H0.elements
    for x in perp.elements:
        if len(cur) == target:
            break
        if x in cur:
            continue
        cand = _span(D, cur, [x])
        if not (set(cand) & bad) and len(cand) <= target:
            cur = cand
    if len(cur) != target:
        # exhaustive fallback over subgroups between H0 and perp
        for S in enumerate_subgroups(D, lambda G: H0 <= G and G <= perp and not (set(G.elements) & bad)):
            if S.order == target:
                return S
        raise ArithmeticError("no complement found")
    return Subgroup(D, cur)


def xi_l_H_tilde(H: Subgroup, l: int, xi: tuple[int, ...]) -> tuple[int, ...]:
    """The convention: zero for even l, xi_{H,H~} for odd l."""
    return xi if l % 2 else H.form.element(0)


# ---------------------------------------------------------------------------
# enumeration and Sylow parts

def enumerate_subgroups(
    D: DiscForm,
    predicate: Callable[[Subgroup], bool] | None = None,
    max_order: int = DEFAULT_MAX_ORDER,
    hereditary: bool = False,
) -> list[Subgroup]:
    """All subgroups (satisfying ``predicate``), sorted by (-order, elements).

    With ``hereditary=True`` the predicate is assumed closed under taking
    subgroups, and the search is pruned accordingly.
    """
    if D.size > max_order:
        raise ValueError(f"|D| = {D.size} exceeds the bound {max_order}; raise it with --max-order")
    candidates = range(1, D.size)
    if hereditary and predicate is not None:
        candidates = [x for x in candidates if predicate(Subgroup(D, _span(D, (0,), [x])))]
    triv = (0,)
    seen = {triv}
    stack = [triv]
    found = []
    while stack:
        S = stack.pop()
        sub = Subgroup(D, S)
        if predicate is None or predicate(sub):
            found.append(sub)
        done = set(S)
        for x in candidates:
            if x in done:
                continue
            T = _span(D, S, [x])
            # S + k x with k a unit modulo the order of x mod S generates the same T
            o = len(T) // len(S)
            y = S
            for k in range(1, o):
                y = [int(D.add_table[a, x]) for a in y]
                if gcd(k, o) == 1:
                    done.update(y)
            if T not in seen:
                seen.add(T)
                if hereditary and predicate is not None and not predicate(Subgroup(D, T)):
                    continue
                stack.append(T)
    found.sort(key=Subgroup.key)
    return found


def isotropic_subgroups(D: DiscForm, max_order: int = DEFAULT_MAX_ORDER) -> list[Subgroup]:
    return enumerate_subgroups(D, lambda H: classify(H) == "isotropic", max_order, hereditary=True)


def quasi_isotropic_subgroups(D: DiscForm, max_order: int = DEFAULT_MAX_ORDER) -> list[Subgroup]:
    return enumerate_subgroups(D, lambda H: classify(H) != "generic", max_order, hereditary=True)


def maximal_quasi_isotropic(D: DiscForm, start: Subgroup | None = None) -> Subgroup:
    """Inclusion-maximal quasi-isotropic subgroup containing ``start``.

    Elements are scanned in index order and kept whenever they are
    quasi-isotropic and orthogonal to the current subgroup.
    """
    H = list(start.elements) if start is not None else [0]
    if start is not None and classify(start) == "generic":
        raise ValueError("start subgroup is not quasi-isotropic")
    have = set(H)
    for x in range(1, D.size):
        if x in have or D.bil[x, x] != 0 or D.bil[x, H].any():
            continue
        H = list(_span(D, H, [x]))
        have = set(H)
    return Subgroup(D, H)


def isotropic_lines(H: Subgroup, p: int) -> list[Subgroup]:
    """Isotropic subgroups of order p inside H, sorted by their element tuples."""
    D = H.form
    seen, out = set(), []
    for x in H.elements:
        if D.order_of[x] == p and D.qnum[x] == 0:
            line = tuple(sorted(int(D.mul(k, x)) for k in range(p)))
            if line not in seen:
                seen.add(line)
                out.append(Subgroup(D, line))
    out.sort(key=lambda G: G.elements)
    return out


class SylowPart:
    __slots__ = ("p", "form", "embedding")

    def __init__(self, p: int, form: DiscForm, embedding: np.ndarray):
        self.p, self.form, self.embedding = p, form, embedding

    def __iter__(self):
        return iter((self.p, self.form, self.embedding))


def sylow_decompose(D: DiscForm) -> list[SylowPart]:
    """Orthogonal p-parts with index embeddings into D."""
    if D.size == 1:
        return []
    out = []
    add = D.add_table
    for p in sorted(factorize(D.size)):
        part = [int(x) for x in range(D.size) if set(factorize(int(D.order_of[x]))) <= {p}]
        basis = abelian_basis(part, lambda a, b: int(add[a, b]), 0)
        els = [b for b, _ in basis]
        orders = [o for _, o in basis]
        N = D.level
        qd = [Fraction(int(D.qnum[b]), N) for b in els]
        boff = {(i, j): Fraction(int(D.bil[els[i], els[j]]), N) for i, j in itertools.combinations(range(len(els)), 2)}
        F = DiscForm(orders, qd, boff)
        emb = np.zeros(F.size, dtype=np.int64)
        for a in range(F.size):
            x = 0
            for c, b in zip(F.coords[a], els):
                for _ in range(int(c)):
                    x = int(add[x, b])
            emb[a] = x
        out.append(SylowPart(p, F, emb))
    # orthogonality and reconstruction
    for a, b in itertools.combinations(out, 2):
        assert not D.bil[np.ix_(a.embedding, b.embedding)].any()
    assert prod(s.form.size for s in out) == D.size
    return out


def product_index_map(D: DiscForm, parts: Sequence[SylowPart]) -> np.ndarray:
    """Index in D of the element with component indices (i_1, ..., i_r) in product order."""
    idx = np.zeros(1, dtype=np.int64)
    for part in parts:
        idx = D.add_table[np.repeat(idx, part.form.size), np.tile(part.embedding, idx.size)]
    return idx


# ---------------------------------------------------------------------------
# symbols

_GRAMMAR = (
    "supported symbols: q^±n (odd prime power q, e.g. 3^+1, 27^-1, 3^-4), "
    "2^k_t^±n (odd 2-adic block, e.g. 2_1^+1, 4_3^-1), 2^k_II^±n (even 2-adic block, n even, e.g. 2_II^-2), "
    "U(N), UG(n1,...,nk), 'trivial', joined with ⊕ or (+)"
)


def _kron2(u: int) -> int:
    return 1 if u % 8 in (1, 7) else -1


def _odd_block(q: int, eps: int, n: int) -> DiscForm:
    fac = factorize(q)
    if len(fac) != 1 or 2 in fac:
        raise FormError(f"{q} is not an odd prime power; {_GRAMMAR}")
    (p, k), = fac.items()
    if n < 1:
        raise FormError("rank must be positive")
    half = (q + 1) // 2  # 2 * half = 1 mod q, a square class
    nonres = next(c for c in range(2, p) if legendre(c, p) == -1)
    diag = [Fraction(half, q)] * n
    if eps == -1:
        diag[-1] = Fraction(half * nonres % q, q)
    F = DiscForm([q] * n, diag, label=f"{q}^{'+' if eps > 0 else '-'}{n}")
    excess = (n * (q - 1) + (4 if (k % 2 and eps == -1) else 0)) % 8
    if F.signature != (-excess) % 8:
        raise FormError(f"internal: {F.label} has signature {F.signature}, expected {(-excess) % 8}")
    return F


def _two_odd_block(q: int, t: int, eps: int, n: int) -> DiscForm:
    k = q.bit_length() - 1
    if q != 1 << k or k < 1:
        raise FormError(f"{q} is not a power of two; {_GRAMMAR}")
    for us in itertools.combinations_with_replacement((1, 3, 5, 7), n):
        if sum(us) % 8 == t % 8 and prod(_kron2(u) for u in us) == eps:
            break
    else:
        raise FormError(f"no odd 2-adic block {q}_{t}^{eps:+d}{n}")
    F = DiscForm([q] * n, [Fraction(u, 2 * q) for u in us], label=f"{q}_{t % 8}^{'+' if eps > 0 else '-'}{n}")
    want = (t + (4 if (k % 2 and eps == -1) else 0)) % 8
    if F.signature != want:
        raise FormError(f"internal: {F.label} has signature {F.signature}, expected {want}")
    return F


def _two_even_block(q: int, eps: int, n: int) -> DiscForm:
    k = q.bit_length() - 1
    if q != 1 << k or k < 1:
        raise FormError(f"{q} is not a power of two; {_GRAMMAR}")
    if n % 2 or n < 2:
        raise FormError("even 2-adic blocks need even positive rank")
    orders, diag, boff = [], [], {}
    for i in range(n // 2):
        orders += [q, q]
        aniso = eps == -1 and i == n // 2 - 1
        diag += [Fraction(1 if aniso else 0, q)] * 2
        boff[(2 * i, 2 * i + 1)] = Fraction(1, q)
    F = DiscForm(orders, diag, boff, label=f"{q}_II^{'+' if eps > 0 else '-'}{n}")
    want = 4 if (k % 2 and eps == -1) else 0
    if F.signature != want:
        raise FormError(f"internal: {F.label} has signature {F.signature}, expected {want}")
    return F


def hyperbolic(ns: Sequence[int]) -> DiscForm:
    """U_G for G = sum of Z/n_i: the form G + G^* with q(g + f) = f(g)."""
    ns = [int(n) for n in ns]
    k = len(ns)
    boff = {(i, k + i): Fraction(1, n) for i, n in enumerate(ns)}
    lab = f"U({ns[0]})" if k == 1 else f"UG({','.join(map(str, ns))})"
    return DiscForm(ns + ns, [0] * (2 * k), boff, label=lab)


def trivial_form() -> DiscForm:
    return DiscForm((), (), label="trivial")


_TOKEN_PATTERNS = [
    (re.compile(r"^U\((\d+)\)$"), lambda m: hyperbolic([int(m[1])])),
    (re.compile(r"^UG\(([\d,\s]+)\)$"), lambda m: hyperbolic([int(x) for x in m[1].split(",") if x.strip()])),
    (re.compile(r"^(\d+)_II\^([+-])(\d+)$"), lambda m: _two_even_block(int(m[1]), 1 if m[2] == "+" else -1, int(m[3]))),
    (re.compile(r"^(\d+)_(\d+)\^([+-])(\d+)$"),
     lambda m: _two_odd_block(int(m[1]), int(m[2]), 1 if m[3] == "+" else -1, int(m[4]))),
    (re.compile(r"^(\d+)\^([+-])(\d+)$"), lambda m: _odd_block(int(m[1]), 1 if m[2] == "+" else -1, int(m[3]))),
    (re.compile(r"^(trivial|1)$"), lambda m: trivial_form()),
]


def _parse_token(tok: str) -> DiscForm:
    t = tok.replace("{", "").replace("}", "").replace(" ", "")
    # accept 2^+1_1 as an alias of 2_1^+1
    alt = re.match(r"^(\d+)\^([+-]\d+)_(\w+)$", t)
    if alt:
        t = f"{alt[1]}_{alt[3]}^{alt[2]}"
    for pat, build in _TOKEN_PATTERNS:
        m = pat.match(t)
        if m:
            return build(m)
    raise FormError(f"unknown symbol {tok!r}; {_GRAMMAR}")


def _excess(q: int, eps: int, n: int) -> int:
    """p-excess of an odd Jordan block, or 4 * (sign defect) for 2-adic ones."""
    k = factorize(q)[min(factorize(q))]
    defect = 4 if (k % 2 and eps == -1) else 0
    return (n * (q - 1) + defect) % 8 if q % 2 else defect


def token_signature(tok: str) -> int:
    """Signature of one symbol token from the oddity and p-excess formula alone."""
    t = tok.replace("{", "").replace("}", "").replace(" ", "")
    alt = re.match(r"^(\d+)\^([+-]\d+)_(\w+)$", t)
    if alt:
        t = f"{alt[1]}_{alt[3]}^{alt[2]}"
    if t in ("trivial", "1") or re.match(r"^UG?\(", t):
        return 0
    m = re.match(r"^(\d+)_II\^([+-])(\d+)$", t)
    if m:
        return _excess(int(m[1]), 1 if m[2] == "+" else -1, int(m[3]))
    m = re.match(r"^(\d+)_(\d+)\^([+-])(\d+)$", t)
    if m:
        return (int(m[2]) + _excess(int(m[1]), 1 if m[3] == "+" else -1, int(m[4]))) % 8
    m = re.match(r"^(\d+)\^([+-])(\d+)$", t)
    if m:
        return (-_excess(int(m[1]), 1 if m[2] == "+" else -1, int(m[3]))) % 8
    raise FormError(f"unknown symbol {tok!r}; {_GRAMMAR}")


def symbol_signature(symbol: str) -> int:
    """Signature predicted by the genus symbol (oddity minus the p-excesses)."""
    parts = [p for p in re.split(r"⊕|\(\+\)|\s\+\s", symbol) if p.strip()]
    return sum(token_signature(p.strip()) for p in parts) % 8


def builtin(symbol: str) -> DiscForm:
    parts = [p for p in re.split(r"⊕|\(\+\)|\s\+\s", symbol) if p.strip()]
    if not parts:
        raise FormError(f"empty symbol; {_GRAMMAR}")
    forms = [_parse_token(p.strip()) for p in parts]
    out = forms[0]
    for f in forms[1:]:
        out = out.direct_sum(f)
    out.label = " ⊕ ".join(f.label or "?" for f in forms)
    return out


# ---------------------------------------------------------------------------
# corpus

def jordan_block_symbols(max_order: int = 32) -> list[str]:
    """Symbols of all constructible single Jordan blocks of order at most ``max_order``."""
    out = []
    for p in range(3, max_order + 1):
        if not is_prime(p):
            continue
        q = p
        while q <= max_order:
            n = 1
            while q ** n <= max_order:
                out += [f"{q}^+{n}", f"{q}^-{n}"]
                n += 1
            q *= p
    q = 2
    while q <= max_order:
        n = 1
        while q ** n <= max_order:
            for t in range(8):
                if t % 2 != n % 2:
                    continue
                for sign in "+-":
                    sym = f"{q}_{t}^{sign}{n}"
                    try:
                        _parse_token(sym)
                    except FormError:
                        continue
                    out.append(sym)
            if n % 2 == 0:
                out += [f"{q}_II^+{n}", f"{q}_II^-{n}"]
            n += 1
        q *= 2
    return out


def abelian_groups(max_order: int) -> list[tuple[int, ...]]:
    """Invariant factor lists n_1 | n_2 | ... of the nontrivial groups of order at most ``max_order``."""
    out = []

    def extend(facs, size):
        if facs:
            out.append(tuple(facs))
        last = facs[-1] if facs else 1
        for n in range(max(last, 2), max_order // size + 1):
            if n % last == 0:
                extend(facs + [n], size * n)

    extend([], 1)
    return sorted(set(out), key=lambda f: (prod(f), f))


def corpus_symbols(max_block: int = 32, max_sum: int = 48, max_hyp: int = 12, max_group: int = 16,
                   max_blocks: int = 2) -> list[str]:
    """The test corpus: Jordan blocks, their sums of up to ``max_blocks`` blocks, U(N) and U_G
    for noncyclic G (cyclic G is U(N))."""
    blocks = jordan_block_symbols(max_block)
    orders = {s: _parse_token(s).size for s in blocks}
    out = ["trivial"] + list(blocks)
    sums = []

    def extend(combo, start, size):
        if len(combo) >= 2:
            sums.append(combo)
        if len(combo) < max_blocks:
            for i in range(start, len(blocks)):
                if size * orders[blocks[i]] <= max_sum:
                    extend(combo + [i], i, size * orders[blocks[i]])

    extend([], 0, 1)
    out += [" ⊕ ".join(blocks[i] for i in c) for c in sorted(sums, key=lambda c: (len(c), c))]
    out += [f"U({n})" for n in range(1, max_hyp + 1)]
    out += [f"UG({','.join(map(str, g))})" for g in abelian_groups(max_group) if len(g) > 1]
    return out


def corpus(**kw) -> list[DiscForm]:
    return [builtin(s) for s in corpus_symbols(**kw)]
