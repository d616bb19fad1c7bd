"""Invariant vectors of Weil representations.

The kernel method is the reference computation.  Its dimension is
certified from both sides: an exactly verified basis of rational
invariant vectors gives a lower bound, and the rank of the linear system
over a prime field containing the M-th roots of unity gives an upper
bound (reduction can only lower the rank).  The Frobenius trace average
and the closed dimension formulas are cross-checks.
"""

from __future__ import annotations

import itertools
import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exactnum import (
    CycArray,
    CycNumber,
    divisors,
    embed_modp,
    euler_phi,
    factorize,
    independent_rows_mod_p,
    integer_primitive,
    nullspace_rational,
    prime_with_root,
    rank_mod_p,
    sqrt_nat,
)
from .fqm import DiscForm, Subgroup, builtin, classify, isotropic_subgroups, orthogonal_complement, quotient_form
from .weil import a_coords, apply_word, arrow_up, lift_sl2, matrix_to_word, sl2_classes

DEFAULT_MAX_LEVEL = 12


@dataclass
class InvariantReport:
    dim_kernel: int
    basis: list[list[int]]
    rational: bool
    dim_frobenius: int | None = None
    dim_formula: int | None = None
    formula: str | None = None
    triviality: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def dims(self) -> list[int]:
        return [d for d in (self.dim_kernel, self.dim_frobenius, self.dim_formula) if d is not None]

    @property
    def agreement(self) -> bool:
        return len(set(self.dims)) <= 1

    def to_json(self) -> dict:
        return {
            "agreement": self.agreement,
            "basis": self.basis,
            "dim_formula": self.dim_formula,
            "dim_frobenius": self.dim_frobenius,
            "dim_kernel": self.dim_kernel,
            "formula": self.formula,
            "notes": list(self.notes),
            "rational": self.rational,
            "triviality": self.triviality,
        }


# ---------------------------------------------------------------------------
# kernel method

def _s_columns(D: DiscForm, support: np.ndarray) -> CycArray:
    M = D.conductor
    cols = CycArray.zeros((D.size, len(support)), M)
    num = cols.num.copy()
    num[support, np.arange(len(support)), 0] = 1
    return apply_word(D, "S", CycArray(M, num))


def _rational_solutions(R: CycArray, support: np.ndarray) -> list[list[Fraction]]:
    """Rational x with R x = x on the support, R read over the power basis."""
    n, k = R.shape
    num = R.num.astype(object)
    eq = np.transpose(num, (0, 2, 1)).copy()  # (n, phi, k)
    eq[support, 0, np.arange(k)] -= R.den
    rows = eq.reshape(-1, k)
    P, _ = prime_with_root(1)
    pick = independent_rows_mod_p(rows, P)
    sub = [[Fraction(int(x)) for x in rows[i]] for i in pick]
    sols = nullspace_rational(sub, k) if sub else [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    ok = all(not (rows @ np.array([int(c * _den(s)) for c in s], dtype=object)).any() for s in sols)
    if not ok:
        full = [[Fraction(int(x)) for x in row] for row in rows]
        sols = nullspace_rational(full, k)
    return sols


def _den(v) -> int:
    return math.lcm(*(Fraction(c).denominator for c in v)) if len(v) else 1


def _kernel_upper_bound(R: CycArray, support: np.ndarray, tries: int = 3) -> int:
    """k minus the rank of (rho(S) - I) over F_p; never below the true dimension."""
    n, k = R.shape
    best = k
    lo = 1 << 28
    for _ in range(tries):
        P, w = prime_with_root(R.conductor, lo)
        A = embed_modp(R, P, w)
        A[support, np.arange(k)] = (A[support, np.arange(k)] - R.den) % P
        best = min(best, k - rank_mod_p(A, P))
        lo = P + 1
    return best


def _nullspace_cyc(R: CycArray, support: np.ndarray) -> int:
    """Exact kernel dimension of rho(S) - I on the support by elimination over Q(zeta)."""
    n, k = R.shape
    rows = []
    for g in range(n):
        row = []
        for j in range(k):
            z = R.entry(g, j)
            if support[j] == g:
                z = z - 1
            row.append(z)
        rows.append(row)
    rank, r = 0, 0
    for c in range(k):
        piv = next((i for i in range(r, n) if not rows[i][c].is_zero()), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [z * inv for z in rows[r]]
        for i in range(n):
            if i != r and not rows[i][c].is_zero():
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
        rank += 1
    return k - rank


def _primitive_basis(sols: list[list[Fraction]], support: np.ndarray, n: int) -> list[list[int]]:
    out = []
    for s in sols:
        ints = integer_primitive(s)
        v = [0] * n
        for g, c in zip(support, ints):
            v[int(g)] = int(c)
        out.append(v)
    return out


def is_invariant(D: DiscForm, vectors: list[list[int]]) -> bool:
    """Exact check that rho(T) and rho(S) fix every vector."""
    if not vectors:
        return True
    V = CycArray.from_rationals(np.array(vectors, dtype=object).T, D.conductor)
    return apply_word(D, "T", V) == V and apply_word(D, "S", V) == V


def invariant_subspace(D: DiscForm) -> InvariantReport:
    """C[D]^inv by the kernel of (rho(T) - I; rho(S) - I)."""
    if D.signature % 2:
        return InvariantReport(0, [], True, triviality="odd_signature")
    # rho(T) - I vanishes exactly on the isotropic coordinates
    support = np.asarray(D.isotropic_elements)
    R = _s_columns(D, support)
    sols = _rational_solutions(R, support)
    basis = _primitive_basis(sols, support, D.size)
    assert is_invariant(D, basis), "rational solution is not invariant"
    lower = len(basis)
    upper = _kernel_upper_bound(R, support)
    notes = []
    if upper != lower:
        exact = _nullspace_cyc(R, support)
        notes.append(f"modular bound {upper} differs from rational dimension {lower}; exact dimension {exact}")
        return InvariantReport(exact, basis, exact == lower, notes=notes)
    return InvariantReport(lower, basis, True)


# ---------------------------------------------------------------------------
# vanishing criteria

def triviality_check(D: DiscForm) -> str:
    """Which sufficient condition for C[D]^inv = 0 holds, if any."""
    if D.signature % 2:
        return "odd_signature"
    iso = set(int(x) for x in D.isotropic_elements)
    gen = D.subgroup(sorted(iso))
    perp = orthogonal_complement(gen)
    rep = perp.coset_rep()
    cosets = set(int(x) for x in rep)
    hit = {int(rep[x]) for x in range(D.size) if x not in iso}
    if hit == cosets:
        return "surjectivity"
    return "inconclusive"


# ---------------------------------------------------------------------------
# Frobenius trace average

def dim_frobenius(D: DiscForm, max_level: int = DEFAULT_MAX_LEVEL) -> int:
    """(1/|SL2(Z/N)|) sum of Tr rho(m), summed over conjugacy classes."""
    if D.signature % 2:
        raise ValueError("odd signature: rho(Z^2) = -1, so there are no invariants and no SL2(Z/N) action")
    N = D.level
    if N > max_level:
        raise ValueError(f"level {N} exceeds the Frobenius budget {max_level}")
    M = D.conductor
    I = CycArray.identity(D.size, M)
    total = CycNumber.zero(M)
    order = 0
    for rep, size in sl2_classes(N):
        w = matrix_to_word(lift_sl2(rep, N))
        img = apply_word(D, w, I)
        tr = CycArray(M, img.num[np.arange(D.size), np.arange(D.size)].sum(axis=0), img.den)
        total = total + _trace(tr) * size
        order += size
    val = (total / order).rational_value()
    assert val.denominator == 1 and val >= 0, f"trace average {val} is not a nonnegative integer"
    return int(val)


def _trace(arr: CycArray) -> CycNumber:
    canon = [Fraction(int(c), arr.den) for c in arr.num]
    return CycNumber.from_canonical(arr.conductor, canon)


# ---------------------------------------------------------------------------
# closed formulas

def _group_elements(ns):
    return list(itertools.product(*[range(n) for n in ns]))


def _element_order(x, ns) -> int:
    o = 1
    for a, n in zip(x, ns):
        o = math.lcm(o, n // math.gcd(a, n))
    return o


def _span_pair(x, y, ns) -> frozenset:
    ox, oy = _element_order(x, ns), _element_order(y, ns)
    return frozenset(
        tuple((i * a + j * b) % n for a, b, n in zip(x, y, ns)) for i in range(ox) for j in range(oy)
    )


def subgroup_type_counts(ns) -> dict[tuple[int, int], int]:
    """S_{n,m}(G): subgroups of G = sum Z/n_i isomorphic to Z/n + Z/m with m | n."""
    ns = tuple(int(n) for n in ns)
    els = _group_elements(ns)
    subs = {_span_pair(x, y, ns) for x in els for y in els}
    out: dict[tuple[int, int], int] = {}
    for H in subs:
        n = max(_element_order(z, ns) for z in H)
        key = (n, len(H) // n)
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


def psi(n: int) -> Fraction:
    out = Fraction(n)
    for p in factorize(n) if n > 1 else {}:
        out *= Fraction(p + 1, p)
    return out


def two_generator_count(n: int, m: int, N: int, M: int) -> Fraction:
    """Closed count of subgroups of type (n, m) in Z/N + Z/M (valid for m | M, n | N)."""
    return psi(n // m) / psi(n // math.gcd(n, M))


def dim_hyperbolic(ns) -> tuple[int, dict[tuple[int, int], int], list[str]]:
    """dim C[U_G]^inv = sum S_{n,m}(G) phi(m), with the table and formula mismatches."""
    ns = tuple(int(n) for n in ns)
    table = subgroup_type_counts(ns)
    dim = sum(c * euler_phi(m) for (n, m), c in table.items())
    mismatches = []
    if len(ns) <= 2:
        M, N = (ns[0], ns[1]) if len(ns) == 2 else (1, ns[0] if ns else 1)
        for n in divisors(N):
            for m in divisors(n):
                if M % m:
                    continue
                pred = two_generator_count(n, m, N, M)
                got = table.get((n, m), 0)
                if pred != got:
                    mismatches.append(f"S_({n},{m}) = {got}, closed form {pred}")
    return dim, table, mismatches


def sigma0(n: int) -> int:
    return len(divisors(n))


def dim_DNM(N: int, M: int) -> int:
    """dim C[U_G]^inv for G = Z/N + Z/M by the divisor sum, checked against its specialisations."""
    if N < 1 or M < 1 or N % M:
        raise ValueError("dim_DNM needs M | N")
    total = Fraction(0)
    for t in divisors(M):
        for k in divisors(N // t):
            if math.gcd(k, M // t) != 1:
                continue
            for d in divisors(t):
                total += psi(k * d) * euler_phi(t // d) / psi(k)
    assert total.denominator == 1
    value = int(total)
    fac = factorize(N) if N > 1 else {}
    if len(fac) == 1:
        (p, r), = fac.items()
        s = factorize(M).get(p, 0) if M > 1 else 0
        pp = (r + 1 - s) * (s + 1) * p ** s - (r - 1 - s) * s * Fraction(p) ** (s - 1)
        assert pp == value, "prime power specialisation disagrees"
    if M > 1 and factorize(M) == {M: 1}:
        p, Np = M, N
        while Np % p == 0:
            Np //= p
        assert (2 * p - 1) * sigma0(N // p) + 2 * sigma0(Np) == value, "M prime specialisation disagrees"
    if M == 1:
        assert value == sigma0(N)
    return value


def fpvs_realizable(p: int, r: int) -> bool:
    if r == 0:
        return True
    if p == 2:
        return r == 2
    return r in (1, 2)


def dim_fpvs(p: int, d: int, r: int) -> int:
    """Invariant dimension for an F_p vector space form with maximal isotropic p^d and anisotropic part p^r."""
    if not fpvs_realizable(p, r):
        warnings.warn(f"no F_{p} vector space form has an anisotropic kernel of size {p}^{r}")
    if d == 0:
        return 1 if r == 0 else 0
    a = Fraction(p ** r * (p ** d - 1) * (p ** (d - 1) - 1), p * p - 1)
    b = Fraction(p ** d - 1, p - 1)
    out = a + b + (1 if r == 0 else 0)
    assert out.denominator == 1
    return int(out)


def fp_space_parameters(D: DiscForm, max_order: int = 256) -> tuple[int, int, int] | None:
    """(p, d, r) if D is an F_p vector space of level p, else None."""
    if D.size == 1:
        return None
    fac = factorize(D.size)
    if len(fac) != 1:
        return None
    (p, n), = fac.items()
    if any(o != p for o in D.orders if o > 1) or D.level != p:
        return None
    big = max(H.order for H in isotropic_subgroups(D, max_order))
    d = round(math.log(big, p))
    assert p ** d == big
    return p, d, n - 2 * d


def formula_dimension(D: DiscForm) -> tuple[int, str] | None:
    """A closed formula for dim C[D]^inv when D is a recognised family."""
    lab = D.label or ""
    m = re.fullmatch(r"U\((\d+)\)", lab)
    if m:
        return sigma0(int(m[1])), "sigma0"
    m = re.fullmatch(r"UG\(([\d,]+)\)", lab)
    if m:
        ns = [int(x) for x in m[1].split(",")]
        return dim_hyperbolic(ns)[0], "hyperbolic"
    if D.signature % 2 == 0:
        par = fp_space_parameters(D)
        if par is not None:
            p, d, r = par
            return dim_fpvs(p, d, r), "fp_space"
    return None


def invariant_report(D: DiscForm, method: str = "all", max_level: int = DEFAULT_MAX_LEVEL) -> InvariantReport:
    """Kernel dimension plus the requested cross-checks."""
    if method not in ("kernel", "frobenius", "formula", "all"):
        raise ValueError(f"unknown method {method!r}")
    rep = invariant_subspace(D)
    rep.triviality = triviality_check(D)
    if rep.triviality != "inconclusive" and rep.dim_kernel != 0:
        rep.notes.append("vanishing criterion fired but the kernel is nonzero")
    if method in ("frobenius", "all"):
        if D.signature % 2 == 0 and D.level <= max_level:
            rep.dim_frobenius = dim_frobenius(D, max_level)
        else:
            rep.notes.append("frobenius skipped: odd signature or level above budget")
    if method in ("formula", "all"):
        f = formula_dimension(D)
        if f is not None:
            rep.dim_formula, rep.formula = f
        else:
            rep.notes.append("no closed formula applies")
    return rep


# ---------------------------------------------------------------------------
# explicit invariant vectors

def _hyperbolic_H(D: DiscForm, N: int, d: int) -> Subgroup:
    return D.subgroup([(d % N, 0), (0, (N // d) % N)])


def basis_U_N(N: int) -> list[tuple[int, list[int]]]:
    """The vectors a_d = sum over d | a, N/d | b of e_{ae + bf}, for d | N, checked."""
    D = builtin(f"U({N})")
    out = []
    for d in divisors(N):
        v = [0] * D.size
        for a in range(0, N, d):
            for b in range(0, N, N // d):
                v[D.index((a, b))] = 1
        out.append((d, v))
    vecs = [v for _, v in out]
    assert is_invariant(D, vecs), "a_d is not invariant"
    P, _ = prime_with_root(1)
    assert rank_mod_p(np.array(vecs, dtype=object), P) == len(vecs), "a_d are dependent"
    return out


def a_d_identity(N: int) -> bool:
    """a_d equals sqrt(N) times a^{H_d}_{0,0} for every d | N."""
    D = builtin(f"U({N})")
    M = D.conductor
    root = sqrt_nat(N, M)
    for d, v in basis_U_N(N):
        H = _hyperbolic_H(D, N, d)
        assert classify(H) == "isotropic" and H.order == N
        lhs = CycArray.from_rationals(np.array(v, dtype=object), M)
        if lhs != a_coords(H, 0, 0).scale(root):
            return False
    return True


def special_invariant(D: DiscForm) -> list[int]:
    """sum over nonzero isotropic gamma of e_gamma, minus (p - 1) e_0, for p^{-4} and 2_II^{-4}."""
    par = fp_space_parameters(D)
    if par is None or par[1:] != (1, 2):
        raise ValueError("special_invariant needs an F_p vector space of rank 4 with maximal isotropic order p")
    p = par[0]
    v = [0] * D.size
    for g in D.isotropic_elements:
        v[int(g)] = 1
    v[0] = -(p - 1)
    return v


def spans_invariants(D: DiscForm, vectors: list[list[int]], dim: int) -> bool:
    """True when the given invariant integer vectors have rank ``dim``."""
    if not vectors:
        return dim == 0
    P, _ = prime_with_root(1)
    # rank mod P bounds the rational rank from below; the vectors lie in a space of dimension dim
    return rank_mod_p(np.array(vectors, dtype=object), P) == dim


# ---------------------------------------------------------------------------
# images of arrow operators

def selfdual_images(D: DiscForm, max_order: int = 256) -> list[list[int]]:
    """Indicator vectors of the self-dual isotropic subgroups (the lifted trivial vectors)."""
    out = []
    for H in isotropic_subgroups(D, max_order):
        if H.order * H.order == D.size:
            v = [0] * D.size
            for h in H.elements:
                v[h] = 1
            out.append(v)
    return out


def span_report(D: DiscForm, max_order: int = 256) -> dict:
    """Rank of the self-dual images against the kernel dimension."""
    rep = invariant_subspace(D)
    imgs = selfdual_images(D, max_order)
    if imgs:
        assert is_invariant(D, imgs), "self-dual image is not invariant"
    P, _ = prime_with_root(1)
    rank = rank_mod_p(np.array(imgs, dtype=object), P) if imgs else 0
    return {"dim": rep.dim_kernel, "selfdual": len(imgs), "rank": rank, "spans": bool(imgs) and rank == rep.dim_kernel}


def isotropic_image_rank(D: DiscForm, max_order: int = 256) -> dict:
    """For F_p spaces with r > 0: rank of lifts of the invariants of K^perp/K, |K| = p^(d-1)."""
    par = fp_space_parameters(D, max_order)
    if par is None:
        raise ValueError("needs an F_p vector space form of level p")
    p, d, r = par
    rep = invariant_subspace(D)
    if d < 1:
        return {"dim": rep.dim_kernel, "images": 0, "rank": 0}
    M = D.conductor
    cols = []
    for K in isotropic_subgroups(D, max_order):
        if K.order != p ** (d - 1):
            continue
        sq = quotient_form(K)
        inner = invariant_subspace(sq.form)
        for v in inner.basis:
            w = CycArray.from_rationals(np.array(v, dtype=object), sq.form.conductor).embed(M)
            cols.append(arrow_up(K, w, sq))
    if not cols:
        return {"dim": rep.dim_kernel, "images": 0, "rank": 0}
    P, w = prime_with_root(M)
    A = np.stack([embed_modp(c, P, w) for c in cols])
    return {"dim": rep.dim_kernel, "images": len(cols), "rank": rank_mod_p(A, P)}


# ---------------------------------------------------------------------------
# orbit count on generating pairs

def slnm_orbit_count(n: int, m: int, budget: int = 1 << 16) -> int:
    """Orbits of SL2(Z/n) on generating pairs of Z/n + Z/m, by union-find over T and S."""
    if n < 1 or m < 1 or n % m:
        raise ValueError("slnm_orbit_count needs m | n")
    ns = (n, m)
    G = _group_elements(ns)
    if len(G) ** 2 > budget:
        raise ValueError(f"{len(G) ** 2} pairs exceed the budget {budget}")
    size = n * m
    pairs = [(x, y) for x in G for y in G if len(_span_pair(x, y, ns)) == size]
    index = {v: i for i, v in enumerate(pairs)}
    parent = list(range(len(pairs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def add(a, b, s=1):
        return tuple((u + s * v) % k for u, v, k in zip(a, b, ns))

    zero = (0, 0)
    for i, (x, y) in enumerate(pairs):
        # T: (x, y) -> (x + y, y);  S: (x, y) -> (-y, x)
        for img in ((add(x, y), y), (add(zero, y, -1), x)):
            a, b = find(i), find(index[img])
            if a != b:
                parent[max(a, b)] = min(a, b)
    count = len({find(i) for i in range(len(pairs))})
    assert count == euler_phi(m), f"{count} orbits, expected phi({m}) = {euler_phi(m)}"
    return count
