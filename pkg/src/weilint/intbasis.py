"""Bases of C[D] in which the Weil representation has algebraic integer entries.

The construction splits D into Sylow parts and tensors the results.  On a
p-part it uses a maximal quasi-isotropic H: when H is self-dual the a-vectors
of H already give a monomial action.  Otherwise an isotropic J of order p
splits C[D] into the arrow image of C[J^perp/J], handled recursively, and the
span of the b-vectors.  Anisotropic forms are split orthogonally down to
cyclic pieces of prime order, where a Krylov basis rho(T^l) a is used.

Every basis carries an exact inverse built from its structure, and
``verify_integrality`` conjugates the representation by it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
import itertools

import numpy as np

from .exactnum import (
    CycArray, CycNumber, inv_root_difference, kron, sqrt_nat, stack,
)
from .fqm import (
    DEFAULT_MAX_ORDER, DiscForm, Subgroup, Subquotient, builtin, classify,
    isotropic_lines, maximal_quasi_isotropic, orthogonal_complement, product_index_map,
    quotient_form, sylow_decompose,
)
from .weil import (
    BContext, MpWord, _inv_sqrt, a_basis, a_vector_sym, apply_word, arrow_matrix,
    b_index_reps, random_word,
)


# ---------------------------------------------------------------------------
# containers

@dataclass
class BasisSpec:
    """A basis of C[D]: per-column tags, coordinates and an exact inverse."""

    form: DiscForm
    vectors: list[dict]
    coords: CycArray
    inverse: CycArray
    tree: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.coords.shape[1]

    def gram(self) -> CycArray:
        return self.coords.H() @ self.coords

    def is_orthonormal(self) -> bool:
        return self.gram() == CycArray.identity(self.size, self.coords.conductor)

    def unit_norm(self) -> bool:
        g = self.gram()
        M = g.conductor
        one = CycNumber.from_rational(1, M)
        return all(g.entry(i, i) == one for i in range(self.size))

    def check_inverse(self) -> bool:
        n = self.size
        return (self.inverse @ self.coords) == CycArray.identity(n, self.coords.conductor)

    def to_json(self) -> dict:
        return {
            "form": self.form.to_json(),
            "vectors": self.vectors,
            "tree": self.tree,
            "conductor": self.coords.conductor,
            "coords": [[z.to_json() for z in row] for row in self.coords.to_numbers()],
        }


@dataclass
class IntegralityReport:
    words: list[str]
    denominators: list[int]
    verdict: bool

    def to_json(self) -> dict:
        return {"words": self.words, "denominators": self.denominators, "verdict": self.verdict}


def _elems(D: DiscForm, H: Subgroup) -> list[list[int]]:
    return [list(D.element(g)) for g in H.gens]


# ---------------------------------------------------------------------------
# Vandermonde machinery

def _as_array(xs) -> CycArray:
    if isinstance(xs, CycArray):
        return xs
    return CycArray.from_numbers(list(xs))


def _monomial(z: CycNumber) -> int | None:
    """Exponent a if z = zeta_M^a, else None."""
    nz = [(k, c) for k, c in enumerate(z.coeffs) if c]
    if len(nz) == 1 and nz[0][1] == 1:
        return nz[0][0]
    return None


def _inv_diff(x: CycNumber, y: CycNumber) -> CycNumber:
    M = max(x.conductor, y.conductor)
    x, y = x.embed(M) if M % x.conductor == 0 else x, y.embed(M) if M % y.conductor == 0 else y
    a, b = _monomial(x), _monomial(y)
    if a is not None and b is not None and x.conductor == y.conductor:
        return inv_root_difference(a, b, x.conductor)
    return (x - y).inverse()


def complete_homogeneous(xs: list[CycNumber], k: int) -> CycNumber:
    """h_k(xs), the sum of all monomials of degree k."""
    M = xs[0].conductor if xs else 1
    h = [CycNumber.from_rational(1, M)] + [CycNumber.zero(M)] * k
    for x in xs:
        for d in range(1, k + 1):
            h[d] = h[d] + x * h[d - 1]
    return h[k]


def vandermonde(xs) -> CycArray:
    """The matrix with rows (1, x_i, x_i^2, ...)."""
    xs = list(xs)
    n = len(xs)
    M = xs[0].conductor if xs else 1
    rows = []
    for x in xs:
        p = CycNumber.from_rational(1, M)
        row = []
        for _ in range(n):
            row.append(p)
            p = p * x
        rows.append(row)
    return CycArray.from_numbers(rows, M)


def vandermonde_lu(xs, chain: bool = True) -> tuple[CycArray, CycArray, list[tuple[CycArray, CycArray]]]:
    """V = L U with U unipotent upper triangular, plus the factorisation of L.

    U_ij = h_{j-i}(x_1..x_i) and L_ij = prod_{m<j} (x_i - x_m).  The chain
    (N_1, D_1), ..., (N_{n-1}, D_{n-1}) multiplies to L, where N_h is the
    identity plus ones below the diagonal in column h and D_h is diagonal with
    entries x_i - x_h for i > h.
    """
    xs = list(xs)
    n = len(xs)
    if n == 0:
        raise ValueError("need at least one node")
    M = xs[0].conductor
    xs = [x.embed(M) for x in xs]
    for i, j in itertools.combinations(range(n), 2):
        if xs[i] == xs[j]:
            raise ValueError(f"repeated node at positions {i} and {j}")
    zero, one = CycNumber.zero(M), CycNumber.from_rational(1, M)
    L = [[zero] * n for _ in range(n)]
    for i in range(n):
        acc = one
        for j in range(i + 1):
            L[i][j] = acc
            acc = acc * (xs[i] - xs[j])
    U = [[zero] * n for _ in range(n)]
    h = [one] + [zero] * (n - 1)
    for i in range(n):
        # h_k(x_1..x_i) = h_k(x_1..x_{i-1}) + x_i h_{k-1}(x_1..x_i)
        for k in range(1, n - i):
            h[k] = h[k] + xs[i] * h[k - 1]
        for j in range(i, n):
            U[i][j] = h[j - i]
    factors = []
    for h in range(n - 1 if chain else 0):
        N = [[one if (r == c or (c == h and r > h)) else zero for c in range(n)] for r in range(n)]
        Dg = [[(xs[r] - xs[h] if r > h else one) if r == c else zero for c in range(n)] for r in range(n)]
        factors.append((CycArray.from_numbers(N, M), CycArray.from_numbers(Dg, M)))
    return CycArray.from_numbers(L, M), CycArray.from_numbers(U, M), factors


def _lower_solve(L: CycArray, diag_inv: list[CycNumber], R: CycArray) -> CycArray:
    """Solve L X = R for lower triangular L, given the inverses of its diagonal."""
    n = L.shape[0]
    rows: list[CycArray] = []
    for i in range(n):
        r = R[i]
        if i:
            r = r - (L[i:i + 1, :i] @ stack(rows, axis=0))[0]
        rows.append(r.scale(diag_inv[i]))
    return stack(rows, axis=0)


def _upper_unit_solve(U: CycArray, R: CycArray) -> CycArray:
    """Solve U X = R for unipotent upper triangular U."""
    n = U.shape[0]
    rows: list[CycArray | None] = [None] * n
    for i in reversed(range(n)):
        r = R[i]
        if i < n - 1:
            r = r - (U[i:i + 1, i + 1:] @ stack(rows[i + 1:], axis=0))[0]
        rows[i] = r
    return stack(rows, axis=0)


def vandermonde_solve(xs, R: CycArray) -> CycArray:
    """V^{-1} R through the LU factorisation, dividing only by node differences."""
    xs = list(xs)
    L, U, _ = vandermonde_lu(xs, chain=False)
    M = L.conductor
    diag_inv = []
    for i in range(len(xs)):
        d = CycNumber.from_rational(1, M)
        for m in range(i):
            d = d * _inv_diff(xs[i], xs[m])
        diag_inv.append(d)
    R = R.embed(max(M, R.conductor)) if R.conductor % M == 0 or M % R.conductor == 0 else R
    return _upper_unit_solve(U, _lower_solve(L, diag_inv, R))


def _zeta(p: int, a: int) -> CycNumber:
    return CycNumber.root(a, p)


def c_coefficients(p: int, k: int, parity: str = "odd") -> list[CycNumber]:
    """Coefficients c_l expressing the k-twisted odd (or even) vector in the Krylov basis.

    Odd parity solves sum_l (z^{2m} - z^{-2m}) z^{l m^2} c_l = z^{2km} - z^{-2km}
    for 1 <= m <= (p-1)/2; even parity uses plus signs, 0 <= m <= (p-1)/2.
    The solution is checked by substitution; odd-parity integrality is asserted.
    """
    from .exactnum import is_prime
    if p < 3 or not is_prime(p):
        raise ValueError("p must be an odd prime")
    if not 1 <= k <= p - 1:
        raise ValueError("k must lie in 1..p-1")
    if parity not in ("odd", "even"):
        raise ValueError("parity must be 'odd' or 'even'")
    n = (p - 1) // 2
    ms = range(1, n + 1) if parity == "odd" else range(0, n + 1)
    sgn = -1 if parity == "odd" else 1
    xs = [_zeta(p, m * m) for m in ms]
    eps = []
    for m in ms:
        num = _zeta(p, 2 * k * m) + _zeta(p, -2 * k * m) * sgn
        if parity == "odd":
            inv = _zeta(p, 2 * m) * inv_root_difference(4 * m, 0, p)
        elif m == 0:
            inv = CycNumber.from_rational(Fraction(1, 2), p)
        else:
            # 1 / (z^{2m} + z^{-2m}) = z^{2m} (z^{4m} - 1) / (z^{8m} - 1)
            inv = _zeta(p, 2 * m) * (_zeta(p, 4 * m) - 1) * inv_root_difference(8 * m, 0, p)
        eps.append(num * inv)
    E = CycArray.from_numbers([[e] for e in eps], p)
    C = vandermonde_solve(xs, E)
    # substitution check against the original system
    lhs = []
    for m in ms:
        row = []
        for l in range(len(xs)):
            row.append((_zeta(p, 2 * m) + _zeta(p, -2 * m) * sgn) * _zeta(p, l * m * m))
        lhs.append(row)
    rhs = CycArray.from_numbers([[_zeta(p, 2 * k * m) + _zeta(p, -2 * k * m) * sgn] for m in ms], p)
    assert CycArray.from_numbers(lhs, p) @ C == rhs, "c-coefficients fail the defining system"
    cs = [C.entry(i, 0) for i in range(len(xs))]
    if parity == "odd":
        assert all(c.is_integral() for c in cs), f"non-integral c-coefficient for p={p}, k={k}"
    return cs


def phi_mh(m: int, h: int, zeta: CycNumber | None = None):
    """The auxiliary function phi_{m,h}, at a root of unity or (zeta=None) at 1."""
    if zeta is None:
        val = Fraction(m, h)
        for j in range(1, h):
            val *= Fraction(m * m - j * j, h * h - j * j)
        return val
    a = _monomial(zeta)
    if a is None:
        raise ValueError("zeta must be a root of unity zeta_M^a")
    M = zeta.conductor
    if (4 * h * a) % M == 0:
        raise ZeroDivisionError(f"z^{2*h} - z^{-2*h} vanishes")
    val = (CycNumber.root(2 * m * a, M) - CycNumber.root(-2 * m * a, M)) * CycNumber.root(2 * h * a, M) \
        * inv_root_difference(4 * h * a, 0, M)
    for j in range(1, h):
        if ((h * h - j * j) * a) % M == 0:
            raise ZeroDivisionError(f"z^{h*h} - z^{j*j} vanishes")
        val = val * (CycNumber.root(m * m * a, M) - CycNumber.root(j * j * a, M)) \
            * inv_root_difference(h * h * a, j * j * a, M)
    return val


def f_recursion(m: int, h: int, r: int, zeta: CycNumber | None = None, _memo=None):
    """f^{(r)}_{m,h}: binomial(m+r, 2r+1) at h = 0, then f_{m,h-1} - phi_{m,h} f_{h,h-1}.

    With zeta=None the value at zeta = 1 is returned as a rational.
    """
    memo = {} if _memo is None else _memo
    key = (m, h)
    if key in memo:
        return memo[key]
    if h == 0:
        val = Fraction(comb(m + r, 2 * r + 1))
        if zeta is not None:
            val = CycNumber.from_rational(val, zeta.conductor)
    else:
        val = f_recursion(m, h - 1, r, zeta, memo) - phi_mh(m, h, zeta) * f_recursion(h, h - 1, r, zeta, memo)
    memo[key] = val
    return val


def chain_closed_form_identity(p: int, k: int) -> list[tuple[int, int]]:
    """Compare the chain D_h^{-1} N_h^{-1} ... D_1^{-1} N_1^{-1} eps with its closed form.

    Returns the checked (m, h) pairs; raises AssertionError on a mismatch.
    Also checks that the m-th entry of L^{-1} eps is the closed form with h = m - 1.
    """
    n = (p - 1) // 2
    z = lambda a: CycNumber.root(a, p)  # noqa: E731
    xs = {m: z(m * m) for m in range(1, n + 1)}
    minus = lambda a: z(a) - z(-a)  # noqa: E731

    def inv_minus(a):
        return z(a) * inv_root_difference(2 * a, 0, p)

    y = {m: minus(2 * k * m) * inv_minus(2 * m) for m in range(1, n + 1)}
    eta2 = minus(k) * minus(k)

    def closed(m, h):
        tot = CycNumber.zero(p)
        power = CycNumber.from_rational(1, p)
        memos: dict[int, dict] = {}
        for r in range(m):
            tot = tot + f_recursion(m, h, r, z(1), memos.setdefault(r, {})) * power
            power = power * eta2
        val = minus(2 * k) * tot * inv_minus(2 * m)
        for j in range(1, h + 1):
            val = val * inv_root_difference(m * m, j * j, p)
        return val

    checked = []
    for m in range(1, n + 1):
        assert y[m] == closed(m, 0)
        checked.append((m, 0))
    for h in range(1, n):
        for m in range(h + 1, n + 1):
            y[m] = (y[m] - y[h]) * inv_root_difference(m * m, h * h, p)
        for m in range(h + 1, n + 1):
            assert y[m] == closed(m, h), f"chain identity fails at m={m}, h={h}"
            checked.append((m, h))
    # L^{-1} eps entrywise
    L, _, _ = vandermonde_lu([xs[m] for m in range(1, n + 1)])
    diag_inv = []
    for i in range(1, n + 1):
        d = CycNumber.from_rational(1, p)
        for m in range(1, i):
            d = d * inv_root_difference(i * i, m * m, p)
        diag_inv.append(d)
    E = CycArray.from_numbers([[minus(2 * k * m) * inv_minus(2 * m)] for m in range(1, n + 1)], p)
    Y = _lower_solve(L, diag_inv, E)
    for m in range(1, n + 1):
        assert Y.entry(m - 1, 0) == closed(m, m - 1), f"L^-1 eps differs at m={m}"
    return checked


# ---------------------------------------------------------------------------
# anisotropic base cases

def _symbol_sign(D: DiscForm) -> int:
    p = D.size
    return 1 if builtin(f"{p}^+1").signature == D.signature else -1


def _krylov_part(D: DiscForm, g: int, start: CycArray, ms: list[int], sign: int,
                 alpha_inv: list[CycNumber]) -> tuple[CycArray, CycArray]:
    """Columns rho(T^l) start (l < len(ms)) and their exact inverse.

    ``start`` lies in the sign-symmetric part and equals sum_m alpha_m u_m
    with u_m the normalised sign-symmetrisations of e_{m g}; the coordinate
    matrix is U diag(alpha) V for the Vandermonde V of e(q(m g)).
    """
    M = D.conductor
    step = M // D.level
    n = len(ms)
    cols = [start]
    for _ in range(1, n):
        cols.append(cols[-1].mul_roots(D.qnum * step))
    B = _hstack(cols)
    one = CycNumber.from_rational(1, M)
    rows = []
    for m, ainv in zip(ms, alpha_inv):
        x = D.mul(m, g)
        y = int(D.neg[x])
        u = np.zeros(D.size, dtype=np.int64)
        u[x] = 1
        uu = CycArray.from_rationals(u, M)
        if x != y:
            u[y] = sign
            uu = CycArray.from_rationals(u, M).scale(_inv_sqrt(2, M))
        assert uu.inner(start) * ainv == one, "unexpected Krylov coefficient"
        rows.append(uu.conj().scale(ainv))
    xs = [CycNumber.root(int(D.qnum[D.mul(m, g)]) * step, M) for m in ms]
    Binv = vandermonde_solve(xs, stack(rows, axis=0))
    return B, Binv


def _hstack(blocks: list[CycArray]) -> CycArray:
    M = max(b.conductor for b in blocks)
    cols = [b.embed(M)[:, j] for b in blocks for j in range(b.shape[1])] if blocks[0].num.ndim == 3 else [b.embed(M) for b in blocks]
    return stack(cols, axis=1)


def _vstack(blocks: list[CycArray]) -> CycArray:
    M = max(b.conductor for b in blocks)
    rows = [b.embed(M)[i] for b in blocks for i in range(b.shape[0])]
    return stack(rows, axis=0)


def _cyclic_prime_basis(D: DiscForm) -> tuple[CycArray, CycArray, list[dict]]:
    """Krylov basis for a cyclic form of prime order (the anisotropic base case)."""
    p = D.size
    g = next(i for i in range(1, p) if D.order_of[i] == p)
    M = D.conductor
    step = M // D.level
    whole = D.whole
    if p == 2:
        start = a_vector_sym(whole, 0, 0, 1).coords
        ainv = [sqrt_nat(2, M)] * 2
        B, Binv = _krylov_part(D, g, start, [0, 1], 1, ainv)
        tags = [{"tag": "TwoAdic", "symbol": f"2_{D.signature}^{'+' if D.signature in (1, 7) else '-'}1", "l": l}
                for l in range(2)]
        return B, Binv, tags
    n = (p - 1) // 2
    sign = _symbol_sign(D)
    even = list(range(0, n + 1))
    ainv = [sqrt_nat(p, M)] + [sqrt_nat(2 * p, M) * Fraction(1, 2)] * n
    Be, Be_inv = _krylov_part(D, g, a_vector_sym(whole, 0, 0, 1).coords, even, 1, ainv)
    odd = list(range(1, n + 1))
    ainv = []
    for m in odd:
        b = int(D.bil[D.mul(m, g), g]) * step
        ainv.append(sqrt_nat(p, M) * inv_root_difference(b, -b, M))
    Bo, Bo_inv = _krylov_part(D, g, a_vector_sym(whole, g, 0, -1).coords, odd, -1, ainv)
    B = _hstack([Be, Bo])
    Binv = _vstack([Be_inv, Bo_inv])
    tags = [{"tag": "PrimeEven", "p": p, "sign": sign, "l": l} for l in range(n + 1)]
    tags += [{"tag": "PrimeOdd", "p": p, "sign": sign, "l": l} for l in range(n)]
    return B, Binv, tags


# ---------------------------------------------------------------------------
# the recursive construction

@dataclass
class _Block:
    coords: CycArray
    inverse: CycArray
    tags: list[dict]
    tree: dict


def _tensor(D: DiscForm, idx: np.ndarray, blocks: list[_Block], tag: str) -> _Block:
    """Combine bases of orthogonal summands; idx maps product positions to D indices."""
    K, Kinv = blocks[0].coords, blocks[0].inverse
    tags = [[t] for t in blocks[0].tags]
    for b in blocks[1:]:
        K, Kinv = kron(K, b.coords), kron(Kinv, b.inverse)
        tags = [ta + [tb] for ta in tags for tb in b.tags]
    order = np.argsort(idx)
    coords = K.take(order, axis=0)
    inverse = Kinv.take(order, axis=1)
    return _Block(coords, inverse, [{"tag": "Tensor", "children": t} for t in tags],
                  {"node": tag, "children": [b.tree for b in blocks]})


def _orthonormal_block(cols: list[CycArray]) -> tuple[CycArray, CycArray]:
    B = _hstack(cols)
    return B, B.H()


def _split_index(D: DiscForm, X: Subquotient, Y: Subquotient) -> np.ndarray:
    idx = D.add_table[np.repeat(X.section, Y.form.size), np.tile(Y.section, X.form.size)]
    return np.asarray(idx, dtype=np.int64)


def _build(D: DiscForm, max_order: int) -> _Block:
    if D.size == 1:
        M = D.conductor
        I = CycArray.identity(1, M)
        return _Block(I, I, [{"tag": "Trivial"}], {"node": "Trivial"})
    parts = sylow_decompose(D)
    if len(parts) > 1:
        blocks = [_build(part.form, max_order) for part in parts]
        return _tensor(D, product_index_map(D, parts), blocks, "Sylow")
    return _build_prime_power(D, max_order)


def _build_prime_power(D: DiscForm, max_order: int) -> _Block:
    H = maximal_quasi_isotropic(D)
    perp = orthogonal_complement(H)
    if perp.order == H.order:
        vecs = a_basis(H)
        B, Binv = _orthonormal_block([v.coords for v in vecs])
        kind = "SelfDualA" if classify(H) == "isotropic" else "QuasiA"
        Hj = _elems(D, H)
        tags = [{"tag": kind, "H": Hj, "v": [list(D.element(v.eta)), list(D.element(v.lam))]} for v in vecs]
        return _Block(B, Binv, tags, {"node": kind, "H": Hj, "count": len(vecs)})
    if not (D.qnum[1:] == 0).any():
        return _build_anisotropic(D, max_order)
    p = next(iter(_prime_of(D)))
    inside = isotropic_lines(H, p)
    if inside:
        J = inside[0]
    else:
        # H has no isotropic line: take the first line of D and extend it
        J = isotropic_lines(D.whole, p)[0]
        H = maximal_quasi_isotropic(D, J)
    sq = quotient_form(J)
    sub = _build(sq.form, max_order)
    up, _ = arrow_matrix(J, sq)
    up_coords = up @ sub.coords
    up_inv = sub.inverse @ up.H()
    ctx = BContext(H, J)
    reps = b_index_reps(ctx)
    bcols = [ctx.coords(e, l) for e, l in reps]
    Bb, Bb_inv = _orthonormal_block(bcols)
    coords = _hstack([up_coords, Bb])
    inverse = _vstack([up_inv, Bb_inv])
    Jj, Hj = _elems(D, J), _elems(D, H)
    tags = [{"tag": "Arrow", "J": Jj, "inner": t} for t in sub.tags]
    tags += [{"tag": "BVec", "H": Hj, "J": Jj, "v": [list(D.element(e)), list(D.element(l))]} for e, l in reps]
    tree = {"node": "Arrow+BVec", "H": Hj, "J": Jj, "b_count": len(reps), "inner": sub.tree}
    return _Block(coords, inverse, tags, tree)


def _prime_of(D: DiscForm) -> set[int]:
    from .exactnum import factorize
    return set(factorize(D.size))


def _build_anisotropic(D: DiscForm, max_order: int) -> _Block:
    if D.size in (2,) or (D.is_cyclic() and len(_prime_of(D)) == 1 and D.size == next(iter(_prime_of(D)))):
        B, Binv, tags = _cyclic_prime_basis(D)
        node = "TwoAdic" if D.size == 2 else "Prime"
        return _Block(B, Binv, tags, {"node": node, "order": D.size})
    triv = D.trivial_subgroup
    for x in range(1, D.size):
        X = D.subgroup([D.element(x)])
        if X.order == D.size:
            continue
        Xp = orthogonal_complement(X)
        if X.intersect(Xp).order != 1:
            continue
        SX, SY = Subquotient(X, triv), Subquotient(Xp, triv)
        blocks = [_build(SX.form, max_order), _build(SY.form, max_order)]
        return _tensor(D, _split_index(D, SX, SY), blocks, "OrthogonalSplit")
    raise AssertionError(f"no orthogonal splitting of the anisotropic form {D.label}")


def integral_basis(D: DiscForm, max_order: int = DEFAULT_MAX_ORDER) -> BasisSpec:
    """A basis of C[D] in which rho_D acts with algebraic integer entries."""
    if D.size > max_order:
        raise ValueError(f"|D| = {D.size} exceeds the bound {max_order}")
    blk = _build(D, max_order)
    M = D.conductor
    spec = BasisSpec(D, blk.tags, blk.coords.embed(M), blk.inverse.embed(M), blk.tree)
    assert spec.check_inverse(), "structural inverse is not an inverse"
    return spec


def prime_basis(p: int, sign: int) -> BasisSpec:
    """Krylov basis of p^{+-1}: rho(T^l) of the even and odd generating vectors."""
    from .exactnum import is_prime
    if p == 2 or not is_prime(p):
        raise ValueError("prime_basis needs an odd prime")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    D = builtin(f"{p}^{'+' if sign > 0 else '-'}1")
    B, Binv, tags = _cyclic_prime_basis(D)
    spec = BasisSpec(D, tags, B, Binv, {"node": "Prime", "order": p})
    assert spec.check_inverse()
    return spec


def two_adic_basis(symbol: str) -> BasisSpec:
    """The basis {a_00, rho(T) a_00} of a 2-adic form of order 2."""
    D = builtin(symbol)
    if D.size != 2:
        raise ValueError(f"two_adic_basis supports the order-2 forms 2_t^{{+-1}}, not {symbol!r}")
    B, Binv, tags = _cyclic_prime_basis(D)
    spec = BasisSpec(D, tags, B, Binv, {"node": "TwoAdic", "order": 2})
    assert spec.check_inverse()
    return spec


def natural_basis(D: DiscForm) -> BasisSpec:
    I = CycArray.identity(D.size, D.conductor)
    tags = [{"tag": "Natural", "v": list(D.element(i))} for i in range(D.size)]
    return BasisSpec(D, tags, I, I, {"node": "Natural"})


GENERATOR_WORDS = ("T", "T^-1", "S", "S^-1")


def verify_integrality(D: DiscForm, B: BasisSpec, n_random: int = 50, max_len: int = 10,
                       seed: int = 0) -> IntegralityReport:
    """Conjugate rho(w) by B for the generators and random words; integral iff all entries are."""
    rng = np.random.default_rng(seed)
    words = [MpWord.parse(w) for w in GENERATOR_WORDS]
    words += [random_word(rng, max_len) for _ in range(n_random)]
    dens = []
    for w in words:
        X = B.inverse @ apply_word(D, w, B.coords)
        dens.append(X.normalized().den)
    return IntegralityReport([str(w) for w in words], dens, all(d == 1 for d in dens))
