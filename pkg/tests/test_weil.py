from fractions import Fraction
from math import gcd

import numpy as np
import pytest
from conftest import to_complex
from hypothesis import given, settings, strategies as st

from weilint.exactnum import CycArray, CycNumber, e_frac
from weilint.fqm import (
    DiscForm,
    builtin,
    classify,
    enumerate_subgroups,
    orthogonal_complement,
    quasi_isotropic_subgroups,
    xi_l_H,
)
from weilint.weil import (
    _apply_S0_axis,
    _apply_S0_dense,
    BContext,
    MpWord,
    a_basis,
    a_vector,
    a_vector_sym,
    apply_word,
    arrow_matrix,
    check_relations,
    check_a_vector_action,
    chi,
    cyclic_decomposition,
    expansion_oracles,
    gamma_odd_decompose,
    lift_sl2,
    matrix_to_word,
    milgram_twisted,
    predicted_action,
    random_word,
    rho_word,
    sl2_classes,
    sl2_elements,
)

SMALL = ["3^+1", "2_1^+1", "2_II^-2", "4_3^-1", "U(2)", "2_1^+1 ⊕ 2_1^+1", "5^-1 ⊕ 3^+1", "8_1^+1"]


def float_rho(D, w):
    """Float matrices built directly from the defining formulas."""
    n = D.size
    sgn = D.signature
    q = np.array([float(D.q_value(g)) for g in range(n)])
    B = np.array([[float(D.bilinear(g, h)) for h in range(n)] for g in range(n)])
    T = np.diag(np.exp(2j * np.pi * q))
    S = np.exp(-2j * np.pi * sgn / 8) / np.sqrt(n) * np.exp(-2j * np.pi * B)
    Z = np.zeros((n, n), dtype=complex)
    for g in range(n):
        Z[D.neg[g], g] = np.exp(-2j * np.pi * sgn / 4)
    gens = {"T": T, "T^-1": np.linalg.inv(T), "S": S, "S^-1": np.linalg.inv(S), "Z": Z}
    out = np.eye(n, dtype=complex)
    for x in w.letters:
        out = out @ gens[x]
    return out


def to_float_matrix(arr):
    nums = arr.to_numbers()
    return np.array([[to_complex(z) for z in row] for row in nums])


@pytest.mark.parametrize("sym", SMALL)
def test_relations(sym):
    assert all(check_relations(builtin(sym)).values())


@pytest.mark.parametrize("sym", SMALL)
def test_unitary_and_float_oracle(sym):
    D = builtin(sym)
    rng = np.random.default_rng(5)
    for _ in range(5):
        w = random_word(rng, 6)
        R = rho_word(D, w)
        assert R.is_unitary()
        assert np.allclose(to_float_matrix(R.mat), float_rho(D, w), atol=1e-9)


def test_word_parse_and_inverse():
    w = MpWord.parse("S T^-1 Z S^-1")
    assert str(w) == "S T^-1 Z S^-1"
    D = builtin("3^+1 ⊕ 4_3^-1")
    I = CycArray.identity(D.size, D.conductor)
    assert apply_word(D, w * w.inverse(), I) == I
    with pytest.raises(ValueError):
        MpWord.parse("S Q")


def test_matrix_to_word_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = random_word(rng, 15)
        m = w.matrix
        assert matrix_to_word(m).matrix == m
    with pytest.raises(ValueError):
        matrix_to_word(((2, 0), (0, 1)))


def test_lift_sl2_and_group_order():
    for N in (2, 3, 4, 5, 6):
        els = sl2_elements(N)
        order = N ** 3
        for p in {2, 3, 5} & {p for p in (2, 3, 5) if N % p == 0}:
            order = order * (p * p - 1) // (p * p)
        assert len(els) == order
        assert sum(size for _, size in sl2_classes(N)) == order
        for m in els[:20]:
            (a, b), (c, d) = lift_sl2(m, N)
            assert a * d - b * c == 1
            assert [[x % N for x in r] for r in ((a, b), (c, d))] == [[x % N for x in r] for r in m]


def test_chi_is_character_on_gamma_odd():
    """chi(w) is independent of the word representing a Gamma_odd element up to the centre."""
    D = builtin("3^+1")
    rng = np.random.default_rng(3)
    for _ in range(30):
        w = random_word(rng, 8)
        rep, j = gamma_odd_decompose(w)
        assert rep in ("1", "T", "ST")
        assert 0 <= j < 8
        assert chi(D, w) ** 8 == CycNumber.from_rational(1, D.conductor)


@pytest.mark.parametrize("sym", ["2_1^+1 ⊕ 2_1^+1", "27^+1", "U(2)", "3^+1 ⊕ 3^-1", "4_3^-1", "2_II^-2"])
def test_a_vector_action_all_subgroups(sym):
    D = builtin(sym)
    pairs = [(e, la) for e in range(D.size) for la in range(D.size)]
    if len(pairs) > 256:
        rng = np.random.default_rng(4)
        pairs = [pairs[i] for i in rng.choice(len(pairs), 256, replace=False)]
    for H in enumerate_subgroups(D):
        ls = [1, 2, 3] if classify(H) != "generic" else [D.level]
        for l in ls:
            try:
                xi_l_H(H, l)
            except ValueError:
                continue
            for e, la in pairs:
                assert check_a_vector_action(H, e, la, l)


@pytest.mark.parametrize("sym", ["2_1^+1 ⊕ 2_1^+1", "27^+1", "3^+1", "4_3^-1", "9^+1 ⊕ 3^-1"])
def test_twisted_milgram(sym):
    D = builtin(sym)
    n = 0
    for H in quasi_isotropic_subgroups(D):
        perp = orthogonal_complement(H)
        A = perp.order // H.order
        for l in range(1, 13):
            if gcd(l, A) == 1:
                direct, closed = milgram_twisted(H, l)
                assert direct == closed
                n += 1
    assert n > 0


def test_twisted_milgram_rejects_bad_l():
    D = builtin("3^+1")
    H = D.trivial_subgroup
    with pytest.raises(ValueError):
        milgram_twisted(H, 3)


@pytest.mark.parametrize("sym", ["27^+1", "2_1^+1 ⊕ 2_1^+1", "3^+1 ⊕ 3^-1", "9^+1 ⊕ 3^-1"])
def test_expansion_identities(sym):
    D = builtin(sym)
    rng = np.random.default_rng(7)
    subs = enumerate_subgroups(D)
    n = 0
    for H in subs:
        for K in subs:
            if not H <= K:
                continue
            for l in (1, 2, 3, 5):
                try:
                    xi_l_H(H, l)
                except ValueError:
                    continue
                e = int(rng.integers(D.size))
                la = int(rng.integers(D.size))
                for _, lhs, rhs in expansion_oracles(H, K, l, e, la):
                    assert lhs == rhs
                n += 1
    assert n > 0


@pytest.mark.parametrize("sym", ["U(2)", "2_1^+1 ⊕ 2_1^+1", "2_II^-2", "U(3)", "2_1^+1 ⊕ 2_7^+1"])
def test_a_vector_action_random_words(sym):
    D = builtin(sym)
    rng = np.random.default_rng(11)
    selfdual = [H for H in quasi_isotropic_subgroups(D) if orthogonal_complement(H) == H]
    assert selfdual
    for H in selfdual:
        for _ in range(15):
            w = random_word(rng)
            e = int(rng.integers(D.size))
            la = int(rng.integers(D.size))
            predicted_action(w, a_vector(H, e, la))
            for sg in (1, -1):
                v = a_vector_sym(H, e, la, sg)
                if not v.zero:
                    predicted_action(w, v)


def test_a_basis_is_orthonormal():
    D = builtin("3^+1 ⊕ 3^-1 ⊕ 3^+1")
    H = next(H for H in quasi_isotropic_subgroups(D) if H.order == 3)
    vs = a_basis(H)
    assert len(vs) == D.size
    one = CycNumber.from_rational(1, D.conductor)
    zero = CycNumber.zero(D.conductor)
    for i, v in enumerate(vs):
        for j, u in enumerate(vs):
            assert u.coords.inner(v.coords) == (one if i == j else zero)


def test_arrow_intertwines():
    D = builtin("3^+1 ⊕ 3^-1 ⊕ 5^+1")
    J = next(H for H in enumerate_subgroups(D) if H.order == 3 and classify(H) == "isotropic")
    mat, sq = arrow_matrix(J)
    A = sq.form
    rng = np.random.default_rng(1)
    for _ in range(5):
        w = random_word(rng, 6)
        lhs = apply_word(D, w, mat)
        rhs = mat @ apply_word(A, w, CycArray.identity(A.size, A.conductor)).embed(mat.conductor)
        assert lhs == rhs


def b_pairs(D):
    out = []
    for H in quasi_isotropic_subgroups(D):
        A = orthogonal_complement(H).order // H.order
        if A == 1:
            continue
        for J in enumerate_subgroups(D, lambda G: G <= H):
            if J.order in (2, 3, 5, 7) and classify(J) == "isotropic" and A % J.order == 0:
                try:
                    out.append(BContext(H, J))
                except ValueError:
                    pass
    return out


@pytest.mark.parametrize("sym", ["27^+1", "8_1^+1", "2_II^+2 ⊕ 2_1^+1", "9^+1 ⊕ 3^-1", "8_3^-1 ⊕ 2_1^+1", "3^+1 ⊕ 3^-1 ⊕ 3^+1"])
def test_b_vector_action_and_epsilon(sym):
    D = builtin(sym)
    rng = np.random.default_rng(2)
    ctxs = b_pairs(D)
    assert ctxs
    one = CycNumber.from_rational(1, D.conductor)
    n = 0
    for base in ctxs:
        for ren in (False, True):
            ctx = BContext(base.H, base.J, renormalize=ren)
            for _ in range(10):
                e = int(rng.integers(D.size))
                la = int(rng.integers(D.size))
                if ctx.in_Jperp2(e, la):
                    continue
                w = random_word(rng, 10)
                predicted_action(w, ctx.vector(e, la), ctx)
                eps, _, _ = ctx.epsilon(w, e, la)
                assert eps ** 8 == one
                if ctx.renormalize:
                    assert eps ** 4 == one
                n += 1
    assert n > 0


def test_b_vector_rejects_bad_pair():
    D = builtin("27^+1")
    H = D.subgroup([(9,)])
    with pytest.raises(ValueError):
        BContext(H, D.subgroup([(3,)]))


def test_literal_T_formula_fails_for_two_adic_quarter_values():
    """For p = 2 the naive xi shift breaks down; the corrected formula holds."""
    D = builtin("8_1^+1")
    H = D.subgroup([(4,)])
    ctx = BContext(H, H)
    bad = 0
    for e in range(D.size):
        for la in range(D.size):
            if ctx.in_Jperp2(e, la):
                continue
            sc, e2, l2 = ctx.T_image(e, la)
            img = apply_word(D, "T", ctx.coords(e, la))
            assert img == ctx.coords(e2, l2).scale(sc)
            lsc, le, ll = ctx.literal_T_image(e, la)
            if img != ctx.coords(le, ll).scale(lsc):
                bad += 1
    assert bad > 0


def test_b_vectors_on_cyclic_27():
    D = DiscForm([27], [Fraction(1, 27)])
    H = D.subgroup([(9,)])
    ctx = BContext(H, H)
    assert ctx.check_T_expression(1, 1)
    for w in ("S", "T S T^-1", "Z S", "S^-1 T T"):
        predicted_action(w, ctx.vector(1, 1), ctx)


@pytest.mark.parametrize("N", [3, 4, 5, 8, 9, 12])
def test_cyclic_decomposition(N):
    D = DiscForm([N], [Fraction(1, N) if N % 2 else Fraction(1, 2 * N)])
    comps = cyclic_decomposition(D, frobenius=D.signature % 2 == 0)
    assert sum(len(c["basis"]) for c in comps) == N
    for c in comps:
        if "character_norm" in c:
            assert c["character_norm"] == 1


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from(["T", "T^-1", "S", "S^-1", "Z"]), max_size=8))
def test_word_matrix_homomorphism(letters):
    w = MpWord(letters)
    D = builtin("3^-1 ⊕ 2_1^+1")
    I = CycArray.identity(D.size, D.conductor)
    u = MpWord(["S", "T"])
    assert apply_word(D, u * w, I) == apply_word(D, u, apply_word(D, w, I))
    assert (u * w).matrix == tuple(tuple(int(x) for x in r) for r in np.array(u.matrix) @ np.array(w.matrix))


def test_e_frac_periodicity():
    M = 24
    assert e_frac(Fraction(1, 8), M) ** 8 == CycNumber.from_rational(1, M)


@pytest.mark.parametrize("sym", ["3^+1", "2_II^-2", "U(4)", "8_1^+1 ⊕ 3^-1", "4_3^-1 ⊕ 4_1^+1", "9^+1 ⊕ 3^+1 ⊕ 3^-1", "UG(2,2)"])
@pytest.mark.parametrize("sign", [1, -1])
def test_S_routes_agree(sym, sign):
    D = builtin(sym)
    rng = np.random.default_rng(D.size)
    M = D.conductor
    V = CycArray.from_numbers(
        [[CycNumber.root(int(rng.integers(M)), M) * int(rng.integers(-3, 4)) for _ in range(3)]
         for _ in range(D.size)], M)
    assert _apply_S0_axis(D, V, sign) == _apply_S0_dense(D, V, sign)
    v = CycArray.from_numbers([CycNumber.root(int(rng.integers(M)), M) for _ in range(D.size)], M)
    assert _apply_S0_axis(D, v, sign) == _apply_S0_dense(D, v, sign)
