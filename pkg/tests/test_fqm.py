import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weilint.exactnum import CycNumber, sqrt_nat
from weilint.fqm import (
    DiscForm,
    FormError,
    builtin,
    classify,
    corpus_symbols,
    enumerate_subgroups,
    isotropic_lines,
    isotropic_subgroups,
    jordan_block_symbols,
    lift_complement,
    maximal_quasi_isotropic,
    orthogonal_complement,
    product_index_map,
    quotient_form,
    sylow_decompose,
    symbol_signature,
    xi_H,
    xi_l_H,
)

SMALL = ["2_1^+1", "2_II^-2", "4_3^-1", "3^+1", "3^-1", "9^+1", "5^-2", "U(2)", "U(6)", "UG(2,2)",
         "2_1^+1 ⊕ 3^-1", "8_1^+1", "2_1^+1 ⊕ 2_1^+1 ⊕ 2_1^+1"]


def test_builtin_orders_and_levels():
    D = builtin("2_1^+1")
    assert (D.size, D.level, D.signature) == (2, 4, 1)
    D = builtin("U(6)")
    assert (D.size, D.level, D.signature) == (36, 6, 0)
    assert builtin("2_II^-2").signature == 4
    assert builtin("trivial").size == 1


def test_direct_sum_label_and_size():
    D = builtin("2_1^+1 ⊕ 3^-1")
    assert D.size == 6 and D.label == "2_1^+1 ⊕ 3^-1"
    assert D.signature == (1 + symbol_signature("3^-1")) % 8


@pytest.mark.parametrize("bad", ["7^+1 x", "6^+1", "2_II^+1", "", "U(0)x"])
def test_bad_symbols_raise(bad):
    with pytest.raises(FormError):
        builtin(bad)


def test_degenerate_form_rejected():
    with pytest.raises(FormError):
        DiscForm([2], [Fraction(1, 2)])  # b(x, x) = 0 on Z/2


def test_milgram_brute_force():
    # Gauss sum by floating point against e(sgn/8) sqrt|D|
    import cmath

    for s in SMALL:
        D = builtin(s)
        g = sum(cmath.exp(2j * cmath.pi * D.q_value(i)) for i in range(D.size))
        want = cmath.exp(2j * cmath.pi * D.signature / 8) * D.size ** 0.5
        assert abs(g - want) < 1e-8
        M = D.conductor
        assert D.gauss_sum == CycNumber.root(D.signature * M // 8, M) * sqrt_nat(D.size, M)


def test_signature_matches_symbol_on_blocks():
    for s in jordan_block_symbols(32):
        assert builtin(s).signature == symbol_signature(s), s


def test_corpus_shape():
    syms = corpus_symbols()
    assert len(syms) == len(set(syms)) == 890
    assert "U(12)" in syms and "UG(4,4)" in syms and "trivial" in syms
    assert all(builtin(s).size <= 256 for s in syms[:5])


def test_corpus_longer_sums():
    base = corpus_symbols()
    ext = corpus_symbols(max_blocks=6)
    assert set(base) < set(ext) and len(ext) == 2867
    longer = [s for s in ext if s.count("⊕") >= 2]
    assert max(s.count("⊕") for s in longer) == 4
    for s in longer[::97]:
        assert builtin(s).size <= 48


def _brute_subgroup_count(D):
    subs = set()
    for r in range(0, 5):
        for gens in itertools.combinations(range(D.size), r):
            subs.add(D.subgroup(list(gens)).elements)
    return len(subs)


@pytest.mark.parametrize("s,count", [("2_1^+1 ⊕ 2_1^+1", 5), ("U(2)", 5), ("UG(2,2)", 67), ("9^+1", 3), ("3^+1 ⊕ 3^+1", 6)])
def test_subgroup_counts(s, count):
    D = builtin(s)
    assert len(enumerate_subgroups(D)) == count == _brute_subgroup_count(D)


@pytest.mark.parametrize("s", SMALL)
def test_orthogonal_complement_properties(s):
    D = builtin(s)
    for H in enumerate_subgroups(D):
        P = orthogonal_complement(H)
        assert P.order * H.order == D.size
        assert not D.bil[np.ix_(P.elements, H.elements)].any()
        assert orthogonal_complement(P) == H


@pytest.mark.parametrize("s", SMALL)
def test_xi_linearises_q(s):
    D = builtin(s)
    for H in enumerate_subgroups(D, lambda G: classify(G) != "generic"):
        xi = xi_H(H)
        for h in H.elements:
            assert D.q_value(h) == D.bilinear(h, xi) % 1
        for l in (2, 3):
            xl = xi_l_H(H, l)
            for h in H.elements:
                assert (l * D.q_value(h)) % 1 == D.bilinear(h, xl)


@pytest.mark.parametrize("s", SMALL)
def test_quotient_forms(s):
    D = builtin(s)
    for H in isotropic_subgroups(D):
        sq = quotient_form(H)
        A = sq.form
        assert A.size * H.order ** 2 == D.size
        assert A.signature == D.signature
        for a in range(A.size):
            assert A.q_value(a) == D.q_value(int(sq.section[a]))


def test_isotropic_quotient_rejects_non_isotropic():
    D = builtin("2_1^+1")
    with pytest.raises(ValueError):
        quotient_form(D.whole)


def test_lift_complement_xi():
    D = builtin("2_1^+1 ⊕ 2_1^+1 ⊕ 2_1^+1")
    for H in enumerate_subgroups(D, lambda G: classify(G) == "quasi_isotropic"):
        try:
            Ht, xi = lift_complement(H)
        except ValueError:
            continue
        assert Ht.order * 2 == orthogonal_complement(H).order
        assert D.mul(2, D.index(xi)) in H


@pytest.mark.parametrize("s", ["U(6)", "2_1^+1 ⊕ 3^-1 ⊕ 5^+1", "UG(2,6)"])
def test_sylow_decompose(s):
    D = builtin(s)
    parts = sylow_decompose(D)
    idx = product_index_map(D, parts)
    assert sorted(idx.tolist()) == list(range(D.size))
    q = sum(p.form.signature for p in parts) % 8
    assert q == D.signature


def test_maximal_quasi_isotropic_is_maximal():
    for s in SMALL:
        D = builtin(s)
        H = maximal_quasi_isotropic(D)
        assert classify(H) != "generic"
        for x in range(D.size):
            if x in H:
                continue
            bigger = H.join(D.subgroup([x]))
            assert classify(bigger) == "generic"


def test_isotropic_lines_sorted():
    D = builtin("U(2)")
    lines = isotropic_lines(D.whole, 2)
    assert [L.elements for L in lines] == sorted(L.elements for L in lines)
    assert all(L.order == 2 and classify(L) == "isotropic" for L in lines)


@given(st.sampled_from(SMALL))
@settings(max_examples=15, deadline=None)
def test_json_roundtrip(s):
    D = builtin(s)
    E = DiscForm.from_json(json.loads(json.dumps(D.to_json())))
    assert E == D and E.signature == D.signature


@given(st.sampled_from(SMALL), st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_bilinear_is_polarisation(s, a, b):
    D = builtin(s)
    g, h = a % D.size, b % D.size
    assert D.bilinear(g, h) == (D.q_value(D.add(g, h)) - D.q_value(g) - D.q_value(h)) % 1
    assert D.q_value(D.neg[g]) == D.q_value(g)
