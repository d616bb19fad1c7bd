import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weilint.fqm import builtin
from weilint.invariants import (
    a_d_identity,
    basis_U_N,
    dim_DNM,
    dim_fpvs,
    dim_frobenius,
    dim_hyperbolic,
    fp_space_parameters,
    fpvs_realizable,
    invariant_report,
    invariant_subspace,
    is_invariant,
    isotropic_image_rank,
    sigma0,
    slnm_orbit_count,
    span_report,
    special_invariant,
    spans_invariants,
    subgroup_type_counts,
    triviality_check,
)

EXPECTED = {
    "1": 1,
    "3^+1": 0,
    "U(2)": 2,
    "UG(2,2)": 5,
    "U(6)": 4,
    "2_II^-4": 1,
    "3^-4": 1,
    "U(4)": 3,
    "5^+2": 2,
    "3^+3": 1,
}


def float_invariant_dim(D):
    """Nullity of [T - I; S - I] in floating point."""
    n = D.size
    q = np.array([float(D.q_value(g)) for g in range(n)])
    B = np.array([[float(D.bilinear(g, h)) for h in range(n)] for g in range(n)])
    T = np.diag(np.exp(2j * np.pi * q))
    S = np.exp(-2j * np.pi * D.signature / 8) / np.sqrt(n) * np.exp(-2j * np.pi * B)
    A = np.vstack([T - np.eye(n), S - np.eye(n)])
    s = np.linalg.svd(A, compute_uv=False)
    return int(sum(s < 1e-8))


@pytest.mark.parametrize("sym,dim", sorted(EXPECTED.items()))
def test_invariant_dimensions(sym, dim):
    D = builtin(sym)
    rep = invariant_report(D)
    assert rep.dim_kernel == dim
    assert rep.agreement and rep.rational
    assert float_invariant_dim(D) == dim
    assert is_invariant(D, rep.basis)


@pytest.mark.parametrize("sym", ["2_1^+1", "3^+1 ⊕ 2_1^+1", "4_3^-1", "2_7^+1 ⊕ 9^+1", "8_5^-1"])
def test_odd_signature_has_no_invariants(sym):
    D = builtin(sym)
    assert D.signature % 2 == 1
    rep = invariant_subspace(D)
    assert rep.dim_kernel == 0 and rep.triviality == "odd_signature"
    assert float_invariant_dim(D) == 0
    with pytest.raises(ValueError):
        dim_frobenius(D)


def test_surjectivity_criterion():
    D = builtin("3^+1 ⊕ 3^+1")
    assert triviality_check(D) in ("surjectivity", "inconclusive")
    if triviality_check(D) == "surjectivity":
        assert invariant_subspace(D).dim_kernel == 0
    assert triviality_check(builtin("U(2)")) == "inconclusive"


@pytest.mark.parametrize("sym", ["U(3)", "2_II^+2", "3^+1 ⊕ 3^-1", "4_1^+1 ⊕ 4_7^+1", "9^+1 ⊕ 9^-1"])
def test_frobenius_matches_kernel(sym):
    D = builtin(sym)
    assert dim_frobenius(D) == invariant_subspace(D).dim_kernel == float_invariant_dim(D)


def test_frobenius_budget():
    with pytest.raises(ValueError):
        dim_frobenius(builtin("U(13)"))


@pytest.mark.parametrize("N", range(1, 13))
def test_sigma0_for_U_N(N):
    D = builtin(f"U({N})")
    assert invariant_subspace(D).dim_kernel == sigma0(N)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 6, 8, 12])
def test_basis_U_N(N):
    vecs = basis_U_N(N)
    assert len(vecs) == sigma0(N)
    D = builtin(f"U({N})")
    assert spans_invariants(D, [v for _, v in vecs], sigma0(N))
    assert a_d_identity(N)


@pytest.mark.parametrize("ns", [(2,), (3,), (2, 2), (4, 2), (3, 3), (6, 2)])
def test_hyperbolic_dimension(ns):
    label = "UG(" + ",".join(map(str, ns)) + ")"
    D = builtin(label)
    dim, table, mismatches = dim_hyperbolic(ns)
    assert invariant_subspace(D).dim_kernel == dim
    assert not mismatches
    assert sum(table.values()) > 0


def test_subgroup_type_counts_brute_force():
    # Z/2 + Z/2: one trivial, three of type (2, 1), one of type (2, 2)
    assert subgroup_type_counts((2, 2)) == {(1, 1): 1, (2, 1): 3, (2, 2): 1}


@pytest.mark.parametrize("N,M", [(N, M) for N in range(1, 13) for M in range(1, N + 1) if N % M == 0 and N * M <= 36])
def test_DNM_matches_subgroup_sum(N, M):
    ns = (N,) if M == 1 else (N, M)
    assert dim_DNM(N, M) == dim_hyperbolic(ns)[0]


def test_DNM_rejects_non_divisor():
    with pytest.raises(ValueError):
        dim_DNM(4, 3)


@pytest.mark.parametrize("sym", ["2_II^+2", "2_II^-2", "2_II^+4", "2_II^-4", "3^+2", "3^-2", "3^+3", "3^-4", "5^+2", "3^+1", "7^+2"])
def test_fp_space_formula(sym):
    D = builtin(sym)
    p, d, r = fp_space_parameters(D)
    assert fpvs_realizable(p, r)
    assert dim_fpvs(p, d, r) == invariant_subspace(D).dim_kernel


def test_fp_space_unrealizable_warns():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        dim_fpvs(3, 1, 3)
    assert rec


@pytest.mark.parametrize("sym", ["3^-4", "2_II^-4"])
def test_special_invariant(sym):
    D = builtin(sym)
    v = special_invariant(D)
    assert is_invariant(D, [v])
    assert spans_invariants(D, [v], 1)


def test_special_invariant_rejects_other_forms():
    with pytest.raises(ValueError):
        special_invariant(builtin("U(3)"))


def test_span_reports():
    assert span_report(builtin("UG(2,2)"))["rank"] == 5
    r = span_report(builtin("U(6)"))
    assert r["dim"] == 4 and r["spans"]
    assert isotropic_image_rank(builtin("3^+5")) == {"dim": 10, "images": 40, "rank": 10}


@pytest.mark.parametrize("n,m,count", [(1, 1, 1), (2, 1, 1), (3, 3, 2), (5, 5, 4), (4, 2, 1), (6, 3, 2)])
def test_orbit_counts(n, m, count):
    assert slnm_orbit_count(n, m) == count


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["1", "U(2)", "2_II^-2", "3^+1 ⊕ 3^-1", "U(3)", "2_II^+2"]))
def test_report_json_stable(sym):
    a = invariant_report(builtin(sym)).to_json()
    b = invariant_report(builtin(sym)).to_json()
    assert a == b
    assert list(a) == sorted(a)
