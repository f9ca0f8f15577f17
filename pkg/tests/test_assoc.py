import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpmot.assoc import (
    SENTINEL,
    CostComponents,
    align_distance,
    appearance_matrix,
    build_cost,
    diou_matrix,
    fuse,
    second_order_matrices,
    sorted_distance_rows,
    sorted_distance_vector,
)
from dpmot.errors import UnsortedInput, ZeroVector

from conftest import brute_force_align

sorted_vec = st.lists(st.floats(0, 100, allow_nan=False), max_size=12).map(sorted)


def naive_sorted(positions, k, ref=None):
    return sorted(
        float(np.linalg.norm(np.subtract(positions[k], positions[j])))
        for j in range(len(positions))
        if j != k and (ref is None or ref[j])
    )


def naive_cosine_sorted(emb, k, ref=None):
    out = []
    for j in range(len(emb)):
        if j != k and (ref is None or ref[j]):
            a, b = emb[k], emb[j]
            out.append(1.0 - float(np.clip(np.dot(a, b) / np.linalg.norm(a) / np.linalg.norm(b), -1, 1)))
    return sorted(out)


def test_appearance_examples():
    assert appearance_matrix([[1.0, 2.0, 2.0]], [[1.0, 2.0, 2.0]])[0, 0] == pytest.approx(1.0)
    assert appearance_matrix([[1.0, 0.0]], [[0.0, 3.0]])[0, 0] == 0.0
    assert appearance_matrix([[1.0, 2.0, 2.0]], [[2.0, 1.0, 2.0]])[0, 0] == pytest.approx(8 / 9, abs=1e-15)


def test_appearance_zero_vector():
    with pytest.raises(ZeroVector):
        appearance_matrix([[0.0, 0.0]], [[1.0, 0.0]])


def test_diou_examples():
    box = [[0, 0, 10, 10]]
    assert diou_matrix(box, box, [4], [4])[0, 0] == 1.0
    assert diou_matrix(box, box, [4], [9])[0, 0] == 0.0
    assert diou_matrix(box, [[5, 0, 15, 10]], [4], [4])[0, 0] == pytest.approx(1 / 3)
    # the window is open: exactly tau_z steps apart is outside
    assert diou_matrix(box, box, [4], [7], tau_z=3)[0, 0] == 0.0
    assert diou_matrix(box, box, [4], [6], tau_z=3)[0, 0] == 1.0


def test_sorted_distance_examples():
    pts = [[0, 0, 0], [3, 0, 0], [4, 0, 0]]
    assert sorted_distance_vector(1, pts).tolist() == [1.0, 3.0]
    assert sorted_distance_rows([[1, 2, 3]]).shape == (1, 0)


def test_sorted_distance_matches_naive(rng):
    pts = rng.uniform(-50, 50, (20, 3))
    rows = sorted_distance_rows(pts)
    for k in range(20):
        assert np.allclose(rows[k], naive_sorted(pts, k), rtol=0, atol=1e-12)


def test_align_examples():
    assert align_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert align_distance([2, 3], [0.5, 1.9, 3.1, 4]) == pytest.approx(0.2)
    assert align_distance([1, 2, 3], [1]) == 0.0
    assert align_distance([], [1, 2]) == 0.0
    assert align_distance([1, 2], []) == 0.0


def test_align_tie_takes_smaller_index():
    # 2 is equally near 1 and 3: aligning at 1 gives |2-1| + |5-3| = 3
    assert align_distance([2, 5], [1, 3]) == 3.0


def test_align_rejects_unsorted():
    with pytest.raises(UnsortedInput):
        align_distance([3, 1], [1, 2])
    with pytest.raises(UnsortedInput):
        align_distance([1, 2], [2, 1])


@given(sorted_vec)
def test_align_self_is_zero(d):
    assert align_distance(d, d) == 0.0


@given(sorted_vec, sorted_vec)
def test_align_equals_brute_force(a, b):
    assert align_distance(a, b) == brute_force_align(a, b)


def test_align_equals_brute_force_integer_ties(rng):
    # small integer grids make ties on the nearest element common
    for _ in range(2000):
        a = np.sort(rng.integers(0, 6, rng.integers(0, 6))).astype(float)
        b = np.sort(rng.integers(0, 6, rng.integers(0, 6))).astype(float)
        assert align_distance(a, b) == brute_force_align(a, b)


def test_second_order_single_objects():
    pd, pa = second_order_matrices([[1, 2, 3]], [[4, 5, 6]], [[1.0, 0]], [[0, 1.0]])
    assert pd.tolist() == [[0.0]] and pa.tolist() == [[0.0]]


def test_second_order_identical_geometry(rng):
    pts = rng.uniform(0, 100, (5, 3))
    pd, _ = second_order_matrices(pts, pts)
    assert np.all(np.diag(pd) == 0.0)


def test_second_order_without_embeddings_is_zero(rng):
    _, pa = second_order_matrices(rng.random((3, 3)), rng.random((4, 3)))
    assert not pa.any()


@pytest.mark.parametrize("seed", range(5))
def test_second_order_matches_naive(seed):
    rng = np.random.default_rng(seed)
    tp, dp = rng.uniform(0, 300, (6, 3)), rng.uniform(0, 300, (7, 3))
    te, de = rng.standard_normal((6, 16)), rng.standard_normal((7, 16))
    ref = rng.random(6) < 0.7
    pd, pa = second_order_matrices(tp, dp, te, de, track_ref=ref)
    for i in range(6):
        for j in range(7):
            assert pd[i, j] == pytest.approx(brute_force_align(naive_sorted(tp, i, ref), naive_sorted(dp, j)), abs=1e-9)
            assert pa[i, j] == pytest.approx(
                brute_force_align(naive_cosine_sorted(te, i, ref), naive_cosine_sorted(de, j)), abs=1e-9
            )


def _components(rng, nt=4, no=5):
    return CostComponents(
        rng.uniform(-1, 1, (nt, no)),
        rng.uniform(0, 1, (nt, no)),
        rng.uniform(0, 300, (nt, no)),
        rng.uniform(0, 2, (nt, no)),
    )


def test_fuse_perfect_match_is_zero():
    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    assert fuse(CostComponents(one, one, zero, zero)).C[0, 0] == 0.0


def test_fuse_weight_collapse(rng):
    comp = _components(rng)
    out = fuse(comp, alpha=1.0, beta=0.0, tau_gate=10.0)
    first = (1 - comp.C_a) / 2 + (1 - comp.C_diou)
    hard = (comp.C_diou == 0) & ((1 - comp.C_a) / 2 > 0.8)
    assert np.allclose(out.C[~hard], first[~hard])


def test_fuse_formula_and_gates():
    comp = CostComponents(np.array([[0.5, -0.9]]), np.array([[0.4, 0.0]]), np.array([[100.0, 0.0]]), np.array([[0.5, 0.0]]))
    out = fuse(comp, 0.6, 0.4, tau_gate=1.5)
    expect = 0.6 * (0.25 + 0.6) + 0.4 * 2 * (1 - np.exp(-1))
    assert out.C[0, 0] == pytest.approx(expect)
    # cost_a = 0.95 > 0.8 and no overlap: hard gate despite C < tau_gate
    assert out.gate_mask[0, 1] and out.C[0, 1] == SENTINEL
    assert fuse(comp, 0.6, 0.4, tau_gate=0.5).C[0, 0] == SENTINEL


def test_fuse_range(rng):
    for _ in range(50):
        out = fuse(_components(rng), tau_gate=10.0)
        live = out.C[~out.gate_mask]
        assert np.all((live >= 0) & (live <= 2.0 + 1e-12))


@given(st.integers(0, 3), st.floats(0.0, 1.0))
def test_fuse_monotone(which, bump):
    rng = np.random.default_rng(which)
    comp = _components(rng)
    base = fuse(comp, tau_gate=100.0).C
    fields = ["C_a", "C_diou", "C_Pd", "C_Pa"]
    worse = {f: getattr(comp, f).copy() for f in fields}
    # a higher cost means lower similarity or higher distance
    if fields[which] in ("C_a", "C_diou"):
        worse[fields[which]] = np.maximum(worse[fields[which]] - bump, -1.0 if which == 0 else 0.0)
    else:
        worse[fields[which]] = worse[fields[which]] + bump * 100
    assert np.all(fuse(CostComponents(**worse), tau_gate=100.0).C >= base)


def _scene(rng, nt=5, no=6):
    tl = rng.uniform(0, 500, (nt, 2))
    tb = np.hstack([tl, tl + rng.uniform(20, 80, (nt, 2))])
    dl = tl[rng.integers(0, nt, no)] + rng.normal(0, 5, (no, 2))
    db = np.hstack([dl, dl + rng.uniform(20, 80, (no, 2))])
    tz, dz = rng.integers(0, 10, nt).astype(float), rng.integers(0, 10, no).astype(float)
    tp = np.c_[tb[:, :2] + 20, tz * 10]
    dp = np.c_[db[:, :2] + 20, dz * 10]
    te, de = rng.standard_normal((nt, 8)), rng.standard_normal((no, 8))
    return tb, db, tz, dz, tp, dp, te, de


def test_permutation_equivariance(rng):
    tb, db, tz, dz, tp, dp, te, de = _scene(rng)
    perm = rng.permutation(len(db))
    c1, f1 = build_cost(tb, db, tz, dz, tp, dp, te, de)
    c2, f2 = build_cost(tb, db[perm], tz, dz[perm], tp, dp[perm], te, de[perm])
    for name in ("C_a", "C_diou", "C_Pd", "C_Pa"):
        assert np.allclose(getattr(c1, name)[:, perm], getattr(c2, name), atol=1e-12)
    assert np.allclose(f1.C[:, perm], f2.C, atol=1e-12)


def test_embedding_scale_invariance(rng):
    from dpmot.assign import solve

    tb, db, tz, dz, tp, dp, te, de = _scene(rng)
    c1, f1 = build_cost(tb, db, tz, dz, tp, dp, te, de)
    c2, f2 = build_cost(tb, db, tz, dz, tp, dp, te * 7.5, de * 0.01)
    assert np.allclose(c1.C_a, c2.C_a, atol=1e-12)
    assert np.array_equal(f1.gate_mask, f2.gate_mask)
    assert [m[:2] for m in solve(f1.C).matches] == [m[:2] for m in solve(f2.C).matches]


def test_build_cost_first_order_skips_second_order(rng):
    tb, db, tz, dz, tp, dp, te, de = _scene(rng)
    comp, _ = build_cost(tb, db, tz, dz, tp, dp, te, de, alpha=1.0, beta=0.0, second_order=False)
    assert not comp.C_Pd.any() and not comp.C_Pa.any()


def test_build_cost_empty_sides():
    comp, fused = build_cost(np.zeros((0, 4)), [[0, 0, 1, 1]], [], [1], np.zeros((0, 3)), [[0, 0, 0]])
    assert fused.C.shape == (0, 1)
