import itertools
import math

import numpy as np
import pytest

from pcinvert.core import PointCloud, chamfer_discrepancy, earth_mover_distance


def chamfer_oracle(a, b):
    """O(N^2) loop-based Chamfer, max of directed mean nearest distances."""
    def directed(src, dst):
        total = 0.0
        for p in src:
            best = math.inf
            for q in dst:
                d = math.dist(p, q)
                if d < best:
                    best = d
            total += best
        return total / len(src)

    return max(directed(a.tolist(), b.tolist()), directed(b.tolist(), a.tolist()))


def emd_oracle_enumerate(a, b):
    """All-permutation optimal matching; only feasible for tiny N."""
    n = a.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(math.dist(a[i], b[perm[i]]) for i in range(n)) / n
        best = min(best, cost)
    return best


def emd_oracle_lp(a, b):
    """LP relaxation over doubly-stochastic matrices; its optimum equals the
    assignment optimum, solved by an algorithm independent of the package's
    Hungarian path."""
    from scipy.optimize import linprog
    from scipy.sparse import lil_matrix

    n = a.shape[0]
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).reshape(-1)
    A = lil_matrix((2 * n, n * n))
    for i in range(n):
        A[i, i * n : (i + 1) * n] = 1.0
        A[n + i, i::n] = 1.0
    res = linprog(cost, A_eq=A.tocsr(), b_eq=np.ones(2 * n), bounds=(0, None), method="highs")
    assert res.success
    return res.fun / n


def test_chamfer_identity():
    cloud = PointCloud(np.random.default_rng(0).normal(size=(30, 3)))
    assert chamfer_discrepancy(cloud, cloud) == 0.0


def test_chamfer_single_pair():
    p = PointCloud([[0.0, 0.0, 0.0]])
    q = PointCloud([[1.0, 0.0, 0.0]])
    assert chamfer_discrepancy(p, q) == pytest.approx(1.0)


def test_chamfer_asymmetric_cardinality_example():
    # P->Q mean = (0+3)/2 = 1.5, Q->P = 0, max = 1.5
    p = PointCloud([[0.0, 0, 0], [3.0, 0, 0]])
    q = PointCloud([[0.0, 0, 0]])
    assert chamfer_discrepancy(p, q) == pytest.approx(1.5)
    assert chamfer_discrepancy(q, p) == pytest.approx(1.5)


def test_chamfer_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(1, 65))
        m = int(rng.integers(1, 65))
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(m, 3))
        got = chamfer_discrepancy(a, b)
        assert got == pytest.approx(chamfer_oracle(a, b), abs=1e-9)


def test_chamfer_symmetry_and_permutation_invariance_exact():
    rng = np.random.default_rng(3)
    for _ in range(25):
        a = rng.normal(size=(40, 3))
        b = rng.normal(size=(23, 3))
        base = chamfer_discrepancy(a, b)
        assert chamfer_discrepancy(b, a) == base  # bitwise symmetric
        pa = rng.permutation(40)
        pb = rng.permutation(23)
        assert chamfer_discrepancy(a[pa], b[pb]) == base


def test_chamfer_squared_variant():
    p = np.array([[0.0, 0, 0], [3.0, 0, 0]])
    q = np.array([[0.0, 0, 0]])
    # directed means of squared distances: (0+9)/2 + 0
    assert chamfer_discrepancy(p, q, variant="sum_squared") == pytest.approx(4.5)
    with pytest.raises(ValueError):
        chamfer_discrepancy(p, q, variant="bogus")


def test_chamfer_rejects_empty():
    with pytest.raises(ValueError):
        chamfer_discrepancy(np.zeros((0, 3)), np.zeros((1, 3)))


def test_emd_identity():
    cloud = np.random.default_rng(0).normal(size=(20, 3))
    assert earth_mover_distance(cloud, cloud) == pytest.approx(0.0, abs=1e-12)


def test_emd_crossing_free_matching():
    p = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    q = np.array([[1.0, 0, 0], [0.0, 0, 0]])
    assert earth_mover_distance(p, q) == pytest.approx(emd_oracle_enumerate(p, q))
    assert earth_mover_distance(p, q) == pytest.approx(0.0, abs=1e-12)


def test_emd_single_forced_matching():
    assert earth_mover_distance([[0.0, 0, 0]], [[0.0, 3, 4]]) == pytest.approx(5.0)


def test_emd_rejects_unequal_cardinality():
    with pytest.raises(ValueError):
        earth_mover_distance(np.zeros((2, 3)), np.zeros((3, 3)))


def test_emd_exact_matches_enumeration_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3))
        assert earth_mover_distance(a, b) == pytest.approx(
            emd_oracle_enumerate(a, b), abs=1e-10
        )


@pytest.mark.parametrize("n", [16, 40, 64])
def test_emd_exact_matches_lp_oracle(n):
    rng = np.random.default_rng(n)
    a = rng.normal(size=(n, 3))
    b = rng.normal(size=(n, 3)) * 1.3 + 0.2
    assert earth_mover_distance(a, b) == pytest.approx(emd_oracle_lp(a, b), rel=1e-7)


@pytest.mark.parametrize("n", [128, 256])
def test_emd_approximate_path_within_two_percent(n):
    rng = np.random.default_rng(n + 1)
    for _ in range(3):
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3)) * 1.2 + 0.1
        exact = earth_mover_distance(a, b)  # exact path (n <= 512)
        approx = earth_mover_distance(a, b, exact_max=0)  # force approximation
        assert approx >= exact - 1e-9  # approximation can never beat the optimum
        assert approx <= exact * 1.02


def test_emd_permutation_invariance_exact():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(30, 3))
    b = rng.normal(size=(30, 3))
    base = earth_mover_distance(a, b)
    for _ in range(5):
        assert earth_mover_distance(a[rng.permutation(30)], b[rng.permutation(30)]) == base


def test_emd_lower_bounded_by_directed_chamfer():
    # every matched pair costs at least the nearest-neighbor distance
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(2, 50))
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3))
        emd = earth_mover_distance(a, b)
        diff = a[:, None, :] - b[None, :, :]
        d = np.sqrt((diff * diff).sum(-1))
        directed = max(d.min(axis=1).mean(), d.min(axis=0).mean())
        assert emd >= directed - 1e-9
