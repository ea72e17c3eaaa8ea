import math

import numpy as np
import pytest

from gait.entropy import gait_entropy
from gait.exceptions import ValidationError
from gait.infotheory import (
    DPIReport,
    JointDistribution,
    check_dpi,
    conditional_entropy,
    conditional_mutual_information,
    dpi_search,
    joint_entropy,
    markov_residual,
    mutual_information,
    random_markov_chain,
    random_pd_gram,
    tensor_apply,
)
from oracles import kron_entropy, random_pd_gram as rbf_gram, shannon, shannon_cmi, shannon_mi

# A chain X -> Y -> Z with an identity Gram on Y that breaks the processing inequality
CE_PX = np.array([0.01, 0.99])
CE_PYX = np.array([[0.95, 0.05], [0.1, 0.9]])
CE_PZY = np.array([[0.95, 0.05], [0.05, 0.95]])
CE_GRAMS = (np.array([[1.0, 0.5], [0.5, 1.0]]), np.eye(2), np.array([[1.0, 0.25], [0.25, 1.0]]))


def counterexample():
    return JointDistribution(CE_PX[:, None, None] * CE_PYX[:, :, None] * CE_PZY[None], CE_GRAMS)


def random_joint(rng, shape):
    return rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)


class TestJointDistribution:
    def test_marginal(self):
        rng = np.random.default_rng(0)
        P = random_joint(rng, (2, 3, 4))
        grams = tuple(rbf_gram(rng, n) for n in P.shape)
        m = JointDistribution(P, grams).marginal((2, 0))
        np.testing.assert_allclose(m.table, P.sum(1), atol=1e-16)
        assert m.grams[0] is not None and m.grams[0].shape == (2, 2)

    @pytest.mark.parametrize(
        "table, grams, msg",
        [
            (np.full((2, 2), 0.25), (np.eye(2),), "Gram"),
            (np.full((2, 2), 0.25), (np.eye(2), np.eye(3)), "shape"),
            (np.full((2, 2), 0.3), (np.eye(2), np.eye(2)), "sum to 1"),
            (np.array([[0.5, -0.1], [0.3, 0.3]]), (np.eye(2), np.eye(2)), "non-negative"),
        ],
    )
    def test_rejects(self, table, grams, msg):
        with pytest.raises(ValidationError, match=msg):
            JointDistribution(table, grams)


class TestTensorApply:
    def test_matches_kron(self):
        rng = np.random.default_rng(1)
        P = random_joint(rng, (3, 2, 4))
        grams = [rbf_gram(rng, n) for n in P.shape]
        G = np.kron(np.kron(grams[0], grams[1]), grams[2])
        np.testing.assert_allclose(tensor_apply(P, grams).ravel(), G @ P.ravel(), atol=1e-15)

    def test_two_way_is_KPL(self):
        rng = np.random.default_rng(2)
        P = random_joint(rng, (3, 5))
        K, L = rbf_gram(rng, 3), rbf_gram(rng, 5)
        np.testing.assert_allclose(tensor_apply(P, [K, L]), K @ P @ L.T, atol=1e-15)


class TestJointEntropy:
    def test_matches_kron_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            shape = tuple(int(n) for n in rng.integers(1, 5, size=int(rng.integers(2, 4))))
            P = random_joint(rng, shape)
            grams = tuple(rbf_gram(rng, n) for n in shape)
            assert joint_entropy(JointDistribution(P, grams)) == pytest.approx(kron_entropy(P, grams), abs=1e-12)

    def test_identity_is_shannon(self):
        P = random_joint(np.random.default_rng(4), (3, 4))
        assert joint_entropy(JointDistribution(P, (np.eye(3), np.eye(4)))) == pytest.approx(shannon(P.ravel()), abs=1e-12)

    def test_independent_additivity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
            K, L = rbf_gram(rng, 3), rbf_gram(rng, 4)
            h = joint_entropy(JointDistribution(np.outer(p, q), (K, L)))
            assert h == pytest.approx(gait_entropy(K, p) + gait_entropy(L, q), abs=1e-12)

    def test_all_ones_gram_gives_marginal(self):
        rng = np.random.default_rng(6)
        P = random_joint(rng, (4, 3))
        K = rbf_gram(rng, 4)
        h = joint_entropy(JointDistribution(P, (K, np.ones((3, 3)))))
        assert h == pytest.approx(gait_entropy(K, P.sum(1)), abs=1e-12)

    def test_monotone_in_second_gram(self):
        # J >= L >= I entrywise, and entropy falls as similarity grows
        rng = np.random.default_rng(7)
        for _ in range(200):
            P = random_joint(rng, (3, 4))
            K, L = random_pd_gram(rng, 3), random_pd_gram(rng, 4)
            hJ = joint_entropy(JointDistribution(P, (K, np.ones((4, 4)))))
            hL = joint_entropy(JointDistribution(P, (K, L)))
            hI = joint_entropy(JointDistribution(P, (K, np.eye(4))))
            assert hJ <= hL + 1e-12 and hL <= hI + 1e-12


class TestConditionalEntropy:
    def test_identity_second_gram_is_mixture(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            P = random_joint(rng, (4, 3))
            K = random_pd_gram(rng, 4)
            j = JointDistribution(P, (K, np.eye(3)))
            py = P.sum(0)
            mix = sum(py[y] * gait_entropy(K, P[:, y] / py[y]) for y in range(3))
            assert conditional_entropy(j) == pytest.approx(mix, abs=1e-12)
            assert joint_entropy(j) == pytest.approx(shannon(py) + mix, abs=1e-12)

    def test_independent(self):
        rng = np.random.default_rng(9)
        p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))
        K = rbf_gram(rng, 3)
        assert conditional_entropy(JointDistribution(np.outer(p, q), (K, np.eye(2)))) == pytest.approx(gait_entropy(K, p), abs=1e-12)

    def test_deterministic_injective(self):
        P = np.diag([0.2, 0.3, 0.5])
        assert conditional_entropy(JointDistribution(P, (np.eye(3), np.eye(3)))) == pytest.approx(0.0, abs=1e-15)

    def test_conditioning_reduces_entropy(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            P = random_joint(rng, (int(rng.integers(2, 5)), int(rng.integers(2, 5))))
            K = random_pd_gram(rng, P.shape[0])
            j = JointDistribution(P, (K, np.eye(P.shape[1])))
            assert conditional_entropy(j) <= gait_entropy(K, P.sum(1)) + 1e-10

    def test_axes_swapped(self):
        rng = np.random.default_rng(11)
        P = random_joint(rng, (3, 4))
        K, L = rbf_gram(rng, 3), rbf_gram(rng, 4)
        j = JointDistribution(P, (K, L))
        assert conditional_entropy(j, 1, 0) == pytest.approx(joint_entropy(j) - gait_entropy(K, P.sum(1)), abs=1e-14)


class TestMutualInformation:
    def test_independent_is_zero(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))
            j = JointDistribution(np.outer(p, q), (rbf_gram(rng, 4), rbf_gram(rng, 3)))
            assert abs(mutual_information(j)) < 1e-12

    @pytest.mark.parametrize("k", [2, 3, 7])
    def test_perfect_correlation(self, k):
        j = JointDistribution(np.eye(k) / k, (np.eye(k), np.eye(k)))
        assert mutual_information(j) == pytest.approx(math.log(k), abs=1e-12)

    def test_identity_grams_match_shannon(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            P = random_joint(rng, (3, 4))
            assert mutual_information(JointDistribution(P, (np.eye(3), np.eye(4)))) == pytest.approx(shannon_mi(P), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(14)
        P = random_joint(rng, (3, 4))
        K, L = rbf_gram(rng, 3), rbf_gram(rng, 4)
        assert mutual_information(JointDistribution(P, (K, L))) == pytest.approx(mutual_information(JointDistribution(P.T, (L, K))), abs=1e-14)

    def test_can_be_negative(self):
        # unlike Shannon MI, the kernel version is not bounded below by zero
        P = np.array([[0.08, 0.76], [0.001, 0.159]])
        K = np.array([[1.0, 0.27], [0.27, 1.0]])
        L = np.array([[1.0, 0.31], [0.31, 1.0]])
        j = JointDistribution(P, (K, L))
        value = mutual_information(j)
        oracle = kron_entropy(P.sum(1), [K]) + kron_entropy(P.sum(0), [L]) - kron_entropy(P, [K, L])
        assert value == pytest.approx(oracle, abs=1e-14)
        assert value < -1e-3


class TestConditionalMutualInformation:
    def test_independent_is_zero(self):
        rng = np.random.default_rng(15)
        p, q, r = (rng.dirichlet(np.ones(n)) for n in (2, 3, 4))
        P = p[:, None, None] * q[None, :, None] * r[None, None, :]
        j = JointDistribution(P, tuple(rbf_gram(rng, n) for n in (2, 3, 4)))
        assert abs(conditional_mutual_information(j)) < 1e-12

    def test_identity_grams_match_shannon(self):
        rng = np.random.default_rng(16)
        for _ in range(50):
            P = random_joint(rng, (3, 3, 3))
            j = JointDistribution(P, (np.eye(3),) * 3)
            assert conditional_mutual_information(j) == pytest.approx(shannon_cmi(P), abs=1e-12)

    def test_markov_identity_middle_is_zero(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            P = random_markov_chain(rng)
            a, b, c = P.shape
            j = JointDistribution(P, (random_pd_gram(rng, a), np.eye(b), random_pd_gram(rng, c)))
            assert abs(conditional_mutual_information(j, 0, 2, 1)) < 1e-10

    def test_chain_rule(self):
        rng = np.random.default_rng(18)
        for _ in range(200):
            P = random_joint(rng, tuple(int(n) for n in rng.integers(2, 5, size=3)))
            j = JointDistribution(P, tuple(random_pd_gram(rng, n) for n in P.shape))
            lhs = mutual_information(j, 0, (1, 2))
            rhs = mutual_information(j, 0, 2) + conditional_mutual_information(j, 0, 1, 2)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestDPI:
    def test_markov_residual(self):
        rng = np.random.default_rng(19)
        assert markov_residual(random_markov_chain(rng)) < 1e-15
        assert markov_residual(random_joint(rng, (2, 2, 2))) > 1e-3

    def test_rejects_non_markov(self):
        rng = np.random.default_rng(20)
        j = JointDistribution(random_joint(rng, (2, 2, 2)), (np.eye(2),) * 3)
        with pytest.raises(ValidationError, match="X -> Y -> Z"):
            check_dpi(j)

    def test_rejects_two_way(self):
        with pytest.raises(ValidationError, match="3-way"):
            check_dpi(JointDistribution(np.full((2, 2), 0.25), (np.eye(2),) * 2))

    def test_identity_grams_classical(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            P = random_markov_chain(rng)
            r = check_dpi(JointDistribution(P, tuple(np.eye(n) for n in P.shape)))
            assert r.lhs <= r.mi_xy + 1e-12
            assert abs(r.cmi_xz_given_y) < 1e-12

    def test_copy_of_middle(self):
        # Z = Y: both chain-rule decompositions of I[X; Y, Z] agree
        rng = np.random.default_rng(22)
        pxy = random_joint(rng, (3, 3))
        P = np.zeros((3, 3, 3))
        for y in range(3):
            P[:, y, y] = pxy[:, y]
        j = JointDistribution(P, (np.eye(3),) * 3)
        r = check_dpi(j)
        assert r.passed
        a = mutual_information(j, 0, 2) + conditional_mutual_information(j, 0, 1, 2)
        b = mutual_information(j, 0, 1) + conditional_mutual_information(j, 0, 2, 1)
        assert a == pytest.approx(b, abs=1e-12)

    def test_report(self):
        r = DPIReport(0.3, 0.2, 0.05)
        assert r.rhs == pytest.approx(0.25) and r.slack == pytest.approx(-0.05) and not r.passed

    def test_frozen_counterexample(self):
        r = check_dpi(counterexample())
        assert r.cmi_xz_given_y == pytest.approx(0.0, abs=1e-15)
        assert r.lhs == pytest.approx(1.7613674218620035e-3, rel=1e-9)
        assert r.mi_xy == pytest.approx(9.788405333753247e-4, rel=1e-9)
        assert r.slack == pytest.approx(-7.825268884866787e-4, rel=1e-9)
        assert not r.passed

    def test_counterexample_against_kron_oracle(self):
        j = counterexample()
        P = j.table
        H = lambda axes: kron_entropy(P.sum(tuple(a for a in range(3) if a not in axes)), [CE_GRAMS[a] for a in axes])
        assert check_dpi(j).lhs == pytest.approx(H((0,)) + H((2,)) - H((0, 2)), abs=1e-14)
        assert check_dpi(j).mi_xy == pytest.approx(H((0,)) + H((1,)) - H((0, 1)), abs=1e-14)

    def test_search_is_reproducible(self):
        a, b = dpi_search(300, seed=4), dpi_search(300, seed=4)
        assert a.min_slack == b.min_slack
        assert [t for t, _ in a.violations] == [t for t, _ in b.violations]

    def test_search_finds_violations(self):
        res = dpi_search(2000, seed=0)
        assert not res.passed
        t, rep = res.violations[0]
        rng = np.random.default_rng([0, t])
        P = random_markov_chain(rng)
        grams = tuple(random_pd_gram(rng, n) for n in P.shape)
        assert check_dpi(JointDistribution(P, grams)).slack == rep.slack

    def test_random_pd_gram_is_pd(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            G = random_pd_gram(rng, int(rng.integers(1, 6)))
            assert np.linalg.eigvalsh(G).min() > 0
            np.testing.assert_array_equal(np.diag(G), 1.0)
