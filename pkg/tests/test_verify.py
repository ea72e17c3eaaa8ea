import json
import math

import numpy as np
import pytest

import gait.verify as verify
from gait.entropy import gait_entropy, neg_entropy_hessian
from gait.exceptions import ValidationError
from gait.verify import (
    CounterexampleRecord,
    SearchConfig,
    concavity_segment_check,
    dirichlet,
    divergence_value,
    draw_divergence_instance,
    hessian_spectrum_search,
    parallel_lines_analytic,
    parallel_lines_check,
    random_search_divergence,
    segment_search,
    tangent_basis,
    tangent_min_eigenvalue,
)
from oracles import gait_divergence_loop, random_pd_gram, random_simplex


class TestSearchConfig:
    @pytest.mark.parametrize("kw", [{"trials": 0}, {"n_min": 1}, {"n_min": 5, "n_max": 4}, {"inject": "zeros"}])
    def test_rejects(self, kw):
        with pytest.raises(ValidationError):
            SearchConfig(**kw)


class TestHelpers:
    def test_dirichlet_on_simplex(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = dirichlet(rng, rng.uniform(0, 10, 6))
            assert p.sum() == pytest.approx(1.0, abs=1e-15) and p.min() >= 0

    def test_dirichlet_mean(self):
        rng = np.random.default_rng(1)
        alpha = np.array([1.0, 2.0, 7.0])
        draws = np.array([dirichlet(rng, alpha) for _ in range(20000)])
        np.testing.assert_allclose(draws.mean(0), alpha / alpha.sum(), atol=5e-3)

    @pytest.mark.parametrize("n", [2, 3, 8])
    def test_tangent_basis(self, n):
        B = tangent_basis(n)
        assert B.shape == (n, n - 1)
        np.testing.assert_allclose(B.T @ B, np.eye(n - 1), atol=1e-14)
        np.testing.assert_allclose(B.sum(0), 0.0, atol=1e-14)

    def test_instance_construction(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            K, p, q = draw_divergence_instance(rng)
            n = len(p)
            assert 2 <= n <= 11 and K.shape == (n, n)
            np.testing.assert_array_equal(np.diag(K), 1.0)
            assert np.array_equal(K, K.T) and K.min() >= 1 / n * 0 and K.max() <= 1.0

    def test_divergence_value_matches_loop(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            K, p, q = draw_divergence_instance(rng)
            if q.min() > 0:
                assert divergence_value(K, p, q) == pytest.approx(gait_divergence_loop(K, p, q), abs=1e-12)


class TestDivergenceSearch:
    def test_clean_run(self):
        s = random_search_divergence(SearchConfig(trials=2000, seed=1))
        assert s.passed and s.min_value >= -1e-9
        assert s.histogram.sum() == 2000 and s.histogram[0] == 0

    def test_deterministic(self):
        a = random_search_divergence(SearchConfig(trials=200, seed=5))
        b = random_search_divergence(SearchConfig(trials=200, seed=5))
        assert a.min_value == b.min_value and np.array_equal(a.histogram, b.histogram)

    def test_inject_equal(self):
        s = random_search_divergence(SearchConfig(trials=100, inject="equal"))
        assert abs(s.min_value) < 1e-15 and abs(s.max_value) < 1e-15

    def test_inject_ones(self):
        s = random_search_divergence(SearchConfig(trials=100, inject="ones"))
        assert abs(s.min_value) < 1e-14 and abs(s.max_value) < 1e-14


class TestHessianSearch:
    def test_identity(self):
        p = random_simplex(np.random.default_rng(4), 6)
        lam = tangent_min_eigenvalue(neg_entropy_hessian(np.eye(6), p))
        assert lam >= 1 / p.max() - 1e-9

    def test_all_ones(self):
        p = random_simplex(np.random.default_rng(5), 5)
        H = neg_entropy_hessian(np.ones((5, 5)), p)
        B = tangent_basis(5)
        np.testing.assert_allclose(np.linalg.eigvalsh(B.T @ H @ B), 0.0, atol=1e-12)

    def test_clean_run(self):
        s = hessian_spectrum_search(SearchConfig(trials=1000, seed=2))
        assert s.passed and s.min_value >= -1e-8


class TestSegment:
    def test_equal_endpoints(self):
        K = random_pd_gram(np.random.default_rng(6), 5)
        p = random_simplex(np.random.default_rng(7), 5)
        assert abs(concavity_segment_check(K, p, p, np.linspace(0, 1, 11))) < 1e-15

    def test_shannon(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            p, q = random_simplex(rng, 6), random_simplex(rng, 6)
            assert concavity_segment_check(np.eye(6), p, q, np.linspace(0, 1, 21)) <= 1e-10

    def test_tangent_line_is_first_order(self):
        rng = np.random.default_rng(9)
        K = random_pd_gram(rng, 4)
        p, q = random_simplex(rng, 4), random_simplex(rng, 4)
        gap = concavity_segment_check(K, p, q, [1e-4])
        assert -1e-6 < gap <= 0

    def test_clean_run(self):
        s = segment_search(SearchConfig(trials=1000, seed=3))
        assert s.passed and s.max_value <= 1e-10


class TestRecords:
    @pytest.fixture
    def loose(self, monkeypatch):
        # accept every trial as a "counterexample" to exercise the record path
        monkeypatch.setattr(verify, "DIVERGENCE_FLOOR", math.inf)
        monkeypatch.setattr(verify, "EIGEN_FLOOR", math.inf)
        monkeypatch.setattr(verify, "SEGMENT_CEIL", -math.inf)

    @pytest.mark.parametrize("search", [random_search_divergence, hessian_spectrum_search, segment_search])
    def test_records_replay_exactly(self, loose, search, tmp_path):
        out = tmp_path / "rec.jsonl"
        s = search(SearchConfig(trials=25, seed=11, out=str(out)))
        assert len(s.counterexamples) == 25
        lines = out.read_text().splitlines()
        assert len(lines) == 25
        for line, rec in zip(lines, s.counterexamples):
            loaded = CounterexampleRecord.from_json(line)
            assert loaded == rec
            assert abs(loaded.replay() - rec.value) <= 1e-15

    def test_json_is_full_precision(self):
        rec = CounterexampleRecord("divergence", 0, 0, 2, [[1.0, 0.1], [0.1, 1.0]], [1 / 3, 2 / 3], [0.1, 0.9], -1e-9 / 3)
        d = json.loads(rec.to_json())
        assert d["p"][0] == 1 / 3 and d["value"] == -1e-9 / 3

    def test_unknown_check(self):
        with pytest.raises(ValidationError):
            CounterexampleRecord("entropy", 0, 0, 1, [[1.0]], [1.0], None, 0.0).replay()

    def test_no_file_when_clean(self, tmp_path):
        out = tmp_path / "rec.jsonl"
        random_search_divergence(SearchConfig(trials=10, out=str(out)))
        assert out.read_text() == ""


class TestParallelLines:
    def test_analytic(self):
        assert parallel_lines_analytic(1.0) == pytest.approx(1.6321205588285577, abs=1e-15)
        assert parallel_lines_analytic(0.0) == 0.0

    def test_zero_offset(self):
        row = parallel_lines_check([0.0], 200)[0]
        assert abs(row["numeric"]) < 1e-6

    @pytest.mark.parametrize("phi", [0.5, 1.0])
    def test_matches_closed_form(self, phi):
        row = parallel_lines_check([phi], 2000)[0]
        assert row["abs_error"] < 5e-3
        assert row["analytic"] == parallel_lines_analytic(phi)

    @pytest.mark.parametrize("n", [100, 357, 1000])
    def test_exact_at_any_resolution(self, n):
        # a pure shift scales the cross Gram by exp(-phi^2), so the discretisation carries no error
        for row in parallel_lines_check([0.25, 1.0, 2.0], n):
            assert row["abs_error"] < 1e-12

    def test_rejects_few_atoms(self):
        with pytest.raises(ValidationError):
            parallel_lines_check([1.0], 50)
