import math

import numpy as np
import pytest

from noisy_gt.designs import (
    ProblemParams,
    TestMatrix,
    design_stats,
    from_columns,
    gen_bernoulli,
    gen_near_constant,
    generate,
    round_delta,
    sample_defectives,
    touched_tests,
)

LN2 = math.log(2)


class TestParams:
    def test_nu_must_be_positive(self):
        with pytest.raises(ValueError):
            ProblemParams(p=10, k=5, n=8, nu=0.0)

    def test_bern_density_cap(self):
        with pytest.raises(ValueError):
            ProblemParams(p=10, k=2, n=8, nu=3.0, design="bern")

    def test_nc_delta_at_least_one(self):
        with pytest.raises(ValueError):
            ProblemParams(p=100, k=50, n=10, nu=1.0, design="nc")
        assert ProblemParams(p=100, k=50, n=40, nu=1.0, design="nc").delta == 1

    def test_k_range(self):
        with pytest.raises(ValueError):
            ProblemParams(p=5, k=5, n=8, nu=1.0)

    def test_delta_rounding(self):
        assert round_delta(LN2, 8656, 200) == 30
        assert round_delta(0.1, 10, 5) == 1
        assert ProblemParams(p=10, k=2, n=9, nu=0.5, design="nc").delta == 2

    def test_theta_hat(self):
        assert ProblemParams(p=100, k=10, n=8, nu=1.0).theta_hat == pytest.approx(0.5)


class TestBernoulli:
    def test_mean_column_weight(self):
        weights = []
        for s in range(200):
            X = gen_bernoulli(ProblemParams(p=11, k=10, n=1000, nu=1.0, seed=s), items=[0])
            weights.append(X.column_weight(0))
        assert np.mean(weights) == pytest.approx(100, rel=0.03)

    def test_deterministic(self):
        pr = ProblemParams(p=30, k=3, n=50, nu=0.7, seed=9)
        assert gen_bernoulli(pr).dumps() == gen_bernoulli(pr).dumps()

    def test_seed_changes_matrix(self):
        a = gen_bernoulli(ProblemParams(p=30, k=3, n=50, nu=0.7, seed=1))
        b = gen_bernoulli(ProblemParams(p=30, k=3, n=50, nu=0.7, seed=2))
        assert a.dumps() != b.dumps()

    def test_subset_generation_matches_full(self):
        pr = ProblemParams(p=40, k=4, n=60, nu=0.9, seed=4)
        full = gen_bernoulli(pr)
        part = gen_bernoulli(pr, items=[3, 17, 39])
        for j in (3, 17, 39):
            assert np.array_equal(full.columns[j], part.columns[j])
        assert part.columns[0].size == 0

    def test_total_ones_within_four_sigma(self):
        p, k, n, nu = 200, 10, 300, 0.8
        q = nu / k
        mean, sd = n * p * q, math.sqrt(n * p * q * (1 - q))
        for s in range(20):
            X = gen_bernoulli(ProblemParams(p=p, k=k, n=n, nu=nu, seed=s))
            assert abs(int(X.dense().sum()) - mean) < 4 * sd

    def test_no_repeats(self):
        X = gen_bernoulli(ProblemParams(p=30, k=3, n=40, nu=1.0, seed=0))
        for c, s in zip(X.columns, X.supports):
            assert len(c) == len(s)


class TestNearConstant:
    def test_delta_one_gives_weight_one(self):
        X = gen_near_constant(ProblemParams(p=50, k=20, n=20, nu=1.0, design="nc", seed=3))
        assert X.columns[0].size == 1
        assert all(X.column_weight(j) == 1 for j in range(50))

    def test_multiset_sizes(self):
        pr = ProblemParams(p=60, k=5, n=40, nu=0.9, design="nc", seed=1)
        X = gen_near_constant(pr)
        assert sum(len(c) for c in X.columns) == 60 * pr.delta
        assert all(X.column_weight(j) <= pr.delta for j in range(60))

    def test_repeat_fraction_birthday(self):
        n, delta, p = 10**4, 30, 100
        expected = 1 - math.exp(-delta * (delta - 1) / (2 * n))
        fracs = []
        for s in range(100):
            pr = ProblemParams(p=400, k=int(round(n / delta)), n=n, nu=1.0, design="nc", seed=s)
            assert pr.delta == delta
            X = gen_near_constant(pr, items=range(p))
            fracs.append(np.mean([len(X.columns[j]) != len(X.supports[j]) for j in range(p)]))
        sigma = math.sqrt(expected * (1 - expected) / (100 * p))
        assert abs(np.mean(fracs) - expected) < 3 * sigma

    def test_deterministic(self):
        pr = ProblemParams(p=30, k=3, n=50, nu=0.7, design="nc", seed=2)
        assert gen_near_constant(pr).dumps() == gen_near_constant(pr).dumps()

    def test_wrong_design(self):
        with pytest.raises(ValueError):
            gen_near_constant(ProblemParams(p=30, k=3, n=50, nu=0.7, design="bern"))
        with pytest.raises(ValueError):
            gen_bernoulli(ProblemParams(p=30, k=3, n=50, nu=0.7, design="nc"))


class TestMatrixViews:
    def test_dump_roundtrip(self):
        X = generate(ProblemParams(p=12, k=2, n=15, nu=1.2, design="nc", seed=5))
        text = X.dumps()
        assert text.splitlines()[0] == f"15 12 nc {1.2!r} 5"
        Y = TestMatrix.loads(text)
        assert Y.dumps() == text
        assert np.array_equal(Y.dense(), X.dense())

    def test_rows_dedup(self):
        X = from_columns(4, [[0, 0, 2], [2, 3], []])
        assert X.rows == ((0,), (), (0, 1), (1,))
        assert X.masks == (0b101, 0b1100, 0)

    def test_placement_counts_keep_multiplicity(self):
        X = from_columns(4, [[0, 0, 2], [2, 3]])
        assert X.placement_counts([0, 1]).tolist() == [2, 0, 2, 1]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            from_columns(3, [[0, 5]])

    def test_touched_tests(self):
        X = from_columns(5, [[0, 1], [1, 2], [4]])
        assert touched_tests(X, [0, 1]) == 3


class TestDesignStats:
    def test_empty_set(self):
        X = generate(ProblemParams(p=10, k=2, n=12, nu=1.0, seed=0))
        assert design_stats(X, []) == {"N0": 12, "degree1": 0, "repeat_defectives": 0}

    def test_hand_instance(self):
        X = from_columns(5, [[0, 0, 1], [1, 2], [3]])
        st = design_stats(X, [0, 1])
        assert st == {"N0": 2, "degree1": 1, "repeat_defectives": 1}

    def test_nc_degree1_and_N0_means(self):
        nu, k, delta = LN2, 200, 30
        n = int(round(delta * k / nu))
        deg1, n0 = [], []
        for s in range(100):
            pr = ProblemParams(p=k + 1, k=k, n=n, nu=nu, design="nc", seed=s)
            X = gen_near_constant(pr, items=range(k))
            st = design_stats(X, range(k))
            deg1.append(st["degree1"])
            n0.append(st["N0"] / n)
        assert np.mean(deg1) == pytest.approx(math.exp(-nu) * k * delta, rel=0.03)
        assert np.mean(n0) == pytest.approx(math.exp(-nu), rel=0.02)

    @pytest.mark.parametrize("ell", [1, 10, 100])
    def test_touched_tests_concentration(self, ell):
        n, k, nu = 5000, 100, LN2
        vals = []
        for s in range(20):
            pr = ProblemParams(p=k + 1, k=k, n=n, nu=nu, design="nc", seed=s)
            X = gen_near_constant(pr, items=range(ell))
            vals.append(touched_tests(X, range(ell)))
        assert np.mean(vals) == pytest.approx(n * (1 - math.exp(-ell * nu / k)), rel=0.03)


class TestSampleDefectives:
    def test_size_and_determinism(self):
        S = sample_defectives(20, 3, 7)
        assert len(set(S)) == 3 and S == tuple(sorted(S))
        assert S == sample_defectives(20, 3, 7)

    def test_uniform_marginals(self):
        counts = np.zeros(10)
        for s in range(4000):
            for j in sample_defectives(10, 2, s):
                counts[j] += 1
        assert np.allclose(counts / 4000, 0.2, atol=0.03)
