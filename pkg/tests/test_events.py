import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from noisy_gt.channel import apply_noise, noiseless_outcomes
from noisy_gt.decoders import BudgetError, count_correct, mle_restricted
from noisy_gt.designs import ProblemParams, from_columns, gen_bernoulli, generate, sample_defectives
from noisy_gt.events import (
    FeasiblePair,
    MaskingStats,
    check_failure_conditions,
    derive_feasible_pair,
    dump_witnesses,
    enumerate_k_czeta,
    g_counts,
    masking_stats,
    pair_scale,
)
from noisy_gt.infomath import binomial_pmf

LN2 = math.log(2)


def instance(p, k, n, rho, seed, design="bern", nu=LN2):
    X = generate(ProblemParams(p=p, k=k, n=n, nu=nu, design=design, seed=seed))
    S = sample_defectives(p, k, seed + 10**6)
    out = apply_noise(noiseless_outcomes(X, S), rho, seed + 2 * 10**6)
    return X, S, out


class TestMaskingStats:
    def test_whole_set(self):
        X, S, out = instance(15, 3, 30, 0.1, 0)
        st = masking_stats(X, out, S, S)
        touched = int(noiseless_outcomes(X, S).sum())
        assert st.M_J == touched
        assert st.N0 == 30 - touched

    @pytest.mark.parametrize("seed", range(5))
    def test_noiseless_splits(self, seed):
        X, S, out = instance(15, 3, 30, 0.0, seed)
        st = masking_stats(X, out, S, S[:1])
        assert st.M_J0 == 0 and st.N01 == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_invariants(self, seed):
        X, S, out = instance(15, 3, 25, 0.2, seed, design="nc")
        for ell in (1, 2, 3):
            for J in itertools.combinations(S, ell):
                st = masking_stats(X, out, S, J)
                assert st.M_J == st.M_J0 + st.M_J1
                assert st.N0 == st.N00 + st.N01
                assert st.M_prime <= st.M_J

    def test_repeated_placement_reduces_m_prime(self):
        X = from_columns(5, [[0, 0, 1], [2], [3]])
        y = noiseless_outcomes(X, [0, 1])
        st = masking_stats(X, y, [0, 1], [0])
        assert st.M_J == 2 and st.M_prime == 1

    def test_bernoulli_m_prime_equals_m(self):
        X, S, out = instance(15, 3, 25, 0.1, 2)
        st = masking_stats(X, out, S, S[:2])
        assert st.M_prime == st.M_J

    def test_hand_counts(self):
        # S = {0, 1}, J = {0}; tests: 0 only-J, 1 both, 2 only-1, 3 empty, 4 only-J
        X = from_columns(5, [[0, 1, 4], [1, 2], [3]])
        y = np.array([0, 1, 1, 1, 1], dtype=np.uint8)
        st = masking_stats(X, y, [0, 1], [0])
        assert st == MaskingStats(M_J=2, M_J0=1, M_J1=1, N0=1, N00=0, N01=1, M_prime=2)

    def test_argument_checks(self):
        X, S, out = instance(15, 3, 25, 0.1, 2)
        with pytest.raises(ValueError):
            masking_stats(X, out, S, [])
        outside = next(j for j in range(15) if j not in S)
        with pytest.raises(ValueError):
            masking_stats(X, out, S, [outside])


class TestFeasiblePair:
    params = ProblemParams(p=20, k=3, n=40, nu=LN2)

    def test_zero(self):
        st = MaskingStats(0, 0, 0, 10, 5, 5, 0)
        pair = derive_feasible_pair(st, self.params, 1)
        assert pair.C == 0.0 and pair.zeta == 0

    def test_all_negative(self):
        st = MaskingStats(4, 4, 0, 10, 5, 5, 4)
        assert derive_feasible_pair(st, self.params, 1).zeta == 1

    @pytest.mark.parametrize("MJ,MJ0,ell", [(7, 3, 1), (12, 5, 2), (1, 0, 3)])
    def test_roundtrip(self, MJ, MJ0, ell):
        st = MaskingStats(MJ, MJ0, MJ - MJ0, 10, 5, 5, MJ)
        pair = derive_feasible_pair(st, self.params, ell)
        scale = pair_scale(40, 3, LN2, ell)
        assert pair.C * scale == pytest.approx(MJ, rel=1e-14)
        assert pair.zeta == Fraction(MJ0, MJ)
        assert pair.zeta * pair.M_J == MJ0
        assert pair.tilt == MJ - 2 * MJ0

    def test_hashable_grouping(self):
        a = FeasiblePair(1, 3, 1, 2.0)
        b = FeasiblePair(1, 3, 1, 2.0)
        assert {a: 1}[b] == 1


class TestGainCounts:
    def test_untested_swap(self):
        X = from_columns(5, [[0, 1], [2], [], [4]])
        y = noiseless_outcomes(X, [0, 1])
        g = g_counts(X, y, [0, 1], [0], [2])
        assert (g.G1, g.G2) == (0, 0)

    def test_copy_column_noiseless(self):
        X = from_columns(6, [[0, 1], [2, 3], [0, 1], [5]])
        y = noiseless_outcomes(X, [0, 1])
        g = g_counts(X, y, [0, 1], [0], [2])
        st = masking_stats(X, y, [0, 1], [0])
        # J' re-covers both masked positives, which exactly offsets the tilt
        assert (g.G1, g.G2) == (2, 0)
        assert st.M_J0 == 0 and st.M_J - 2 * st.M_J0 == 2
        assert count_correct(X, y, [2, 1]) == count_correct(X, y, [0, 1])

    @pytest.mark.parametrize("seed", range(30))
    def test_swap_identity(self, seed):
        design = ("bern", "nc")[seed % 2]
        X, S, out = instance(12, 3, 20, 0.2, seed, design=design)
        base = count_correct(X, out, S)
        outside = [j for j in range(12) if j not in S]
        for ell in (1, 2):
            for J in itertools.combinations(S, ell):
                st = masking_stats(X, out, S, J)
                pair = derive_feasible_pair(st, ProblemParams(p=12, k=3, n=20, nu=LN2), ell)
                for Jp in itertools.combinations(outside, ell):
                    g = g_counts(X, out, S, J, Jp)
                    assert g.G1 <= st.N01 + st.M_J1 and g.G2 <= st.N00 + st.M_J0
                    s_new = [j for j in S if j not in J] + list(Jp)
                    assert count_correct(X, out, s_new) - base == g.G1 - g.G2 - pair.tilt
                    scaled = (1 - 2 * pair.zeta) * Fraction(pair.M_J)
                    assert scaled == pair.tilt

    def test_argument_checks(self):
        X, S, out = instance(12, 3, 20, 0.2, 0)
        with pytest.raises(ValueError):
            g_counts(X, out, S, S[:1], S[1:2])
        outside = [j for j in range(12) if j not in S]
        with pytest.raises(ValueError):
            g_counts(X, out, S, S[:1], outside[:2])


class TestFailureConditions:
    def test_strict_witness_forces_failure(self):
        found = 0
        for seed in range(200):
            X, S, out = instance(14, 2, 12, 0.2, seed)
            fc = check_failure_conditions(X, out, S)
            if fc.sufficient_found:
                found += 1
                res = mle_restricted(X, out, S)
                assert not (res.status == "unique" and res.estimate == S)
        assert found > 0

    def test_failure_has_weak_witness_at_distance(self):
        seen = 0
        for seed in range(200):
            X, S, out = instance(14, 3, 14, 0.2, seed, design="nc")
            fc = check_failure_conditions(X, out, S)
            res = mle_restricted(X, out, S)
            if res.status == "unique" and res.estimate != S:
                seen += 1
                ell = len(set(S) - set(res.estimate))
                assert fc.necessary_holds_on_failure
                # at least one full enumeration witness at that distance
                outside = [j for j in range(14) if j not in S]
                base = count_correct(X, out, S)
                assert any(
                    count_correct(X, out, [j for j in S if j not in J] + list(Jp)) >= base
                    for J in itertools.combinations(S, ell)
                    for Jp in itertools.combinations(outside, ell)
                )
        assert seen > 0

    def test_noiseless_identifying(self):
        X, S, _ = instance(14, 2, 80, 0.0, 3)
        fc = check_failure_conditions(X, noiseless_outcomes(X, S), S)
        assert not fc.sufficient_found and not fc.restricted_failed

    def test_zero_violations(self):
        for seed in range(300):
            design = ("bern", "nc")[seed % 2]
            k = 1 + seed % 3
            X, S, out = instance(10 + seed % 10, k, 8 + seed % 20, (0.0, 0.1, 0.2)[seed % 3], seed, design=design)
            fc = check_failure_conditions(X, out, S)
            assert fc.violations == 0

    def test_witness_dump(self):
        for seed in range(50):
            X, S, out = instance(14, 2, 12, 0.2, seed)
            fc = check_failure_conditions(X, out, S)
            if fc.strict_witnesses:
                break
        text = dump_witnesses(fc.strict_witnesses)
        recs = [json.loads(line) for line in text.splitlines()]
        assert list(recs[0]) == ["ell", "C", "zeta", "J", "Jprime", "G1", "G2", "margin"]
        assert all(r["margin"] > 0 for r in recs)

    def test_budget(self):
        X, S, out = instance(20, 3, 20, 0.1, 0)
        with pytest.raises(BudgetError):
            check_failure_conditions(X, out, S, budget=10)


class TestKCZeta:
    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_partition(self, ell):
        X, S, out = instance(15, 4, 30, 0.1, 1, design="nc")
        groups = enumerate_k_czeta(X, out, S, ell)
        assert sum(groups.values()) == math.comb(4, ell)

    def test_noiseless_zeta_zero(self):
        X, S, out = instance(15, 4, 30, 0.0, 1)
        assert all(pair.zeta == 0 for pair in enumerate_k_czeta(X, out, S, 1))

    def test_product_form_expectation(self):
        # E[k_{1,C,zeta}] = k P(M_j = m) P(Bin(m, rho) = m0), M_j ~ Bin(n, P1)
        k, n, nu, rho, seeds = 10, 60, LN2, 0.1, 10**4
        P1 = nu / k * (1 - nu / k) ** (k - 1)
        targets = [(4, 0), (4, 1), (5, 1), (3, 0)]
        totals = dict.fromkeys(targets, 0)
        S = list(range(k))
        for s in range(seeds):
            X = gen_bernoulli(ProblemParams(p=k + 1, k=k, n=n, nu=nu, seed=s), items=S)
            out = apply_noise(noiseless_outcomes(X, S), rho, 10**7 + s)
            for pair, c in enumerate_k_czeta(X, out, S, 1).items():
                key = (pair.M_J, pair.M_J0)
                if key in totals:
                    totals[key] += c
        for (m, m0), tot in totals.items():
            p_one = binomial_pmf(n, P1, m) * binomial_pmf(m, rho, m0)
            expected = k * p_one
            # k_{1,C,zeta} is a sum of k dependent indicators; bound its variance by k^2 p(1-p)
            sd = math.sqrt(k * k * p_one * (1 - p_one) / seeds)
            assert abs(tot / seeds - expected) < 3 * sd
