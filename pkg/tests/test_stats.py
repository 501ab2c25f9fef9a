import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgc_eval.errors import EvaluationError
from kgc_eval.stats import kendall_tau, kendall_tau_vectors, paired_t_pvalue
from oracles import kendall_tau_bruteforce, t_pvalue_quadrature

# frozen from the quadrature oracle for the differences [0.1, -0.2, 0.3, 0.05, -0.1]
P_VALUE_SPEC_DIFFS = 0.744865201202444


class TestKendallTau:
    def test_identical_maps(self):
        values = {"a": 0.3, "b": 0.2, "c": 0.1}
        assert kendall_tau(values, values) == 1.0

    def test_exact_reversal(self):
        a = {"a": 3.0, "b": 2.0, "c": 1.0}
        b = {"a": 1.0, "b": 2.0, "c": 3.0}
        assert kendall_tau(a, b) == -1.0

    def test_one_third_example(self):
        # orderings [1,2,3] vs [2,1,3]: C=2, D=1 -> 1/3
        a = {"s1": 3.0, "s2": 2.0, "s3": 1.0}
        b = {"s1": 2.0, "s2": 3.0, "s3": 1.0}
        assert kendall_tau(a, b) == pytest.approx(1 / 3, abs=0)

    def test_matches_bruteforce_exactly_with_ties(self):
        rng = random.Random(42)
        for _ in range(1000):
            n = rng.randrange(2, 11)
            pool = [rng.choice([0.0, 1.0, 2.0, 3.0, rng.random()]) for _ in range(n)]
            a = [rng.choice(pool) for _ in range(n)]
            b = [rng.choice(pool) for _ in range(n)]
            got = kendall_tau_vectors(a, b)
            want = kendall_tau_bruteforce(a, b)
            if math.isnan(want):
                assert math.isnan(got)
            else:
                assert got == want  # bit-exact: same integer counts, same formula

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=10, unique=True))
    @settings(max_examples=200, deadline=None)
    def test_antisymmetric_under_reversal(self, values):
        keys = [f"s{i}" for i in range(len(values))]
        a = dict(zip(keys, values))
        reversed_b = dict(zip(keys, [-v for v in values]))
        assert kendall_tau(a, a) == 1.0
        assert kendall_tau(a, reversed_b) == -kendall_tau(a, a)

    def test_ascending_orientation_for_mean_rank(self):
        mrr = {"a": 0.9, "b": 0.5}
        mr = {"a": 2.0, "b": 30.0}  # same ordering: a better
        assert kendall_tau(mrr, mr, ascending_b=True) == 1.0
        assert kendall_tau(mrr, mr) == -1.0

    def test_mismatched_keys_rejected(self):
        with pytest.raises(EvaluationError, match="differ"):
            kendall_tau({"a": 1.0}, {"b": 1.0})

    def test_fewer_than_two_systems_rejected(self):
        with pytest.raises(EvaluationError):
            kendall_tau({"a": 1.0}, {"a": 1.0})

    def test_fully_tied_input_is_nan(self):
        assert math.isnan(kendall_tau({"a": 1.0, "b": 1.0}, {"a": 2.0, "b": 1.0}))


class TestPairedTTest:
    def test_self_pair_is_one(self):
        x = [0.5, 0.25, 1.0, 0.1]
        assert paired_t_pvalue(x, x) == 1.0

    def test_constant_nonzero_differences_give_zero(self):
        assert paired_t_pvalue([1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]) == 0.0

    def test_frozen_oracle_value(self):
        x = [0.1, -0.2, 0.3, 0.05, -0.1]
        y = [0.0] * 5
        assert paired_t_pvalue(x, y) == pytest.approx(P_VALUE_SPEC_DIFFS, abs=1e-6)

    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(5, 501))
            x = rng.normal(size=n)
            y = x + rng.normal(scale=0.4, size=n) + float(rng.normal()) * 0.05
            assert paired_t_pvalue(x, y) == pytest.approx(
                t_pvalue_quadrature((x - y).tolist()), abs=1e-6
            )

    def test_symmetric_in_pair_order(self):
        rng = np.random.default_rng(9)
        x, y = rng.normal(size=30), rng.normal(size=30)
        assert paired_t_pvalue(x, y) == paired_t_pvalue(y, x)

    def test_invariant_under_common_shift(self):
        rng = np.random.default_rng(10)
        x, y = rng.normal(size=25), rng.normal(size=25)
        assert paired_t_pvalue(x, y) == pytest.approx(
            paired_t_pvalue(x + 5.0, y + 5.0), abs=1e-12
        )

    def test_too_short_rejected(self):
        with pytest.raises(EvaluationError):
            paired_t_pvalue([1.0], [0.5])
