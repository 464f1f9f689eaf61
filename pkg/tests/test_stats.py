import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from upho.errors import (
    ConstantColumn,
    ConstantInput,
    KTooLarge,
    LengthMismatch,
    SingularDesign,
    TooFewRows,
)
from upho.stats import (
    SplitMix64,
    SplitSpec,
    average_ranks,
    kfold,
    spearman,
    split,
    standardize,
    vif,
    vif_filter,
)

from test_tabledata import make_table

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


class TestSpearman:
    def test_perfect_monotone(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-15)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)

    def test_tied_fixture_matches_rank_then_pearson_oracle(self):
        # ranks of x=[1,2,2,4] are [1, 2.5, 2.5, 4]; Pearson against the
        # ranks of y=[1,3,2,4] gives 3/sqrt(10).
        expected = 0.9486832980505138
        assert spearman([1, 2, 2, 4], [1, 3, 2, 4]) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(3 / math.sqrt(10), abs=1e-15)

    def test_matches_scipy_on_random_vectors_with_ties(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(3, 40))
            x = rng.integers(0, 8, size=n).astype(float)
            y = rng.integers(0, 8, size=n).astype(float)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            expected = scipy_stats.spearmanr(x, y).statistic
            assert spearman(x, y) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spearman([1, 2, 3], [1, 2])

    def test_too_short(self):
        with pytest.raises(LengthMismatch):
            spearman([1, 2], [1, 2])

    def test_constant_input(self):
        with pytest.raises(ConstantInput):
            spearman([1, 1, 1], [1, 2, 3])

    @given(
        st.lists(finite_floats, min_size=3, max_size=30),
        st.lists(finite_floats, min_size=3, max_size=30),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_monotone_invariance(self, xs, ys):
        n = min(len(xs), len(ys))
        x, y = np.array(xs[:n]), np.array(ys[:n])
        if n < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
            return
        assert spearman(x, y) == pytest.approx(spearman(y, x), abs=1e-12)

        # A strictly increasing transform that is exact in floats: map each
        # value to the square of its position among the sorted unique values.
        def monotone(v):
            unique = np.unique(v)
            lookup = {value: float((i + 1) ** 2) for i, value in enumerate(unique)}
            return np.array([lookup[value] for value in v])

        assert spearman(x, y) == pytest.approx(spearman(monotone(x), y), abs=1e-12)
        assert spearman(x, y) == pytest.approx(spearman(x, monotone(y)), abs=1e-12)

    def test_average_ranks(self):
        assert list(average_ranks([10, 20, 20, 30])) == [1.0, 2.5, 2.5, 4.0]


def random_design_table(rng, n_rows, n_cols, collinear=False):
    base = rng.normal(size=(n_rows, n_cols))
    if collinear:
        base[:, -1] = base[:, 0]
    columns = {f"c{i}": base[:, i].tolist() for i in range(n_cols)}
    codes = [f"47157{i:06d}" for i in range(1, n_rows + 1)]
    return make_table(codes, columns)


class TestVif:
    def test_orthogonal_columns_have_unit_vif(self):
        columns = {"a": [1, -1, 1, -1], "b": [1, 1, -1, -1]}
        table = make_table([f"4715700010{i}" for i in range(4)], columns)
        report = vif(table, ["a", "b"])
        assert report.vif["a"] == pytest.approx(1.0, abs=1e-9)
        assert report.vif["b"] == pytest.approx(1.0, abs=1e-9)
        assert report.removed == ()

    def test_duplicated_column_raises_singular(self):
        rng = np.random.default_rng(0)
        table = random_design_table(rng, 10, 3, collinear=True)
        with pytest.raises(SingularDesign):
            vif(table, ["c0", "c1", "c2"])

    def test_matches_correlation_inverse_oracle(self):
        from oracles import vif_from_correlation

        rng = np.random.default_rng(5)
        for _ in range(100):
            n_cols = int(rng.integers(2, 5))
            n_rows = int(rng.integers(n_cols + 5, 40))
            table = random_design_table(rng, n_rows, n_cols)
            names = list(table.column_names)
            report = vif(table, names)
            matrix = np.array([list(table.column(c)) for c in names]).T
            expected = vif_from_correlation(matrix)
            for name, want in zip(names, expected):
                assert report.vif[name] == pytest.approx(want, abs=1e-6, rel=1e-6)
                assert report.vif[name] >= 1.0 - 1e-9

    def test_insufficient_rows(self):
        rng = np.random.default_rng(1)
        table = random_design_table(rng, 3, 3)
        from upho.errors import InsufficientRows

        with pytest.raises(InsufficientRows):
            vif(table, ["c0", "c1", "c2"])

    def test_orthogonal_column_does_not_raise_vifs(self):
        # Exactly orthogonal design: VIFs stay at 1 when another orthogonal
        # column joins the candidate set.
        columns = {
            "a": [1, -1, 1, -1, 1, -1, 1, -1],
            "b": [1, 1, -1, -1, 1, 1, -1, -1],
            "c": [1, 1, 1, 1, -1, -1, -1, -1],
        }
        codes = [f"4715700010{i}" for i in range(8)]
        table = make_table(codes, columns)
        before = vif(table, ["a", "b"])
        after = vif(table, ["a", "b", "c"])
        for name in ("a", "b"):
            assert after.vif[name] <= before.vif[name] + 1e-9

    def test_filter_removes_worst_first(self, demo_workspace):
        table = demo_workspace.table
        features = [c for c in table.column_names if c != "obesity_prev"]
        report = vif_filter(table, features, 10.0)
        assert report.removed == ("no_insurance",)
        assert all(value <= 10.0 for value in report.vif.values())
        assert len(report.trace) == 2


class TestStandardize:
    def test_symmetric_three_point_case(self):
        table = make_table(["47157000100", "47157000200", "47157000300"], {"x": [2, 4, 6]})
        scaled, params = standardize(table)
        assert scaled.column("x") == pytest.approx((-1.0, 0.0, 1.0), abs=1e-12)
        assert params.mu == (4.0,)
        assert params.sigma == (2.0,)

    def test_idempotent_on_standardized_input(self):
        rng = np.random.default_rng(3)
        table = random_design_table(rng, 12, 2)
        scaled, _ = standardize(table)
        again, params = standardize(scaled)
        for name in table.column_names:
            assert np.allclose(scaled.column(name), again.column(name), atol=1e-9)
        assert np.allclose(params.mu, 0.0, atol=1e-9)
        assert np.allclose(params.sigma, 1.0, atol=1e-9)

    def test_round_trip_recovers_original(self):
        rng = np.random.default_rng(4)
        table = random_design_table(rng, 10, 3)
        scaled, params = standardize(table)
        matrix = np.array([values for _, values in scaled.rows])
        recovered = params.inverse(matrix)
        original = np.array([values for _, values in table.rows])
        assert np.max(np.abs(recovered - original)) < 1e-9

    def test_constant_column_rejected(self):
        table = make_table(["47157000100", "47157000200"], {"x": [5, 5]})
        with pytest.raises(ConstantColumn):
            standardize(table)


class TestSplit:
    def table(self, n):
        rng = np.random.default_rng(9)
        return random_design_table(rng, n, 2)

    def test_178_rows_split_151_27(self):
        train, test = split(self.table(178), SplitSpec(seed=1))
        assert len(train.rows) == 151
        assert len(test.rows) == 27

    def test_same_seed_same_partition(self):
        table = self.table(40)
        a = split(table, SplitSpec(seed=7))
        b = split(table, SplitSpec(seed=7))
        assert a[0].codes == b[0].codes and a[1].codes == b[1].codes

    def test_half_split_on_ten_rows(self):
        train, test = split(self.table(10), SplitSpec(train_fraction=0.5, seed=0))
        assert len(train.rows) == 5 and len(test.rows) == 5

    def test_partition_is_disjoint_and_complete(self):
        table = self.table(23)
        train, test = split(table, SplitSpec(seed=5))
        assert set(train.codes) | set(test.codes) == set(table.codes)
        assert not set(train.codes) & set(test.codes)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            split(self.table(9), SplitSpec(seed=0))


class TestKfold:
    def test_ten_rows_five_folds(self):
        folds = kfold(10, 5, seed=2)
        assert [len(val) for _, val in folds] == [2, 2, 2, 2, 2]

    def test_eleven_rows_five_folds_balanced(self):
        folds = kfold(11, 5, seed=2)
        assert sorted(len(val) for _, val in folds) == [2, 2, 2, 2, 3]

    def test_validation_sets_partition_rows(self):
        for seed in range(20):
            folds = kfold(17, 4, seed=seed)
            seen = [i for _, val in folds for i in val]
            assert sorted(seen) == list(range(17))
            for fit, val in folds:
                assert set(fit) == set(range(17)) - set(val)

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kfold(4, 5, seed=0)

    def test_deterministic(self):
        assert kfold(29, 5, seed=13) == kfold(29, 5, seed=13)


class TestSplitMix64:
    def test_known_sequence_is_stable(self):
        gen = SplitMix64(0)
        first = [gen.next_u64() for _ in range(3)]
        gen2 = SplitMix64(0)
        assert [gen2.next_u64() for _ in range(3)] == first

    def test_shuffle_is_permutation(self):
        items = list(range(50))
        SplitMix64(99).shuffle(items)
        assert sorted(items) == list(range(50))
        assert items != list(range(50))
