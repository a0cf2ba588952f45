import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from jobseq.bias import (
    BiasProfile,
    ContingencyTable,
    bias_profile,
    bias_profiles,
    bias_report,
    chi_square_p,
    chi_square_test,
    contingency_table,
    p_value_weight,
)
from jobseq.cohort import ASPECTS, Cohort, StudentRecord, SynthConfig, synth_cohort
from jobseq.errors import ValidationError


def chi2_upper_tail_quadrature(stat):
    """Independent oracle: integrate the chi-square(1) density upward."""
    if stat <= 0:
        return 1.0
    density = lambda x: np.exp(-x / 2.0) / np.sqrt(2.0 * np.pi * x)
    value, _err = quad(density, stat, np.inf)
    return value


def pearson_stat(table):
    c = np.asarray(table, dtype=float)
    rows, cols = c.sum(axis=1), c.sum(axis=0)
    expected = np.outer(rows, cols) / c.sum()
    return float(((c - expected) ** 2 / expected).sum())


def _student(major, aspect_values, label, i):
    return StudentRecord(f"S{i}", major, *aspect_values, label=label)


class TestContingency:
    def test_small_major_counts(self):
        # 2 male employed, 1 male unemployed, 1 female employed
        students = [
            _student(1, (0, 0, 0, 0), 1, 0),
            _student(1, (0, 0, 0, 0), 1, 1),
            _student(1, (0, 0, 0, 0), 0, 2),
            _student(1, (1, 0, 0, 0), 1, 3),
        ]
        cohort = Cohort(students=students, grades=[], num_majors=1)
        table = contingency_table(cohort, 1, "gender")
        # rows = gender value, columns = label value
        assert table.counts.tolist() == [[1.0, 2.0], [0.0, 1.0]]

    def test_single_gender_major_has_zero_row(self):
        students = [_student(1, (0, 0, 0, 0), i % 2, i) for i in range(6)]
        cohort = Cohort(students=students, grades=[], num_majors=1)
        table = contingency_table(cohort, 1, "gender")
        assert table.counts[1].sum() == 0
        result = chi_square_test(table)
        assert result.degenerate and result.p_value == 1.0

    def test_totals_match_major_size(self):
        cohort = synth_cohort(SynthConfig(num_students=200, num_majors=1, seed=8))
        for aspect in ASPECTS:
            assert contingency_table(cohort, 1, aspect).counts.sum() == 200

    def test_unknown_aspect(self):
        cohort = synth_cohort(SynthConfig(num_students=20, num_majors=2, seed=0))
        with pytest.raises(ValidationError, match="aspect"):
            contingency_table(cohort, 1, "height")

    def test_empty_major(self):
        cohort = synth_cohort(SynthConfig(num_students=20, num_majors=2, seed=0))
        with pytest.raises(ValidationError, match="no students"):
            contingency_table(cohort, 7, "gender")


class TestChiSquare:
    def test_perfect_independence(self):
        result = chi_square_test(ContingencyTable(np.array([[10, 10], [10, 10]])))
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert not result.degenerate

    def test_against_quadrature_oracle(self):
        table = ContingencyTable(np.array([[20, 5], [10, 15]]))
        p = chi_square_p(table)
        expected = chi2_upper_tail_quadrature(pearson_stat([[20, 5], [10, 15]]))
        assert abs(p - expected) < 1e-10

    def test_thousand_random_tables_vs_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            counts = rng.integers(1, 60, size=(2, 2))
            p = chi_square_p(ContingencyTable(counts))
            assert abs(p - chi2_upper_tail_quadrature(pearson_stat(counts))) < 1e-8

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            counts = rng.integers(0, 40, size=(2, 2))
            if counts.sum() == 0:
                continue
            p, pt = (
                chi_square_p(ContingencyTable(counts)),
                chi_square_p(ContingencyTable(counts.T)),
            )
            assert p == pytest.approx(pt, rel=1e-12, abs=1e-15)

    def test_scaling_never_increases_p(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            counts = rng.integers(1, 30, size=(2, 2))
            p1 = chi_square_p(ContingencyTable(counts))
            for k in (2, 3, 7):
                assert chi_square_p(ContingencyTable(counts * k)) <= p1 + 1e-15

    def test_null_calibration(self):
        # under independent margins the false-positive rate at 0.05 must sit
        # inside 0.05 +- 0.01 over 10,000 tables
        rng = np.random.default_rng(29)
        n_tables = 10_000
        hits = 0
        for _ in range(n_tables):
            r = rng.uniform(0.3, 0.7)
            c = rng.uniform(0.3, 0.7)
            n = int(rng.integers(200, 500))
            probs = [r * c, r * (1 - c), (1 - r) * c, (1 - r) * (1 - c)]
            counts = rng.multinomial(n, probs).reshape(2, 2)
            if chi_square_p(ContingencyTable(counts)) < 0.05:
                hits += 1
        rate = hits / n_tables
        assert 0.04 <= rate <= 0.06

    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError):
            ContingencyTable(np.array([[1, -1], [0, 2]]))


class TestWeightTransform:
    def test_zero(self):
        assert p_value_weight(0.0) == 0.0

    def test_one_matches_reference_value(self):
        assert abs(p_value_weight(1.0) - (-0.7615941559557649)) < 1e-12

    @given(st.floats(min_value=-20, max_value=20, allow_nan=False))
    def test_odd_symmetry(self, u):
        assert abs(p_value_weight(-u) + p_value_weight(u)) < 1e-12

    def test_equals_negative_tanh_on_grid(self):
        grid = np.linspace(-5.0, 5.0, 2001)
        assert np.max(np.abs(p_value_weight(grid) + np.tanh(grid))) < 1e-12

    def test_bounded_and_monotone_in_magnitude(self):
        grid = np.linspace(0.0, 5.0, 500)
        values = np.abs(p_value_weight(grid))
        assert np.all(values < 1.0)
        assert np.all(np.diff(values) > 0)


class TestBiasProfile:
    def _independent_cohort(self):
        # aspects identical across label groups -> every table is independent
        students = []
        i = 0
        for label in (0, 1):
            for bits in range(16):
                values = tuple((bits >> j) & 1 for j in range(4))
                students.append(_student(1, values, label, i))
                i += 1
        return Cohort(students=students, grades=[], num_majors=1)

    def test_perfectly_independent_major(self):
        profile = bias_profile(self._independent_cohort(), 1)
        assert np.allclose(profile.p_values, 1.0)
        assert np.allclose(profile.u, p_value_weight(1.0))

    def test_deterministic(self):
        cohort = synth_cohort(SynthConfig(num_students=300, num_majors=3, seed=6))
        a = bias_profile(cohort, 1)
        b = bias_profile(cohort, 1)
        assert np.array_equal(a.p_values, b.p_values) and np.array_equal(a.u, b.u)

    def test_planted_gender_bias_detected(self):
        detected, false_hits = 0, 0
        for seed in range(20):
            cfg = SynthConfig(
                num_students=500,
                num_majors=1,
                base_employment_rate=0.6,
                ability_effect=0.0,
                planted_bias_spec={1: [("gender", 3.0)]},
                seed=100 + seed,
            )
            profile = bias_profile(synth_cohort(cfg), 1)
            if profile.p_values[ASPECTS.index("gender")] < 0.05:
                detected += 1
            false_hits += sum(
                1
                for j, a in enumerate(ASPECTS)
                if a != "gender" and profile.p_values[j] < 0.05
            )
        assert detected >= 16
        assert false_hits <= 9  # 60 null tests at alpha 0.05

    def test_complement_mode(self):
        cohort = synth_cohort(SynthConfig(num_students=300, num_majors=2, seed=1))
        as_written = bias_profile(cohort, 1, "as_written")
        complement = bias_profile(cohort, 1, "complement")
        assert np.allclose(complement.u, p_value_weight(1.0 - as_written.p_values))

    def test_profiles_cover_all_majors(self):
        cohort = synth_cohort(SynthConfig(num_students=120, num_majors=6, seed=2))
        profiles = bias_profiles(cohort)
        assert [p.major_id for p in profiles] == [1, 2, 3, 4, 5, 6]

    def test_report_structure(self):
        cohort = synth_cohort(SynthConfig(num_students=100, num_majors=2, seed=3))
        report = bias_report(cohort)
        assert set(report["majors"].keys()) == {"1", "2"}
        entry = report["majors"]["1"]["gender"]
        assert {"statistic", "p_value", "degenerate", "significant"} <= set(entry)
