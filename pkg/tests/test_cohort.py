import numpy as np
import pytest

from jobseq.cohort import (
    Cohort,
    GradeRecord,
    StudentRecord,
    SynthConfig,
    parse_cohort,
    read_cohort_dir,
    stratified_split,
    synth_cohort,
    uniform_bias_spec,
    write_cohort,
)
from jobseq.errors import ValidationError


def _write(path, text):
    path.write_text(text)
    return path


def _small_files(tmp_path, employment_rows=None):
    demo = _write(
        tmp_path / "demographics.csv",
        "student_id,major_id,gender,nation,hometown_level,enroll_status\n"
        "A,1,0,1,0,1\n"
        "B,2,1,0,1,0\n",
    )
    acad = _write(
        tmp_path / "academics.csv",
        "student_id,semester,course_id,score,credit\n"
        "A,1,C1,88.5,2.0\n"
        "A,2,C2,75.0,3.0\n"
        "B,1,C1,62.0,2.0\n"
        "B,3,C3,91.0,1.5\n",
    )
    if employment_rows is None:
        employment_rows = "A,1\nB,0\n"
    emp = _write(tmp_path / "employment.csv", "student_id,label\n" + employment_rows)
    return demo, acad, emp


class TestParse:
    def test_two_students_four_grades(self, tmp_path):
        cohort = parse_cohort(*_small_files(tmp_path))
        assert len(cohort.students) == 2
        assert len(cohort.grades) == 4
        assert cohort.num_majors == 2
        assert cohort.students[0].label == 1

    def test_missing_employment_row_names_student(self, tmp_path):
        files = _small_files(tmp_path, employment_rows="A,1\n")
        with pytest.raises(ValidationError, match="B"):
            parse_cohort(*files)

    def test_missing_file(self, tmp_path):
        demo, acad, emp = _small_files(tmp_path)
        emp.unlink()
        with pytest.raises(ValidationError, match="missing file"):
            parse_cohort(demo, acad, emp)

    def test_bad_header(self, tmp_path):
        demo, acad, emp = _small_files(tmp_path)
        demo.write_text("student_id,major\nA,1\n")
        with pytest.raises(ValidationError, match="bad header"):
            parse_cohort(demo, acad, emp)

    def test_schema_violation_names_row_and_column(self, tmp_path):
        demo, acad, emp = _small_files(tmp_path)
        acad.write_text(
            "student_id,semester,course_id,score,credit\nA,1,C1,not_a_number,2.0\n"
        )
        with pytest.raises(ValidationError, match=r"row 2.*score"):
            parse_cohort(demo, acad, emp)

    def test_academics_student_absent_from_demographics(self, tmp_path):
        demo, acad, emp = _small_files(tmp_path)
        acad.write_text("student_id,semester,course_id,score,credit\nZ,1,C1,50.0,1.0\n")
        with pytest.raises(ValidationError, match="Z"):
            parse_cohort(demo, acad, emp)

    def test_round_trip(self, tmp_path):
        cohort = synth_cohort(SynthConfig(num_students=120, num_majors=5, seed=9))
        write_cohort(cohort, tmp_path)
        reparsed = read_cohort_dir(tmp_path)
        assert reparsed == cohort


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(num_students=80, num_majors=4, seed=5)
        assert synth_cohort(cfg) == synth_cohort(cfg)

    def test_defaults_match_cohort_scale(self):
        cohort = synth_cohort(SynthConfig(seed=0))
        assert len(cohort.students) == 2133
        assert cohort.num_majors == 64
        assert set(s.major_id for s in cohort.students) == set(range(1, 65))

    def test_label_rate_within_binomial_bounds(self):
        # no planted biases: overall employment rate stays on the configured
        # value (3 sigma at n=10,000)
        cfg = SynthConfig(
            num_students=10_000, num_majors=10, courses_per_semester=4,
            enrollment_density=0.5, base_employment_rate=0.85, seed=13,
        )
        rate = synth_cohort(cfg).labels().mean()
        sigma = np.sqrt(0.85 * 0.15 / 10_000)
        assert abs(rate - 0.85) < 3 * sigma

    def test_planted_bias_shifts_group_rate(self):
        cfg = SynthConfig(
            num_students=4000, num_majors=2, courses_per_semester=4,
            base_employment_rate=0.6, ability_effect=0.0,
            planted_bias_spec=uniform_bias_spec(2, [("gender", 2.0)]), seed=3,
        )
        cohort = synth_cohort(cfg)
        by_gender = {g: [] for g in (0, 1)}
        for s in cohort.students:
            by_gender[s.gender].append(s.label)
        assert np.mean(by_gender[1]) > np.mean(by_gender[0]) + 0.15

    def test_degenerate_config_rejected(self):
        with pytest.raises(ValidationError):
            synth_cohort(SynthConfig(num_students=0))
        with pytest.raises(ValidationError):
            synth_cohort(SynthConfig(num_majors=0))
        with pytest.raises(ValidationError):
            synth_cohort(SynthConfig(base_employment_rate=1.5))
        with pytest.raises(ValidationError):
            synth_cohort(SynthConfig(planted_bias_spec={1: [("height", 1.0)]}))

    def test_majors_near_uniform(self):
        cohort = synth_cohort(SynthConfig(num_students=103, num_majors=10, seed=2))
        counts = np.bincount([s.major_id for s in cohort.students], minlength=11)[1:]
        assert counts.max() - counts.min() <= 1

    def test_config_json_round_trip(self):
        cfg = SynthConfig(planted_bias_spec={3: [("gender", 1.5)]}, seed=7)
        assert SynthConfig.from_json(cfg.to_json()) == cfg


class TestSplit:
    def test_counting_example(self):
        # 90 employed / 10 not, fraction 0.2 -> test gets 18 + 2
        students = [
            StudentRecord(f"S{i}", 1 + i % 3, 0, 0, 0, 0, label=1 if i < 90 else 0)
            for i in range(100)
        ]
        cohort = Cohort(students=students, grades=[], num_majors=3)
        train, test = stratified_split(cohort, 0.2, seed=0)
        test_labels = test.labels()
        assert (test_labels == 1).sum() == 18
        assert (test_labels == 0).sum() == 2

    def test_two_by_two_halves(self):
        students = [
            StudentRecord(f"S{i}", 1, 0, 0, 0, 0, label=i % 2) for i in range(4)
        ]
        cohort = Cohort(students=students, grades=[], num_majors=1)
        train, test = stratified_split(cohort, 0.5, seed=1)
        assert sorted(train.labels()) == [0, 1]
        assert sorted(test.labels()) == [0, 1]

    def test_deterministic(self):
        cohort = synth_cohort(SynthConfig(num_students=150, num_majors=5, seed=1))
        a = stratified_split(cohort, 0.3, seed=42)
        b = stratified_split(cohort, 0.3, seed=42)
        assert a[0] == b[0] and a[1] == b[1]

    def test_partition_properties(self):
        cohort = synth_cohort(SynthConfig(num_students=237, num_majors=7, seed=4))
        for seed in range(5):
            train, test = stratified_split(cohort, 0.25, seed=seed)
            train_ids = {s.student_id for s in train.students}
            test_ids = {s.student_id for s in test.students}
            assert len(train_ids) + len(test_ids) == len(cohort.students)
            assert not (train_ids & test_ids)
            for label in (0, 1):
                total = int((cohort.labels() == label).sum())
                got = int((test.labels() == label).sum())
                assert abs(got - total * 0.25) < 1.0
            # grades follow their students
            assert all(g.student_id in train_ids for g in train.grades)
            assert all(g.student_id in test_ids for g in test.grades)

    def test_small_class_rejected(self):
        students = [StudentRecord(f"S{i}", 1, 0, 0, 0, 0, label=1) for i in range(5)]
        students.append(StudentRecord("N", 1, 0, 0, 0, 0, label=0))
        cohort = Cohort(students=students, grades=[], num_majors=1)
        with pytest.raises(ValidationError, match="fewer than 2"):
            stratified_split(cohort, 0.5, seed=0)

    def test_bad_fraction(self):
        cohort = synth_cohort(SynthConfig(num_students=50, num_majors=2, seed=0))
        with pytest.raises(ValidationError):
            stratified_split(cohort, 1.0, seed=0)


class TestCohortValidation:
    def test_grade_for_unknown_student(self):
        students = [StudentRecord("A", 1, 0, 0, 0, 0, 1)]
        grades = [GradeRecord("B", 1, "C1", 80.0, 1.0)]
        with pytest.raises(ValidationError, match="unknown student"):
            Cohort(students=students, grades=grades, num_majors=1)

    def test_semester_out_of_range(self):
        students = [StudentRecord("A", 1, 0, 0, 0, 0, 1)]
        grades = [GradeRecord("A", 7, "C1", 80.0, 1.0)]
        with pytest.raises(ValidationError, match="semester"):
            Cohort(students=students, grades=grades, num_majors=1)

    def test_score_out_of_range(self):
        students = [StudentRecord("A", 1, 0, 0, 0, 0, 1)]
        grades = [GradeRecord("A", 1, "C1", 105.0, 1.0)]
        with pytest.raises(ValidationError, match="score"):
            Cohort(students=students, grades=grades, num_majors=1)
