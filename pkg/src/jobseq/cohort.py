"""Cohort data model: student records, semester grades, synthetic generation
with plantable demographic biases, and stratified splitting.

A cohort is exchanged as three CSV files:

    demographics.csv: student_id,major_id,gender,nation,hometown_level,enroll_status
    academics.csv:    student_id,semester,course_id,score,credit
    employment.csv:   student_id,label

Demographic categories and the employment label are 0/1 integers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermitenorm

from ._math import logit, sigmoid
from .errors import ValidationError

# The four tested demographic aspects, in the order used everywhere
# (contingency tables, bias profiles, model input vectors).
ASPECTS = ("gender", "nation", "hometown_level", "enroll_status")

NUM_SEMESTERS = 6
SCORE_MAX = 100.0

DEMOGRAPHICS_HEADER = ["student_id", "major_id", *ASPECTS]
ACADEMICS_HEADER = ["student_id", "semester", "course_id", "score", "credit"]
EMPLOYMENT_HEADER = ["student_id", "label"]


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    major_id: int
    gender: int
    nation: int
    hometown_level: int
    enroll_status: int
    label: int

    def aspect_value(self, aspect: str) -> int:
        if aspect not in ASPECTS:
            raise ValidationError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
        return getattr(self, aspect)

    def demographics(self) -> np.ndarray:
        return np.array([getattr(self, a) for a in ASPECTS], dtype=float)


@dataclass(frozen=True)
class GradeRecord:
    student_id: str
    semester: int
    course_id: str
    score: float
    credit: float


@dataclass(eq=False)
class Cohort:
    """Students plus their grade rows. ``num_majors`` is the declared major
    space (ids run 1..num_majors); metadata records provenance only and is
    ignored by equality."""

    students: list[StudentRecord]
    grades: list[GradeRecord]
    num_majors: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = {s.student_id for s in self.students}
        if len(ids) != len(self.students):
            raise ValidationError("duplicate student_id in cohort")
        for s in self.students:
            if not (1 <= s.major_id <= self.num_majors):
                raise ValidationError(
                    f"student {s.student_id}: major_id {s.major_id} outside [1, {self.num_majors}]"
                )
            for a in ASPECTS:
                if getattr(s, a) not in (0, 1):
                    raise ValidationError(f"student {s.student_id}: {a} must be 0 or 1")
            if s.label not in (0, 1):
                raise ValidationError(f"student {s.student_id}: label must be 0 or 1")
        for g in self.grades:
            if g.student_id not in ids:
                raise ValidationError(f"grade row references unknown student {g.student_id}")
            if not (1 <= g.semester <= NUM_SEMESTERS):
                raise ValidationError(
                    f"grade row for {g.student_id}: semester {g.semester} outside [1, {NUM_SEMESTERS}]"
                )
            if not (0.0 <= g.score <= SCORE_MAX):
                raise ValidationError(
                    f"grade row for {g.student_id}/{g.course_id}: score {g.score} outside [0, {SCORE_MAX}]"
                )
            if g.credit < 0:
                raise ValidationError(f"grade row for {g.student_id}/{g.course_id}: negative credit")

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.students == other.students
            and self.grades == other.grades
            and self.num_majors == other.num_majors
        )

    def __len__(self):
        return len(self.students)

    def major_ids(self) -> list[int]:
        return sorted({s.major_id for s in self.students})

    def students_in_major(self, major_id: int) -> list[StudentRecord]:
        return [s for s in self.students if s.major_id == major_id]

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.students], dtype=int)

    def subset(self, student_ids: set[str], metadata: dict | None = None) -> "Cohort":
        return Cohort(
            students=[s for s in self.students if s.student_id in student_ids],
            grades=[g for g in self.grades if g.student_id in student_ids],
            num_majors=self.num_majors,
            metadata=metadata if metadata is not None else dict(self.metadata),
        )


@dataclass
class SynthConfig:
    """Configuration of the synthetic cohort generator.

    ``planted_bias_spec`` maps major_id -> list of (aspect, effect) pairs;
    each effect is an additive log-odds shift applied to the employment
    probability of students with aspect value 1, so shifted probabilities
    always stay inside (0, 1). ``ability_effect`` couples a latent per-student
    ability to both grades and the employment odds so that academic
    performance carries label signal.
    """

    num_students: int = 2133
    num_majors: int = 64
    num_colleges: int = 13
    courses_per_semester: int = 40
    enrollment_density: float = 0.3
    base_employment_rate: float = 0.85
    planted_bias_spec: dict[int, list[tuple[str, float]]] = field(default_factory=dict)
    ability_effect: float = 1.5
    seed: int = 0

    def validate(self):
        if self.num_students < 1 or self.num_majors < 1:
            raise ValidationError("num_students and num_majors must be >= 1")
        if self.num_colleges < 1:
            raise ValidationError("num_colleges must be >= 1")
        if self.courses_per_semester < 1:
            raise ValidationError("courses_per_semester must be >= 1")
        if not (0.0 < self.enrollment_density < 1.0):
            raise ValidationError("enrollment_density must lie in (0, 1)")
        if not (0.0 < self.base_employment_rate < 1.0):
            raise ValidationError("base_employment_rate must lie in (0, 1)")
        for major, pairs in self.planted_bias_spec.items():
            if not (1 <= int(major) <= self.num_majors):
                raise ValidationError(f"planted bias for unknown major {major}")
            for aspect, _effect in pairs:
                if aspect not in ASPECTS:
                    raise ValidationError(f"planted bias for unknown aspect {aspect!r}")

    def to_json(self) -> dict:
        d = {
            "num_students": self.num_students,
            "num_majors": self.num_majors,
            "num_colleges": self.num_colleges,
            "courses_per_semester": self.courses_per_semester,
            "enrollment_density": self.enrollment_density,
            "base_employment_rate": self.base_employment_rate,
            "planted_bias_spec": {
                str(m): [[a, e] for a, e in pairs] for m, pairs in self.planted_bias_spec.items()
            },
            "ability_effect": self.ability_effect,
            "seed": self.seed,
        }
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SynthConfig":
        spec = {
            int(m): [(str(a), float(e)) for a, e in pairs]
            for m, pairs in d.get("planted_bias_spec", {}).items()
        }
        kwargs = {k: d[k] for k in d if k != "planted_bias_spec"}
        return cls(planted_bias_spec=spec, **kwargs)


def uniform_bias_spec(num_majors: int, effects: list[tuple[str, float]]) -> dict:
    """Plant the same (aspect, effect) pairs in every major."""
    return {m: list(effects) for m in range(1, num_majors + 1)}


# ---------------------------------------------------------------------------
# synthesis

# Grade model constants: score = GRADE_MEAN + GRADE_ABILITY_SCALE * ability + noise.
GRADE_MEAN = 72.0
GRADE_ABILITY_SCALE = 15.0
GRADE_NOISE_SD = 5.0


def _calibrated_intercept(base_rate: float, ability_effect: float) -> float:
    """Log-odds intercept b with E[sigmoid(b + e*A)] = base_rate, A ~ N(0,1).

    Keeps the realized employment rate on the configured value for any
    ability effect (Gauss-Hermite quadrature + root find)."""
    if ability_effect == 0.0:
        return float(logit(base_rate))
    nodes, weights = roots_hermitenorm(61)
    weights = weights / weights.sum()

    def mean_rate(b):
        return float(np.sum(weights * sigmoid(b + ability_effect * nodes))) - base_rate

    return float(brentq(mean_rate, -60.0, 60.0, xtol=1e-12))


def synth_cohort(config: SynthConfig) -> Cohort:
    """Generate a cohort deterministically from ``config.seed``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, m = config.num_students, config.num_majors

    majors = 1 + (np.arange(n) % m)
    rng.shuffle(majors)
    aspects = {a: rng.integers(0, 2, size=n) for a in ASPECTS}
    ability = rng.normal(0.0, 1.0, size=n)

    log_odds = np.full(n, _calibrated_intercept(config.base_employment_rate, config.ability_effect))
    log_odds += config.ability_effect * ability
    for major, pairs in config.planted_bias_spec.items():
        in_major = majors == int(major)
        for aspect, effect in pairs:
            log_odds[in_major] += float(effect) * aspects[aspect][in_major]
    labels = (rng.random(n) < sigmoid(log_odds)).astype(int)

    students = [
        StudentRecord(
            student_id=f"S{i:05d}",
            major_id=int(majors[i]),
            gender=int(aspects["gender"][i]),
            nation=int(aspects["nation"][i]),
            hometown_level=int(aspects["hometown_level"][i]),
            enroll_status=int(aspects["enroll_status"][i]),
            label=int(labels[i]),
        )
        for i in range(n)
    ]

    grades: list[GradeRecord] = []
    k = config.courses_per_semester
    for semester in range(1, NUM_SEMESTERS + 1):
        enrolled = rng.random((n, k)) < config.enrollment_density
        scores = np.clip(
            GRADE_MEAN
            + GRADE_ABILITY_SCALE * ability[:, None]
            + rng.normal(0.0, GRADE_NOISE_SD, size=(n, k)),
            0.0,
            SCORE_MAX,
        )
        credits = rng.integers(1, 5, size=(n, k))
        for i in range(n):
            for j in np.flatnonzero(enrolled[i]):
                grades.append(
                    GradeRecord(
                        student_id=students[i].student_id,
                        semester=semester,
                        course_id=f"S{semester}C{j:03d}",
                        score=float(scores[i, j]),
                        credit=float(credits[i, j]),
                    )
                )

    metadata = {
        "source": "synthetic",
        "seed": config.seed,
        "num_colleges": config.num_colleges,
        "college_of_major": {str(j): 1 + (j - 1) % config.num_colleges for j in range(1, m + 1)},
    }
    return Cohort(students=students, grades=grades, num_majors=m, metadata=metadata)


# ---------------------------------------------------------------------------
# CSV interchange


def _read_rows(path: Path, expected_header: list[str]) -> list[dict]:
    if not path.exists():
        raise ValidationError(f"missing file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header != expected_header:
            raise ValidationError(
                f"{path}: bad header {header!r}, expected {expected_header!r}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(expected_header):
                raise ValidationError(f"{path}: row {line_no} has {len(row)} fields")
            rows.append({"_line": line_no, **dict(zip(expected_header, row))})
    return rows


def _parse_int(row, column, path):
    try:
        return int(row[column])
    except ValueError:
        raise ValidationError(
            f"{path}: row {row['_line']}, column {column!r}: not an integer ({row[column]!r})"
        ) from None


def _parse_float(row, column, path):
    try:
        return float(row[column])
    except ValueError:
        raise ValidationError(
            f"{path}: row {row['_line']}, column {column!r}: not a number ({row[column]!r})"
        ) from None


def parse_cohort(demographics_path, academics_path, employment_path) -> Cohort:
    """Read and cross-validate the three cohort CSVs, joined on student_id."""
    demographics_path = Path(demographics_path)
    academics_path = Path(academics_path)
    employment_path = Path(employment_path)

    demo_rows = _read_rows(demographics_path, DEMOGRAPHICS_HEADER)
    acad_rows = _read_rows(academics_path, ACADEMICS_HEADER)
    emp_rows = _read_rows(employment_path, EMPLOYMENT_HEADER)

    labels: dict[str, int] = {}
    for row in emp_rows:
        sid = row["student_id"]
        if sid in labels:
            raise ValidationError(f"{employment_path}: duplicate student_id {sid}")
        labels[sid] = _parse_int(row, "label", employment_path)

    students = []
    seen = set()
    for row in demo_rows:
        sid = row["student_id"]
        if sid in seen:
            raise ValidationError(f"{demographics_path}: duplicate student_id {sid}")
        seen.add(sid)
        if sid not in labels:
            raise ValidationError(f"employment label missing for student {sid}")
        students.append(
            StudentRecord(
                student_id=sid,
                major_id=_parse_int(row, "major_id", demographics_path),
                gender=_parse_int(row, "gender", demographics_path),
                nation=_parse_int(row, "nation", demographics_path),
                hometown_level=_parse_int(row, "hometown_level", demographics_path),
                enroll_status=_parse_int(row, "enroll_status", demographics_path),
                label=labels[sid],
            )
        )

    for sid in labels:
        if sid not in seen:
            raise ValidationError(f"student {sid} in employment file absent from demographics")

    grades = []
    for row in acad_rows:
        sid = row["student_id"]
        if sid not in seen:
            raise ValidationError(f"student {sid} in academics file absent from demographics")
        grades.append(
            GradeRecord(
                student_id=sid,
                semester=_parse_int(row, "semester", academics_path),
                course_id=row["course_id"],
                score=_parse_float(row, "score", academics_path),
                credit=_parse_float(row, "credit", academics_path),
            )
        )

    num_majors = max((s.major_id for s in students), default=0)
    if num_majors < 1:
        raise ValidationError("cohort contains no students")
    return Cohort(
        students=students,
        grades=grades,
        num_majors=num_majors,
        metadata={"source": "parsed", "paths": [str(demographics_path)]},
    )


def write_cohort(cohort: Cohort, out_dir) -> dict[str, Path]:
    """Serialize a cohort to demographics/academics/employment CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "demographics": out_dir / "demographics.csv",
        "academics": out_dir / "academics.csv",
        "employment": out_dir / "employment.csv",
    }
    with open(paths["demographics"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DEMOGRAPHICS_HEADER)
        for s in cohort.students:
            w.writerow([s.student_id, s.major_id, s.gender, s.nation, s.hometown_level, s.enroll_status])
    with open(paths["academics"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ACADEMICS_HEADER)
        for g in cohort.grades:
            w.writerow([g.student_id, g.semester, g.course_id, repr(g.score), repr(g.credit)])
    with open(paths["employment"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EMPLOYMENT_HEADER)
        for s in cohort.students:
            w.writerow([s.student_id, s.label])
    return paths


def read_cohort_dir(data_dir) -> Cohort:
    data_dir = Path(data_dir)
    return parse_cohort(
        data_dir / "demographics.csv",
        data_dir / "academics.csv",
        data_dir / "employment.csv",
    )


# ---------------------------------------------------------------------------
# splitting


def stratified_split(cohort: Cohort, test_fraction: float, seed: int) -> tuple[Cohort, Cohort]:
    """Disjoint, exhaustive train/test partition preserving label proportions
    to within one student per class. Deterministic per seed."""
    if not (0.0 < test_fraction < 1.0):
        raise ValidationError(f"test_fraction {test_fraction} outside (0, 1)")
    by_label = {0: [], 1: []}
    for s in cohort.students:
        by_label[s.label].append(s.student_id)
    for label, ids in by_label.items():
        if len(ids) < 2:
            raise ValidationError(f"label class {label} has fewer than 2 members")

    rng = np.random.default_rng(seed)
    test_ids: set[str] = set()
    for label in (0, 1):
        ids = np.array(by_label[label])
        rng.shuffle(ids)
        n_test = int(round(len(ids) * test_fraction))
        test_ids.update(ids[:n_test].tolist())

    train_meta = dict(cohort.metadata, split="train")
    test_meta = dict(cohort.metadata, split="test")
    train = cohort.subset({s.student_id for s in cohort.students} - test_ids, train_meta)
    test = cohort.subset(test_ids, test_meta)
    return train, test


def save_synth_config(config: SynthConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_synth_config(path) -> SynthConfig:
    with open(path) as fh:
        return SynthConfig.from_json(json.load(fh))


__all__ = [
    "ASPECTS",
    "NUM_SEMESTERS",
    "Cohort",
    "GradeRecord",
    "StudentRecord",
    "SynthConfig",
    "parse_cohort",
    "read_cohort_dir",
    "stratified_split",
    "synth_cohort",
    "uniform_bias_spec",
    "write_cohort",
]
