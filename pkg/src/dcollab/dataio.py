"""Dataset representation, CSV ingestion, label construction, one-hot
encoding, and horizontal partitioning across parties.

CSV files are UTF-8, comma-separated, `.` decimal point, first row header.
Schema files are flat key/value text::

    features = sex, age, weight, smoker
    label = highbp
    positive_value = 1
    categorical_map.sex = Male:1, Female:0

Rows with missing values are dropped and counted in the load report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    InvalidLabelError,
    ParseError,
    SchemaError,
)
from .matrixkit import RandomSource, as_matrix

# Survival-time thresholds for y_i = 1 (t_i >= threshold), one per supported
# survival-package export.
SURVIVAL_LABEL_THRESHOLDS = {
    "colon": 1500.0,
    "kidney": 100.0,
    "lung": 400.0,
    "pbc": 2000.0,
    "veteran": 100.0,
}

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "n/a"}


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout of a labeled CSV dataset.

    With a label_threshold the label column is read as a number and
    binarized to y = 1 iff value >= threshold; otherwise the cell is
    compared against positive_class.
    """

    feature_names: tuple[str, ...]
    label_name: str
    positive_class: str = "1"
    categorical_maps: dict[str, dict[str, float]] = field(default_factory=dict)
    label_threshold: float | None = None

    def __post_init__(self):
        names = list(self.feature_names)
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if self.label_name in names:
            raise SchemaError(f"label {self.label_name!r} also listed as a feature")
        object.__setattr__(self, "feature_names", tuple(names))


@dataclass(frozen=True)
class LoadReport:
    path: str
    rows_read: int
    rows_kept: int
    rows_dropped_missing: int


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix X (n x m) with label matrix Y (n x l).

    Y rows are one-hot for l >= 2 and 0/1 entries for l = 1.
    """

    X: np.ndarray
    Y: np.ndarray
    schema: FeatureSchema
    load_report: LoadReport | None = None

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise InvalidInputError(
                f"X has {X.shape[0]} rows but Y has {Y.shape[0]}"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.Y[idx], self.schema)


@dataclass(frozen=True)
class PartyPartition:
    """Disjoint horizontal split of a dataset plus the held-out remainder.

    ``assignment`` has one (party, row-within-party) pair per original
    sample; party -1 marks rows left in the test pool.
    """

    parties: list[LabeledDataset]
    assignment: np.ndarray
    test_pool: LabeledDataset


def parse_schema_file(path) -> FeatureSchema:
    """Read a flat key/value schema file."""
    features: list[str] = []
    label = None
    positive = "1"
    threshold = None
    cat_maps: dict[str, dict[str, float]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "features":
            features = [f.strip() for f in value.split(",") if f.strip()]
        elif key == "label":
            label = value
        elif key == "positive_value":
            positive = value
        elif key == "label_threshold":
            try:
                threshold = float(value)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad number {value!r}")
        elif key.startswith("categorical_map."):
            col = key[len("categorical_map."):]
            mapping = {}
            for pair in value.split(","):
                if not pair.strip():
                    continue
                if ":" not in pair:
                    raise ParseError(f"{path}:{lineno}: expected value:number in {pair!r}")
                k, _, v = pair.partition(":")
                try:
                    mapping[k.strip()] = float(v)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad number {v!r}")
            cat_maps[col] = mapping
        else:
            raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
    if not features:
        raise SchemaError(f"{path}: no features declared")
    if label is None:
        raise SchemaError(f"{path}: no label declared")
    return FeatureSchema(
        feature_names=tuple(features),
        label_name=label,
        positive_class=positive,
        categorical_maps=cat_maps,
        label_threshold=threshold,
    )


def write_schema_file(schema: FeatureSchema, path) -> None:
    lines = [
        "features = " + ", ".join(schema.feature_names),
        f"label = {schema.label_name}",
        f"positive_value = {schema.positive_class}",
    ]
    if schema.label_threshold is not None:
        lines.append(f"label_threshold = {schema.label_threshold:g}")
    for col, mapping in schema.categorical_maps.items():
        pairs = ", ".join(f"{k}:{v:g}" for k, v in mapping.items())
        lines.append(f"categorical_map.{col} = {pairs}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in _MISSING_TOKENS


def _parse_cell(cell: str, col: str, rowno: int, cat_map: dict[str, float] | None):
    text = cell.strip()
    if cat_map is not None:
        if text in cat_map:
            return cat_map[text]
        # numeric fallthrough lets pre-encoded files reuse the schema
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"row {rowno}, column {col!r}: cannot parse {text!r}")


def _label_value(cell: str, positive: str) -> float:
    text = cell.strip()
    if text == positive:
        return 1.0
    try:
        if float(text) == float(positive):
            return 1.0
    except ValueError:
        pass
    return 0.0


def load_csv(path, schema: FeatureSchema) -> LabeledDataset:
    """Load a labeled dataset; drops and counts rows with missing values.

    Column order follows the schema's feature order regardless of file
    order. Raises ``SchemaError`` if a declared column is absent and
    ``ParseError`` (with row/column location) on unparseable cells.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        header = [h.strip() for h in header]
        col_index = {}
        for name in (*schema.feature_names, schema.label_name):
            if name not in header:
                raise SchemaError(f"{path}: column {name!r} not in header {header}")
            col_index[name] = header.index(name)

        rows_read = 0
        dropped = 0
        feats: list[list[float]] = []
        labels: list[float] = []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            rows_read += 1
            cells = [row[col_index[name]] if col_index[name] < len(row) else "" for name in schema.feature_names]
            label_cell = row[col_index[schema.label_name]] if col_index[schema.label_name] < len(row) else ""
            if any(_is_missing(c) for c in cells) or _is_missing(label_cell):
                dropped += 1
                continue
            feats.append(
                [
                    _parse_cell(c, name, rowno, schema.categorical_maps.get(name))
                    for c, name in zip(cells, schema.feature_names)
                ]
            )
            if schema.label_threshold is None:
                labels.append(_label_value(label_cell, schema.positive_class))
            else:
                raw = _parse_cell(label_cell, schema.label_name, rowno, None)
                labels.append(1.0 if raw >= schema.label_threshold else 0.0)

    X = np.array(feats, dtype=np.float64).reshape(len(feats), len(schema.feature_names))
    Y = np.array(labels, dtype=np.float64).reshape(len(labels), 1)
    report = LoadReport(
        path=str(path),
        rows_read=rows_read,
        rows_kept=len(feats),
        rows_dropped_missing=dropped,
    )
    return LabeledDataset(X=X, Y=Y, schema=schema, load_report=report)


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset back out in the load_csv format."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.schema.feature_names, dataset.schema.label_name])
        for x, y in zip(dataset.X, dataset.Y):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y[0]))])


def read_matrix_csv(path) -> np.ndarray:
    """Read a plain numeric matrix CSV; a non-numeric first row is a header."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if rowno == 1:
                    continue  # header
                raise ParseError(f"{path}: row {rowno}: non-numeric cell")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return as_matrix(rows, str(path))


def write_matrix_csv(M, path, header: list[str] | None = None) -> None:
    M = as_matrix(M, "matrix")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header if header is not None else [f"c{j}" for j in range(M.shape[1])])
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def binarize_survival_label(times, threshold: float) -> np.ndarray:
    """y_i = 1 iff t_i >= threshold."""
    t = np.asarray(times, dtype=np.float64)
    if t.size and not np.all(np.isfinite(t)):
        raise InvalidInputError("survival times contain non-finite entries")
    return (t >= threshold).astype(np.float64)


def one_hot(labels, num_classes: int) -> np.ndarray:
    """Binary matrix with a single 1 per row at the class index."""
    idx = np.asarray(labels)
    if idx.size and (idx.min() < 0 or idx.max() >= num_classes):
        bad = int(idx.min() if idx.min() < 0 else idx.max())
        raise InvalidLabelError(f"class index {bad} outside [0, {num_classes})")
    out = np.zeros((len(idx), num_classes), dtype=np.float64)
    out[np.arange(len(idx)), idx.astype(int)] = 1.0
    return out


def horizontal_split(dataset: LabeledDataset, sizes, src: RandomSource) -> PartyPartition:
    """Sample disjoint parties without replacement; the rest is the test pool."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise InsufficientDataError(f"party sizes must be positive, got {sizes}")
    total = sum(sizes)
    n = dataset.n
    if total > n:
        raise InsufficientDataError(f"requested {total} samples from {n} available")
    order = src.permutation(n)
    assignment = np.full((n, 2), -1, dtype=np.int64)
    parties = []
    offset = 0
    for party_idx, size in enumerate(sizes):
        rows = order[offset:offset + size]
        assignment[rows, 0] = party_idx
        assignment[rows, 1] = np.arange(size)
        parties.append(dataset.take(rows))
        offset += size
    pool_rows = order[offset:]
    return PartyPartition(
        parties=parties,
        assignment=assignment,
        test_pool=dataset.take(pool_rows),
    )


# Surrogate generator for the proprietary 100-sample hospital file: same
# four features and the same high-blood-pressure label rule, with latent
# pressures synthesized from the features and discarded.
HOSPITAL_SCHEMA = FeatureSchema(
    feature_names=("sex", "age", "weight", "smoker"),
    label_name="highbp",
    positive_class="1",
)

_SBP_THRESHOLD = 140.0
_DBP_THRESHOLD = 80.0


def synth_hospital(n: int, src: RandomSource) -> LabeledDataset:
    """Synthetic hospital-style cohort with a latent blood-pressure label.

    Features: sex in {0,1}, age in [25, 50], weight correlated with sex,
    smoker in {0,1}. Label = 1 iff latent SBP >= 140 or latent DBP >= 80;
    the pressures are generated from the features plus noise and dropped.
    """
    if n < 4:
        raise InsufficientDataError(f"need at least 4 samples, got {n}")
    sex = (src.uniform(0.0, 1.0, n) < 0.5).astype(np.float64)
    age = np.floor(src.uniform(25.0, 51.0, n))
    weight = np.round(130.0 + 50.0 * sex + 8.0 * src.normal(n, 1)[:, 0], 0)
    smoker = (src.uniform(0.0, 1.0, n) < 0.34).astype(np.float64)

    # Coefficients put most of the label signal on age/weight so that the
    # high-variance directions PCA keeps are also the predictive ones.
    sbp = (
        118.0
        + 1.5 * sex
        + 0.60 * (age - 37.0)
        + 0.18 * (weight - 150.0)
        + 2.0 * smoker
        + 5.0 * src.normal(n, 1)[:, 0]
    )
    dbp = (
        74.0
        + 0.8 * sex
        + 0.38 * (age - 37.0)
        + 0.11 * (weight - 150.0)
        + 1.2 * smoker
        + 4.0 * src.normal(n, 1)[:, 0]
    )
    y = ((sbp >= _SBP_THRESHOLD) | (dbp >= _DBP_THRESHOLD)).astype(np.float64)
    X = np.column_stack([sex, age, weight, smoker])
    return LabeledDataset(X=X, Y=y[:, None], schema=HOSPITAL_SCHEMA)
