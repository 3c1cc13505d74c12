"""CSV ingestion, min-max scaling and stratified label masking."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for unreadable, malformed or unusable dataset input."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with integer class labels.

    ``labels`` holds indices into ``class_names``. ``categories`` maps a
    feature column index to its category vocabulary (code == list position),
    and ``feature_min``/``feature_max`` are set once the dataset has been
    min-max normalized, so unseen rows can be scaled the same way.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()
    feature_names: tuple = ()
    categories: dict = field(default_factory=dict)
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None

    def __post_init__(self):
        x = _frozen(self.features, float)
        y = _frozen(self.labels, np.int64)
        if x.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if y.shape != (x.shape[0],):
            raise DatasetError("labels must have one entry per row")
        n, d = x.shape
        if n < 2 or d < 1:
            raise DatasetError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if y.min() < 0:
            raise DatasetError("labels must be non-negative class indices")
        c = int(y.max()) + 1
        if c < 2:
            raise DatasetError("need at least two classes")
        if np.bincount(y, minlength=c).min() < 1:
            raise DatasetError("every class index must occur at least once")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        if not self.class_names:
            object.__setattr__(self, "class_names", tuple(str(k) for k in range(c)))
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"x{j}" for j in range(d)))
        if len(self.class_names) != c:
            raise DatasetError("class_names does not match the label range")

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def scale(self, x):
        """Apply this dataset's min-max transform to raw feature rows."""
        if self.feature_min is None:
            return np.asarray(x, dtype=float)
        return _minmax_apply(np.asarray(x, dtype=float), self.feature_min, self.feature_max)


@dataclass(frozen=True, eq=False)
class SemiSupervisedSplit:
    dataset: Dataset
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray

    def __post_init__(self):
        lab = _frozen(self.labeled_idx, np.int64)
        unl = _frozen(self.unlabeled_idx, np.int64)
        n = self.dataset.sample_count
        both = np.concatenate([lab, unl])
        if both.size != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise DatasetError("labeled and unlabeled indices must partition 0..n-1")
        y = self.dataset.labels[lab]
        if np.unique(y).size != self.dataset.class_count:
            raise DatasetError("every class needs at least one labeled member")
        object.__setattr__(self, "labeled_idx", lab)
        object.__setattr__(self, "unlabeled_idx", unl)

    @property
    def l(self) -> int:
        return self.labeled_idx.size

    @property
    def u(self) -> int:
        return self.unlabeled_idx.size

    def labeled_features(self):
        return self.dataset.features[self.labeled_idx]

    def labeled_labels(self):
        return self.dataset.labels[self.labeled_idx]


def _parse_float(tok):
    try:
        v = float(tok)
    except ValueError:
        return None
    return v


def load_csv(path, label_column=-1, categorical_columns=None, missing_token="?", name=None):
    """Read a UCI-style CSV with a header row.

    Parameters
    ----------
    path : str or Path
    label_column : str or int
        Header name or position (negative positions count from the end).
    categorical_columns : iterable of str or int, optional
        Columns to integer-encode by order of first appearance.
    missing_token : str
        Marker for a missing value; numeric columns get the column median.
    name : str, optional
        Dataset name, defaults to the file stem.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DatasetError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    body = [[tok.strip() for tok in r] for r in rows[1:]]
    width = len(header)
    for lineno, r in enumerate(body, start=2):
        if len(r) != width:
            raise DatasetError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")

    def resolve(col):
        if isinstance(col, str) and col in header:
            return header.index(col)
        if isinstance(col, str):
            try:
                col = int(col)
            except ValueError:
                raise DatasetError(f"{path}: no column named {col!r}") from None
        if -width <= col < width:
            return col % width
        raise DatasetError(f"{path}: column index {col} out of range")

    label_j = resolve(label_column)
    categorical = {resolve(c) for c in (categorical_columns or ())}

    class_names, labels = [], []
    for r in body:
        tok = r[label_j]
        if tok == missing_token or tok == "":
            raise DatasetError(f"{path}: missing class label")
        if tok not in class_names:
            class_names.append(tok)
        labels.append(class_names.index(tok))

    feature_cols = [j for j in range(width) if j != label_j]
    columns, vocab = [], {}
    for out_j, j in enumerate(feature_cols):
        raw = [r[j] for r in body]
        if j in categorical:
            seen = {}
            columns.append([seen.setdefault(tok, len(seen)) for tok in raw])
            vocab[out_j] = tuple(seen)
            continue
        vals = []
        for tok in raw:
            if tok == missing_token:
                vals.append(math.nan)
                continue
            v = _parse_float(tok)
            if v is None:
                raise DatasetError(
                    f"{path}: column {header[j]!r} has non-numeric value {tok!r}; "
                    "declare it categorical"
                )
            vals.append(v)
        col = np.array(vals)
        holes = np.isnan(col)
        if holes.all():
            raise DatasetError(f"{path}: column {header[j]!r} has no observed values")
        if holes.any():
            col[holes] = np.median(col[~holes])
        columns.append(col)

    features = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    return Dataset(
        name=name or path.stem,
        features=features,
        labels=np.array(labels),
        class_names=tuple(class_names),
        feature_names=tuple(header[j] for j in feature_cols),
        categories=vocab,
    )


def _minmax_apply(x, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = (x - lo) / safe
    return np.where(span > 0, out, 0.0)


def normalize_minmax(raw: Dataset) -> Dataset:
    """Map every column onto [0, 1]; constant columns become zeros."""
    x = raw.features
    if not np.isfinite(x).all():
        raise DatasetError("cannot normalize non-finite feature values")
    lo, hi = x.min(axis=0), x.max(axis=0)
    scaled = _minmax_apply(x, lo, hi)
    # guard against 1 - eps from rounding at the column maximum
    scaled = np.clip(scaled, 0.0, 1.0)
    if raw.feature_min is not None:
        # compose with an earlier transform so .scale() still takes raw rows
        prev_span = raw.feature_max - raw.feature_min
        lo, hi = raw.feature_min + lo * prev_span, raw.feature_min + hi * prev_span
    return replace(raw, features=scaled, feature_min=_frozen(lo, float), feature_max=_frozen(hi, float))


def stratified_quotas(counts, total):
    """Per-class sample quotas summing to ``total``.

    Each class gets at least one slot; the rest is shared in proportion to
    class frequency (floor), and the leftover goes to the largest classes
    first (ties toward the lower class index).
    """
    counts = np.asarray(counts, dtype=np.int64)
    c, n = counts.size, int(counts.sum())
    if total < c or total > n:
        raise DatasetError(f"cannot draw {total} stratified samples from {c} classes / {n} rows")
    quota = np.maximum(np.floor(total * counts / n).astype(np.int64), 1)
    quota = np.minimum(quota, counts)
    order = sorted(range(c), key=lambda k: (-counts[k], k))
    while quota.sum() > total:
        for k in reversed(order):
            if quota[k] > 1 and quota.sum() > total:
                quota[k] -= 1
    while quota.sum() < total:
        for k in order:
            if quota[k] < counts[k] and quota.sum() < total:
                quota[k] += 1
    return quota


def mask_labels(data: Dataset, fraction: float, seed: int) -> SemiSupervisedSplit:
    """Stratified labeled/unlabeled split keeping ``max(floor(fraction*n), C)`` labels."""
    if not (0.0 < fraction <= 1.0):
        raise DatasetError(f"fraction must lie in (0, 1], got {fraction}")
    n, c = data.sample_count, data.class_count
    if fraction * n < c:
        raise DatasetError(f"fraction {fraction} of n={n} leaves fewer labels than classes ({c})")
    total = max(int(math.floor(fraction * n)), c)
    counts = np.bincount(data.labels, minlength=c)
    quota = stratified_quotas(counts, total)
    rng = np.random.default_rng(int(seed) % 2**64)
    picked = []
    for k in range(c):
        members = np.flatnonzero(data.labels == k)
        picked.append(rng.choice(members, size=int(quota[k]), replace=False))
    labeled = np.sort(np.concatenate(picked))
    mask = np.ones(n, dtype=bool)
    mask[labeled] = False
    return SemiSupervisedSplit(data, labeled, np.flatnonzero(mask))
