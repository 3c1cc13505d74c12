"""Repeated-run benchmark over label-fraction ranges.

Every (dataset, range, run) cell draws one label fraction and one
stratified split from a seed derived from ``(master_seed, dataset index,
range index, run index)``; all algorithms are scored on that same split.
Cells are independent, so they may run in any order or in parallel and
the emitted report is still identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import baselines, psc, sslpso
from .dataset import Dataset, SemiSupervisedSplit, load_csv, mask_labels, normalize_minmax, stratified_quotas
from .metrics import confusion_matrix, f1_per_class, f1_weighted, roc_auc
from .swarm import PsoConfig

log = logging.getLogger(__name__)

ALGORITHMS = ("sspso", "psc", "knn", "dtree", "labelprop")
PROTOCOL_ALGORITHMS = ("dtree", "knn", "labelprop", "sspso")
PROTOCOL_RANGES = ((0.01, 0.10), (0.11, 0.20), (0.21, 0.40), (0.41, 0.90))

# Published mean F1 (30 runs) per label range, columns Tree/KNN/LP/SPSO.
PUBLISHED_F1 = {
    (0.01, 0.10): {
        "haberman": (0.81, 0.82, 0.83, 0.86),
        "titanic": (0.53, 0.48, 0.56, 0.58),
        "pima": (0.74, 0.80, 0.78, 0.89),
        "wisconsin": (0.84, 0.79, 0.87, 0.98),
    },
    (0.11, 0.20): {
        "haberman": (0.81, 0.82, 0.83, 0.88),
        "titanic": (0.58, 0.55, 0.54, 0.59),
        "pima": (0.79, 0.77, 0.80, 0.80),
        "wisconsin": (0.95, 0.95, 0.97, 0.97),
    },
    (0.21, 0.40): {
        "haberman": (0.73, 0.80, 0.82, 0.84),
        "titanic": (0.56, 0.57, 0.54, 0.55),
        "pima": (0.75, 0.78, 0.81, 0.83),
        "wisconsin": (0.94, 0.98, 0.97, 0.98),
    },
    (0.41, 0.90): {
        "haberman": (0.86, 0.80, 0.77, 0.73),
        "titanic": (0.56, 0.77, 0.52, 0.53),
        "pima": (0.78, 0.84, 0.82, 0.83),
        "wisconsin": (0.95, 0.99, 0.98, 0.97),
    },
}


def published_value(dataset, algorithm, rng):
    table = PUBLISHED_F1.get(tuple(rng), {})
    row = table.get(dataset.lower())
    if row is None or algorithm not in PROTOCOL_ALGORITHMS:
        return None
    return row[PROTOCOL_ALGORITHMS.index(algorithm)]


class ConfigError(ValueError):
    pass


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str
    label_column: object = -1
    categorical_columns: tuple = ()
    missing_token: str = "?"

    def load(self) -> Dataset:
        raw = load_csv(self.path, self.label_column, self.categorical_columns, self.missing_token, self.name)
        return normalize_minmax(raw)


@dataclass(frozen=True)
class SspsoParams:
    pso: PsoConfig = PsoConfig()
    n_clusters: int | None = None
    ties: str = "vote"


@dataclass(frozen=True)
class PscParams:
    pso: PsoConfig = PsoConfig()
    variant: str = "psi3"
    psi2_target: str = "true"


@dataclass(frozen=True)
class KnnParams:
    k: int = 3
    ties: str = "vote"


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    algorithms: tuple = PROTOCOL_ALGORITHMS
    ranges: tuple = PROTOCOL_RANGES
    runs_per_range: int = 30
    master_seed: int = 0
    sspso: SspsoParams = SspsoParams()
    psc: PscParams = PscParams()
    knn: KnnParams = KnnParams()
    labelprop: baselines.LabelPropConfig = baselines.LabelPropConfig()
    holdout: float | None = None
    output_dir: str = "results"

    def __post_init__(self):
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.runs_per_range < 1:
            raise ConfigError("runs_per_range must be >= 1")
        for lo, hi in self.ranges:
            if not (0 < lo <= hi <= 1):
                raise ConfigError(f"label range ({lo}, {hi}) must satisfy 0 < low <= high <= 1")
        if self.holdout is not None and not (0 < self.holdout < 1):
            raise ConfigError("holdout must lie in (0, 1)")

    @classmethod
    def from_dict(cls, raw, base_dir="."):
        raw = dict(raw)
        base = Path(base_dir)
        try:
            specs = []
            for d in raw.pop("datasets"):
                d = dict(d)
                path = Path(d.pop("path"))
                if not path.is_absolute():
                    path = base / path
                d["categorical_columns"] = tuple(d.get("categorical_columns", ()))
                specs.append(DatasetSpec(path=str(path), **d))
            kw = {"datasets": tuple(specs)}
            for key in ("algorithms",):
                if key in raw:
                    kw[key] = tuple(raw.pop(key))
            if "ranges" in raw:
                kw["ranges"] = tuple((float(lo), float(hi)) for lo, hi in raw.pop("ranges"))
            for key in ("runs_per_range", "master_seed", "holdout", "output_dir"):
                if key in raw:
                    kw[key] = raw.pop(key)
            if "output_dir" in kw and not Path(kw["output_dir"]).is_absolute():
                kw["output_dir"] = str(base / kw["output_dir"])
            if "sspso" in raw:
                blk = dict(raw.pop("sspso"))
                kw["sspso"] = SspsoParams(
                    pso=_pso_from(blk),
                    n_clusters=blk.pop("n_clusters", None),
                    ties=blk.pop("ties", "vote"),
                )
                _no_leftovers("sspso", blk)
            if "psc" in raw:
                blk = dict(raw.pop("psc"))
                kw["psc"] = PscParams(
                    pso=_pso_from(blk),
                    variant=blk.pop("variant", "psi3"),
                    psi2_target=blk.pop("psi2_target", "true"),
                )
                _no_leftovers("psc", blk)
            if "knn" in raw:
                kw["knn"] = KnnParams(**raw.pop("knn"))
            if "labelprop" in raw:
                kw["labelprop"] = baselines.LabelPropConfig(**raw.pop("labelprop"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc
        if raw:
            raise ConfigError(f"unknown config keys: {sorted(raw)}")
        return cls(**kw)

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self):
        out = asdict(self)
        out["datasets"] = [asdict(d) for d in self.datasets]
        return out


def _pso_from(blk):
    names = {f.name for f in fields(PsoConfig)}
    return PsoConfig(**{k: blk.pop(k) for k in list(blk) if k in names})


def _no_leftovers(name, blk):
    if blk:
        raise ConfigError(f"unknown keys in {name}: {sorted(blk)}")


# -- results -----------------------------------------------------------------

@dataclass
class RunRow:
    dataset: str
    algorithm: str
    range_low: float
    range_high: float
    run: int
    seed: int
    fraction: float
    split_hash: str
    status: str = "ok"
    error: str = ""
    f1_weighted: float = math.nan
    f1_per_class: tuple = ()
    f1_all: float = math.nan
    auc: float = math.nan
    confusion: list = field(default_factory=list)
    roc: list = field(default_factory=list, repr=False)
    wall_ms: float = 0.0

    def binary_counts(self):
        cm = self.confusion
        if len(cm) != 2:
            return ("", "", "", "")
        return (cm[1][1], cm[0][1], cm[1][0], cm[0][0])  # tp, fp, fn, tn


@dataclass
class Aggregate:
    dataset: str
    algorithm: str
    range_low: float
    range_high: float
    runs: int
    failed: int
    f1_mean: float
    f1_std: float
    auc_mean: float
    auc_std: float
    f1_all_mean: float


@dataclass
class EvaluationReport:
    config: dict
    rows: list
    aggregates: list

    @property
    def failed_rows(self):
        return [r for r in self.rows if r.status != "ok"]


def _mean_std(values):
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    arr = np.array(vals)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def aggregate(rows, datasets, algorithms, ranges):
    groups = {}
    for r in rows:
        groups.setdefault((r.dataset, r.algorithm, r.range_low, r.range_high), []).append(r)
    out = []
    for ds in datasets:
        for algo in algorithms:
            for lo, hi in ranges:
                grp = groups.get((ds, algo, lo, hi), [])
                ok = [r for r in grp if r.status == "ok"]
                f1m, f1s = _mean_std([r.f1_weighted for r in ok])
                aucm, aucs = _mean_std([r.auc for r in ok])
                allm, _ = _mean_std([r.f1_all for r in ok])
                out.append(Aggregate(ds, algo, lo, hi, len(ok), len(grp) - len(ok), f1m, f1s, aucm, aucs, allm))
    return out


# -- the protocol ------------------------------------------------------------

def derive_seed(master_seed, *indices):
    """63-bit seed from a counter-based hash of (master_seed, *indices)."""
    ss = np.random.SeedSequence([int(master_seed) % 2**63, *map(int, indices)])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def draw_fraction(lo, hi, seed):
    if lo == hi:
        return float(lo)
    return float(np.random.default_rng(seed).uniform(lo, hi))


def split_hash(split: SemiSupervisedSplit):
    return hashlib.sha256(np.ascontiguousarray(split.labeled_idx, dtype=np.int64).tobytes()).hexdigest()[:16]


def subset(ds: Dataset, idx) -> Dataset:
    return replace(ds, features=ds.features[idx], labels=ds.labels[idx])


def holdout_split(ds: Dataset, fraction, seed):
    """Stratified ``(train_idx, test_idx)`` with ``round(fraction * n)`` test rows."""
    n, c = ds.sample_count, ds.class_count
    n_test = min(max(int(round(fraction * n)), c), n - 2 * c)
    counts = np.bincount(ds.labels, minlength=c)
    quota = stratified_quotas(counts, n_test)
    rng = np.random.default_rng(seed)
    test = np.sort(np.concatenate([
        rng.choice(np.flatnonzero(ds.labels == k), size=int(quota[k]), replace=False) for k in range(c)
    ]))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def _empty(c):
    return np.zeros(0, dtype=np.int64), np.zeros((0, c))


def transductive(algo, cfg: ExperimentConfig, split: SemiSupervisedSplit, seed):
    """Predicted labels and ``u x C`` scores for the unlabeled rows of ``split``."""
    data = split.dataset
    c = data.class_count
    xl, yl = split.labeled_features(), split.labeled_labels()
    xu = data.features[split.unlabeled_idx]
    if algo == "labelprop":
        res = baselines.labelprop_transduce(split, cfg.labelprop)
        return res.labels, res.scores[split.unlabeled_idx]
    if algo == "sspso":
        model = sslpso.fit(split, replace(cfg.sspso.pso, seed=seed), cfg.sspso.n_clusters, cfg.sspso.ties)
        if split.u == 0:
            return _empty(c)
        labels = sslpso.resolve_impure(model, split)
        return labels, sslpso.predict_many(model, xu)[1]
    return inductive(algo, cfg, split, xu, seed)


def inductive(algo, cfg: ExperimentConfig, split: SemiSupervisedSplit, queries, seed):
    """Train on ``split`` and predict unseen rows ``queries``."""
    data = split.dataset
    c = data.class_count
    xl, yl = split.labeled_features(), split.labeled_labels()
    if len(queries) == 0 and algo != "sspso":
        return _empty(c)
    if algo == "sspso":
        model = sslpso.fit(split, replace(cfg.sspso.pso, seed=seed), cfg.sspso.n_clusters, cfg.sspso.ties)
        return sslpso.predict_many(model, queries) if len(queries) else _empty(c)
    if algo == "psc":
        model = psc.psc_fit(xl, yl, replace(cfg.psc.pso, seed=seed), cfg.psc.variant, c, cfg.psc.psi2_target)
        return psc.psc_predict_many(model, queries), psc.psc_scores(model, queries)
    if algo == "knn":
        k = min(cfg.knn.k, split.l)
        votes = baselines.knn_votes(xl, yl, queries, k, c, cfg.knn.ties)
        return np.argmax(votes, axis=1), votes / k
    if algo == "dtree":
        tree = baselines.DecisionTree().fit(xl, yl, c)
        return tree.predict(queries), tree.predict_proba(queries)
    if algo == "labelprop":
        raise ValueError("label propagation only labels nodes of its graph")
    raise ValueError(f"unknown algorithm {algo!r}")


def _score_row(row, truth, pred, scores, c, full_truth=None, full_pred=None):
    row.f1_weighted = f1_weighted(truth, pred, c) if truth.size else math.nan
    row.f1_per_class = tuple(float(v) for v in f1_per_class(truth, pred, c)) if truth.size else ()
    if full_truth is not None:
        row.f1_all = f1_weighted(full_truth, full_pred, c)
    row.confusion = confusion_matrix(truth, pred, c).tolist()
    if c == 2 and truth.size and 0 < truth.sum() < truth.size:
        curve = roc_auc(truth == 1, scores[:, 1])
        row.auc = curve.auc
        row.roc = curve.points


def run_cell(cfg: ExperimentConfig, d_idx, ds: Dataset, r_idx, run):
    """All algorithms on one (dataset, range, run) split.

    Transductive mode scores the unlabeled rows. With ``cfg.holdout`` a
    stratified test set is set aside first; label propagation sees the test
    rows as extra unlabeled graph nodes, the other models predict them as
    unseen points.
    """
    lo, hi = cfg.ranges[r_idx]
    seed = derive_seed(cfg.master_seed, d_idx, r_idx, run)
    fraction = draw_fraction(lo, hi, derive_seed(seed, 1))
    c = ds.class_count

    test_idx = None
    if cfg.holdout:
        train_idx, test_idx = holdout_split(ds, cfg.holdout, derive_seed(seed, 2))
        train_split = mask_labels(subset(ds, train_idx), fraction, seed)
        lab = train_idx[train_split.labeled_idx]
        graph_split = SemiSupervisedSplit(ds, lab, np.setdiff1d(np.arange(ds.sample_count), lab))
        test_pos = np.searchsorted(graph_split.unlabeled_idx, test_idx)
        hashed = graph_split
    else:
        split = mask_labels(ds, fraction, seed)
        hashed = split

    rows = []
    for algo in cfg.algorithms:
        row = RunRow(ds.name, algo, lo, hi, run, seed, fraction, split_hash(hashed))
        t0 = time.perf_counter()
        try:
            if test_idx is None:
                pred, scores = transductive(algo, cfg, split, seed)
                full = ds.labels.copy()
                full[split.unlabeled_idx] = pred
                _score_row(row, ds.labels[split.unlabeled_idx], pred, scores, c, ds.labels, full)
            elif algo == "labelprop":
                pred, scores = transductive(algo, cfg, graph_split, seed)
                _score_row(row, ds.labels[test_idx], pred[test_pos], scores[test_pos], c)
            else:
                pred, scores = inductive(algo, cfg, train_split, ds.features[test_idx], seed)
                _score_row(row, ds.labels[test_idx], pred, scores, c)
        except Exception as exc:  # one failed algorithm must not sink the experiment
            log.warning("%s/%s range %s run %d failed: %s", ds.name, algo, (lo, hi), run, exc)
            row.status, row.error = "failed", f"{type(exc).__name__}: {exc}"
        row.wall_ms = (time.perf_counter() - t0) * 1000.0
        rows.append(row)
    return rows


def _run_cell_job(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, workers=1, progress=None) -> EvaluationReport:
    """Run the full protocol and collect per-run rows plus aggregates.

    Raises
    ------
    sswarm.dataset.DatasetError
        If any dataset cannot be loaded.
    """
    loaded = [spec.load() for spec in cfg.datasets]
    jobs = [
        (cfg, d_idx, ds, r_idx, run)
        for d_idx, ds in enumerate(loaded)
        for r_idx in range(len(cfg.ranges))
        for run in range(cfg.runs_per_range)
    ]
    results = {}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            for job, rows in zip(jobs, pool.map(_run_cell_job, jobs, chunksize=4)):
                results[job[1], job[3], job[4]] = rows
                if progress:
                    progress(len(results), len(jobs))
    else:
        for job in jobs:
            results[job[1], job[3], job[4]] = run_cell(*job)
            if progress:
                progress(len(results), len(jobs))

    rows = []
    algo_pos = {a: i for i, a in enumerate(cfg.algorithms)}
    for d_idx in range(len(loaded)):
        cell_rows = [
            r for (d, ri, run), rs in sorted(results.items()) if d == d_idx for r in rs
        ]
        # canonical order: dataset, algorithm, range, run
        range_pos = {rng: i for i, rng in enumerate(cfg.ranges)}
        cell_rows.sort(key=lambda r: (algo_pos[r.algorithm], range_pos[(r.range_low, r.range_high)], r.run))
        rows.extend(cell_rows)
    names = [ds.name for ds in loaded]
    return EvaluationReport(
        config=cfg.to_dict(),
        rows=rows,
        aggregates=aggregate(rows, names, cfg.algorithms, cfg.ranges),
    )


# -- emission ------------------------------------------------------------------

ROW_FIELDS = (
    "dataset", "algorithm", "range_low", "range_high", "run", "seed", "fraction",
    "f1_weighted", "f1_class0", "f1_class1", "auc", "tp", "fp", "fn", "tn",
    "f1_all", "split_hash", "status",
)
ROC_FIELDS = ("dataset", "algorithm", "range_low", "range_high", "run", "fpr", "tpr", "threshold")
AGG_FIELDS = (
    "dataset", "algorithm", "range_low", "range_high", "runs", "failed",
    "f1_mean", "f1_std", "auc_mean", "auc_std", "f1_all_mean",
)


def _num(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def range_tag(lo, hi):
    return f"{round(lo * 100):02d}-{round(hi * 100):02d}"


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def emit_report(report: EvaluationReport, out_dir, formats=("csv", "json")):
    """Write the report files into ``out_dir`` and return their paths.

    CSV output: ``rows.csv`` (one line per run and algorithm), ``roc.csv``
    (curve points), ``aggregates.csv`` (full precision), one
    ``table_<lo>-<hi>.csv`` per label range with two-decimal mean F1 in the
    published table layout, and ``published_comparison.csv``. JSON output:
    ``report.json`` with everything at full precision, wall-clock times
    included. The CSVs carry no timing data, so they are byte-identical
    across reruns with the same configuration.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    cfg = report.config
    algorithms = list(cfg["algorithms"])
    ranges = [tuple(r) for r in cfg["ranges"]]
    datasets = [d["name"] for d in cfg["datasets"]]
    n_class_cols = max([2] + [len(r.f1_per_class) for r in report.rows])
    row_fields = list(ROW_FIELDS)
    extra = [f"f1_class{k}" for k in range(2, n_class_cols)]
    row_fields[10:10] = extra
    written = []

    if "csv" in formats:
        fh, w = _writer(out / "rows.csv")
        with fh:
            w.writerow(row_fields)
            for r in report.rows:
                per = list(r.f1_per_class) + [math.nan] * (n_class_cols - len(r.f1_per_class))
                vals = [r.dataset, r.algorithm, r.range_low, r.range_high, r.run, r.seed, r.fraction,
                        r.f1_weighted, *per, r.auc, *r.binary_counts(), r.f1_all, r.split_hash, r.status]
                w.writerow([_num(v) for v in vals])
        written.append(out / "rows.csv")

        fh, w = _writer(out / "roc.csv")
        with fh:
            w.writerow(ROC_FIELDS)
            for r in report.rows:
                for fpr, tpr, thr in r.roc:
                    w.writerow([_num(v) for v in (r.dataset, r.algorithm, r.range_low, r.range_high, r.run, fpr, tpr, thr)])
        written.append(out / "roc.csv")

        fh, w = _writer(out / "aggregates.csv")
        with fh:
            w.writerow(AGG_FIELDS)
            for a in report.aggregates:
                w.writerow([_num(getattr(a, f)) for f in AGG_FIELDS])
        written.append(out / "aggregates.csv")

        lookup = {(a.dataset, a.algorithm, a.range_low, a.range_high): a for a in report.aggregates}
        for lo, hi in ranges:
            path = out / f"table_{range_tag(lo, hi)}.csv"
            fh, w = _writer(path)
            with fh:
                w.writerow(["dataset", *algorithms])
                for ds in datasets:
                    cells = []
                    for algo in algorithms:
                        a = lookup.get((ds, algo, lo, hi))
                        cells.append("" if a is None or math.isnan(a.f1_mean) else f"{a.f1_mean:.2f}")
                    w.writerow([ds, *cells])
            written.append(path)

        fh, w = _writer(out / "published_comparison.csv")
        with fh:
            w.writerow(["dataset", "algorithm", "range_low", "range_high", "f1_mean", "published_f1"])
            for a in report.aggregates:
                ref = published_value(a.dataset, a.algorithm, (a.range_low, a.range_high))
                w.writerow([a.dataset, a.algorithm, _num(a.range_low), _num(a.range_high),
                            "" if math.isnan(a.f1_mean) else f"{a.f1_mean:.2f}",
                            "" if ref is None else f"{ref:.2f}"])
        written.append(out / "published_comparison.csv")

    if "json" in formats:
        doc = {
            "config": cfg,
            "rows": [_row_json(r) for r in report.rows],
            "aggregates": [asdict(a) for a in report.aggregates],
        }
        path = out / "report.json"
        path.write_text(json.dumps(doc, indent=1, default=_json_default) + "\n", encoding="utf-8")
        written.append(path)
    return written


def _row_json(r: RunRow):
    d = asdict(r)
    d["roc"] = [list(p) for p in r.roc]
    return d


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def format_tables(report: EvaluationReport, with_published=True):
    """Plain-text rendering of the per-range tables, next to published values."""
    cfg = report.config
    algorithms = list(cfg["algorithms"])
    lookup = {(a.dataset, a.algorithm, a.range_low, a.range_high): a for a in report.aggregates}
    lines = []
    for lo, hi in (tuple(r) for r in cfg["ranges"]):
        lines.append(f"labels {lo * 100:g}-{hi * 100:g}%  (mean weighted F1; published value in brackets)")
        lines.append("  " + "dataset".ljust(12) + "".join(a.rjust(16) for a in algorithms))
        for ds in (d["name"] for d in cfg["datasets"]):
            cells = []
            for algo in algorithms:
                a = lookup.get((ds, algo, lo, hi))
                ref = published_value(ds, algo, (lo, hi)) if with_published else None
                txt = "-" if a is None or math.isnan(a.f1_mean) else f"{a.f1_mean:.2f}"
                if ref is not None:
                    txt += f" [{ref:.2f}]"
                cells.append(txt.rjust(16))
            lines.append("  " + ds.ljust(12) + "".join(cells))
        lines.append("")
    return "\n".join(lines)
