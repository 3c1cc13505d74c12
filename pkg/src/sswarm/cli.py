"""Command line entry point: ``sswarm {bench,run,fit,predict}``.

Exit codes: 0 success, 1 configuration or data error, 2 finished with
failed runs recorded in the report.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import modelio, psc, sslpso
from .dataset import DatasetError, load_csv, mask_labels, normalize_minmax
from .harness import (
    ALGORITHMS,
    ConfigError,
    DatasetSpec,
    ExperimentConfig,
    KnnParams,
    SspsoParams,
    emit_report,
    format_tables,
    run_experiment,
)
from .swarm import PsoConfig

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
log = logging.getLogger("sswarm")


def _fraction_range(text):
    try:
        if ":" in text:
            lo, hi = (float(v) for v in text.split(":", 1))
        else:
            lo = hi = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x or lo:hi, got {text!r}") from None
    if not 0 < lo <= hi <= 1:
        raise argparse.ArgumentTypeError("label fractions must satisfy 0 < lo <= hi <= 1")
    return lo, hi


def _columns(text):
    return tuple(c for c in text.split(",") if c) if text else ()


def _progress(done, total):
    if done == total or done % max(1, total // 20) == 0:
        log.info("%d/%d cells done", done, total)


def _finish(report, out_dir):
    paths = emit_report(report, out_dir)
    print(format_tables(report))
    for p in paths:
        log.info("wrote %s", p)
    failed = report.failed_rows
    if failed:
        log.warning("%d run(s) failed; see status column in rows.csv", len(failed))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_bench(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.runs is not None:
        cfg = replace(cfg, runs_per_range=args.runs)
    out = args.out or cfg.output_dir
    report = run_experiment(cfg, workers=args.workers, progress=_progress)
    return _finish(report, out)


def cmd_run(args):
    spec = DatasetSpec(
        name=Path(args.dataset).stem,
        path=args.dataset,
        label_column=args.label_col,
        categorical_columns=_columns(args.categorical),
    )
    pso = PsoConfig(seed=args.seed)
    cfg = ExperimentConfig(
        datasets=(spec,),
        algorithms=tuple(args.algo),
        ranges=(args.label_frac,),
        runs_per_range=args.runs,
        master_seed=args.seed,
        sspso=SspsoParams(pso=pso, n_clusters=args.K),
        knn=KnnParams(k=args.k),
        holdout=args.holdout,
        output_dir=args.out,
    )
    report = run_experiment(cfg, workers=args.workers, progress=_progress)
    return _finish(report, args.out)


def cmd_fit(args):
    raw = load_csv(args.dataset, args.label_col, _columns(args.categorical))
    data = normalize_minmax(raw)
    split = mask_labels(data, args.label_frac, args.seed)
    pso = PsoConfig(seed=args.seed, max_iterations=args.iterations)
    if args.algo == "sspso":
        model = sslpso.fit(split, pso, args.K)
        log.info("fitted %d clusters, mean silhouette %.4f", model.n_clusters, model.fitness_achieved)
    else:
        model = psc.psc_fit(split.labeled_features(), split.labeled_labels(), pso, args.variant, data.class_count)
        log.info("fitted class centroids, %s = %.4f", model.fitness_variant, model.training_fitness)
    modelio.save(model, args.model, modelio.FeatureSchema.from_dataset(data))
    log.info("wrote %s", args.model)
    return EXIT_OK


def _encode_rows(path, schema):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DatasetError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [n for n in schema.feature_names if n not in header]
    if missing:
        raise DatasetError(f"{path}: missing feature columns {missing}")
    cols = [header.index(n) for n in schema.feature_names]
    x = np.empty((len(rows) - 1, len(cols)))
    for i, r in enumerate(rows[1:]):
        for out_j, j in enumerate(cols):
            tok = r[j].strip()
            vocab = (schema.categories or {}).get(out_j)
            if vocab is not None:
                if tok not in vocab:
                    raise DatasetError(f"{path}:{i + 2}: unknown category {tok!r} in {header[j]!r}")
                x[i, out_j] = vocab.index(tok)
            else:
                try:
                    x[i, out_j] = float(tok)
                except ValueError:
                    raise DatasetError(f"{path}:{i + 2}: non-numeric value {tok!r} in {header[j]!r}") from None
    if schema.feature_min is not None:
        span = schema.feature_max - schema.feature_min
        x = np.where(span > 0, (x - schema.feature_min) / np.where(span > 0, span, 1.0), 0.0)
    return x


def cmd_predict(args):
    model, schema = modelio.load(args.model)
    if schema is None:
        raise DatasetError("model file has no feature schema; cannot read raw rows")
    x = _encode_rows(args.input, schema)
    if isinstance(model, sslpso.ClusterLabelModel):
        labels, scores = sslpso.predict_many(model, x)
    else:
        labels, scores = psc.psc_predict_many(model, x), psc.psc_scores(model, x)
    names = schema.class_names or tuple(str(k) for k in range(scores.shape[1]))
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["row", "predicted", *(f"score_{n}" for n in names)])
        for i, (lab, sc) in enumerate(zip(labels, scores)):
            w.writerow([i, names[lab], *(repr(float(v)) for v in sc)])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="sswarm", description="Semi-supervised particle swarm classification.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the full protocol described by a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="output directory (default: output_dir from the config)")
    b.add_argument("--runs", type=int, help="override runs_per_range")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("run", help="repeated runs on a single dataset")
    r.add_argument("--dataset", required=True)
    r.add_argument("--label-col", default="-1")
    r.add_argument("--categorical", default="", help="comma-separated categorical columns")
    r.add_argument("--algo", action="append", choices=ALGORITHMS, required=True,
                   help="repeat to evaluate several algorithms on the same splits")
    r.add_argument("--label-frac", type=_fraction_range, required=True, help="x or lo:hi")
    r.add_argument("--runs", type=int, default=30)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--k", type=int, default=3)
    r.add_argument("--K", type=int, default=None, help="number of clusters for sspso")
    r.add_argument("--holdout", type=float, default=None)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fit", help="train a model and write it to a file")
    f.add_argument("--dataset", required=True)
    f.add_argument("--label-col", default="-1")
    f.add_argument("--categorical", default="")
    f.add_argument("--algo", choices=("sspso", "psc"), default="sspso")
    f.add_argument("--label-frac", type=float, default=1.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--K", type=int, default=None)
    f.add_argument("--variant", choices=psc.VARIANTS, default="psi3")
    f.add_argument("--iterations", type=int, default=PsoConfig().max_iterations)
    f.add_argument("--model", required=True)
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="apply a saved model to a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, DatasetError, modelio.ModelFormatError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
