"""Run the four-dataset protocol and print the F1 tables beside the published ones.

    python scripts/reproduce_tables.py [--config configs/protocol.json] [--out results/protocol]
                                       [--runs N] [--workers W]
"""
import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from sswarm.harness import ExperimentConfig, emit_report, format_tables, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "protocol.json"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--runs", type=int, default=None, help="override runs per range")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ExperimentConfig.from_json(args.config)
    if args.runs:
        cfg = replace(cfg, runs_per_range=args.runs)
    t0 = time.perf_counter()
    report = run_experiment(
        cfg, workers=args.workers,
        progress=lambda done, total: done % 40 == 0 and logging.info("%d/%d", done, total),
    )
    out = args.out or cfg.output_dir
    for p in emit_report(report, out):
        logging.info("wrote %s", p)
    print(format_tables(report))
    print(f"{len(report.rows)} rows, {len(report.failed_rows)} failed, {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
