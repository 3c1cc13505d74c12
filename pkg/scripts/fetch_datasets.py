"""Rebuild data/*.csv from redistributable copies of the UCI benchmark files.

The UCI archive itself is not always reachable, so the four benchmark
datasets are pulled out of Python wheels that vendor them:

* haberman, pima  -- ``keel-ds`` (KEEL repository exports of the UCI files)
* titanic         -- ``Orange3`` (the 2201-passenger class/age/sex table)
* wisconsin       -- ``pydataset`` (R MASS ``biopsy``, i.e. the original
                     699-row breast-cancer-wisconsin.data with IDs and the 16
                     missing Bare Nuclei values)

Usage::

    python scripts/fetch_datasets.py [--out data]
"""
import argparse
import csv
import io
import subprocess
import sys
import tarfile
import tempfile
import zipfile
from pathlib import Path

HABERMAN_COLS = ["Age", "OperationYear", "PositiveAxillaryNodes", "Survival"]
PIMA_COLS = [
    "Pregnancies", "Glucose", "BloodPressure", "SkinThickness",
    "Insulin", "BMI", "DiabetesPedigree", "Age", "Outcome",
]
WISCONSIN_COLS = [
    "SampleCodeNumber", "ClumpThickness", "UniformityCellSize",
    "UniformityCellShape", "MarginalAdhesion", "SingleEpithelialCellSize",
    "BareNuclei", "BlandChromatin", "NormalNucleoli", "Mitoses", "Class",
]


def _download(pkg, dest, attempts=3, cache=None):
    if cache is not None:
        hit = [p for p in Path(cache).iterdir() if p.name.lower().startswith(pkg.lower().replace("-", "_"))]
        if hit:
            return hit[0]
    cmd = [sys.executable, "-m", "pip", "download", pkg, "--no-deps", "-d", str(dest)]
    for attempt in range(attempts):
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode == 0:
            break
        if attempt == attempts - 1:
            sys.exit(f"pip download {pkg} failed:\n{proc.stderr}")
    return next(p for p in dest.iterdir() if p.name.lower().startswith(pkg.lower().replace("-", "_")))


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def _keel_rows(blob):
    rows = []
    for line in blob.decode().splitlines():
        line = line.strip()
        if line and not line.startswith("@"):
            rows.append([tok.strip() for tok in line.split(",")])
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--wheels", help="directory of already-downloaded wheels/sdists to reuse")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        keel = zipfile.ZipFile(_download("keel-ds", tmp, cache=args.wheels))
        rows = _keel_rows(keel.read("keel_ds/data/imbalanced/raw/haberman.dat"))
        # KEEL renames the UCI survival codes: negative == 1 (survived), positive == 2
        coding = {"negative": "1", "positive": "2"}
        _write(out / "haberman.csv", HABERMAN_COLS, [r[:3] + [coding[r[3]]] for r in rows])

        rows = _keel_rows(keel.read("keel_ds/data/balanced/raw/pima.dat"))
        _write(out / "pima.csv", PIMA_COLS, rows)

        orange = zipfile.ZipFile(_download("Orange3", tmp, cache=args.wheels))
        lines = orange.read("Orange/datasets/titanic.tab").decode().splitlines()
        rows = [ln.split("\t") for ln in lines[3:] if ln.strip()]
        _write(out / "titanic.csv", ["Class", "Age", "Sex", "Survived"], rows)

        pyds = tarfile.open(_download("pydataset", tmp, cache=args.wheels))
        member = next(m for m in pyds.getnames() if m.endswith("resources.tar.gz"))
        inner = tarfile.open(fileobj=io.BytesIO(pyds.extractfile(member).read()))
        text = inner.extractfile("resources/rdata/csv/MASS/biopsy.csv").read().decode()
        rows = []
        for rec in list(csv.reader(io.StringIO(text)))[1:]:
            vals = ["?" if v == "NA" else v for v in rec[1:11]]
            rows.append(vals + ["2" if rec[11] == "benign" else "4"])
        _write(out / "wisconsin.csv", WISCONSIN_COLS, rows)


if __name__ == "__main__":
    main()
