"""Flat-text model files.

A model file is UTF-8 text: a ``sswarm-model,<version>`` header line, a
``kind,<tag>`` line, then named blocks. Each block starts with a
``[name]`` line followed by CSV rows. Floats are written with ``repr`` so
they round-trip exactly. Besides the fitted parameters, the file carries
the training columns (names, min-max range, category vocabularies) and
class names so raw CSV rows can be scored later.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .psc import PscModel
from .sslpso import ClusterLabelModel

FORMAT_VERSION = 1
MAGIC = "sswarm-model"


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    """What a raw row must look like and how it gets scaled."""

    feature_names: tuple
    class_names: tuple
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None
    categories: dict = None

    @classmethod
    def from_dataset(cls, ds):
        return cls(ds.feature_names, ds.class_names, ds.feature_min, ds.feature_max, dict(ds.categories))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _block(w, name, rows):
    w.writerow([f"[{name}]"])
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def dumps(model, schema: FeatureSchema | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([MAGIC, FORMAT_VERSION])
    if isinstance(model, ClusterLabelModel):
        w.writerow(["kind", "cluster_label"])
        _block(w, "meta", [
            ("fitness_achieved", model.fitness_achieved),
            ("n_classes", model.n_classes),
            ("ties", model.ties),
        ])
        _block(w, "centroids", model.centroids)
        _block(w, "cluster_class", [[v] for v in model.cluster_class])
        _block(w, "cluster_pure", [[bool(v)] for v in model.cluster_pure])
        bound = model.bound_classes if model.bound_classes is not None else model.cluster_class
        _block(w, "bound_classes", [[v] for v in bound])
        _block(w, "anchors", [list(x) + [y] for x, y in zip(model.anchor_features, model.anchor_labels)])
    elif isinstance(model, PscModel):
        w.writerow(["kind", "psc"])
        _block(w, "meta", [
            ("fitness_variant", model.fitness_variant),
            ("training_fitness", model.training_fitness),
        ])
        _block(w, "centroids", model.class_centroids)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if schema is not None:
        _block(w, "classes", [[c] for c in schema.class_names])
        rows = []
        for j, name in enumerate(schema.feature_names):
            lo = schema.feature_min[j] if schema.feature_min is not None else ""
            hi = schema.feature_max[j] if schema.feature_max is not None else ""
            cats = (schema.categories or {}).get(j)
            rows.append([name, lo, hi, "|".join(cats) if cats is not None else ""])
        _block(w, "features", rows)
    return buf.getvalue()


def _parse(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != [MAGIC, str(FORMAT_VERSION)]:
        raise ModelFormatError("not an sswarm model file (or unsupported version)")
    if len(rows) < 2 or rows[1][0] != "kind":
        raise ModelFormatError("missing kind line")
    kind = rows[1][1]
    blocks, current = {}, None
    for r in rows[2:]:
        if len(r) == 1 and r[0].startswith("[") and r[0].endswith("]"):
            current = r[0][1:-1]
            blocks[current] = []
        elif current is None:
            raise ModelFormatError("data outside of a block")
        else:
            blocks[current].append(r)
    return kind, blocks


def _matrix(rows):
    return np.array([[float(v) for v in r] for r in rows], dtype=float)


def loads(text):
    """Return ``(model, schema_or_None)``."""
    kind, blocks = _parse(text)
    try:
        meta = {k: v for k, v in blocks["meta"]}
        if kind == "cluster_label":
            anchors = blocks["anchors"]
            model = ClusterLabelModel(
                centroids=_matrix(blocks["centroids"]),
                cluster_class=np.array([int(r[0]) for r in blocks["cluster_class"]]),
                cluster_pure=np.array([r[0] == "1" for r in blocks["cluster_pure"]]),
                anchor_features=_matrix([r[:-1] for r in anchors]),
                anchor_labels=np.array([int(r[-1]) for r in anchors], dtype=np.int64),
                fitness_achieved=float(meta["fitness_achieved"]),
                n_classes=int(meta["n_classes"]),
                bound_classes=np.array([int(r[0]) for r in blocks["bound_classes"]]),
                ties=meta.get("ties", "vote"),
            )
        elif kind == "psc":
            model = PscModel(
                class_centroids=_matrix(blocks["centroids"]),
                fitness_variant=meta["fitness_variant"],
                training_fitness=float(meta["training_fitness"]),
            )
        else:
            raise ModelFormatError(f"unknown model kind {kind!r}")
    except (KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from exc

    schema = None
    if "features" in blocks:
        names, lo, hi, cats = [], [], [], {}
        for j, (name, mn, mx, cat) in enumerate(blocks["features"]):
            names.append(name)
            lo.append(float(mn) if mn else np.nan)
            hi.append(float(mx) if mx else np.nan)
            if cat:
                cats[j] = tuple(cat.split("|"))
        scaled = not np.isnan(lo).any()
        schema = FeatureSchema(
            feature_names=tuple(names),
            class_names=tuple(r[0] for r in blocks.get("classes", [])),
            feature_min=np.array(lo) if scaled else None,
            feature_max=np.array(hi) if scaled else None,
            categories=cats,
        )
    return model, schema


def save(model, path, schema: FeatureSchema | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps(model, schema))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
