import numpy as np
import pytest

from conftest import blobs, make_split
from sswarm import modelio, sslpso
from sswarm.dataset import load_csv, normalize_minmax
from sswarm.psc import psc_fit
from sswarm.swarm import PsoConfig


def test_cluster_model_round_trip(tmp_path):
    x, y = blobs(0, n_per=15)
    sp = make_split(np.clip(x, 0, 1), y, [0, 1, 15, 16])
    model = sslpso.fit(sp, PsoConfig(seed=0), n_clusters=3)
    path = tmp_path / "m.txt"
    modelio.save(model, path)
    back, schema = modelio.load(path)
    assert schema is None
    for f in ("centroids", "cluster_class", "cluster_pure", "anchor_features", "anchor_labels", "bound_classes"):
        assert np.array_equal(getattr(back, f), getattr(model, f)), f
    assert back.fitness_achieved == model.fitness_achieved
    q = np.random.default_rng(1).random((20, 2))
    assert np.array_equal(sslpso.predict_many(back, q)[1], sslpso.predict_many(model, q)[1])


def test_psc_round_trip_with_schema(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("color,size,y\nred,1.5,a\nblue,3.0,b\nred,2.0,a\nblue,9.0,b\n", encoding="utf-8")
    data = normalize_minmax(load_csv(csv, "y", ["color"]))
    model = psc_fit(data.features, data.labels, PsoConfig(seed=1), "psi1")
    text = modelio.dumps(model, modelio.FeatureSchema.from_dataset(data))
    back, schema = modelio.loads(text)
    assert np.array_equal(back.class_centroids, model.class_centroids)
    assert back.fitness_variant == "psi1" and back.training_fitness == model.training_fitness
    assert schema.feature_names == ("color", "size")
    assert schema.class_names == ("a", "b")
    assert schema.categories == {0: ("red", "blue")}
    assert np.array_equal(schema.feature_min, data.feature_min)
    assert np.array_equal(schema.feature_max, data.feature_max)


@pytest.mark.parametrize("text", [
    "",
    "something-else,1\n",
    "sswarm-model,99\nkind,psc\n",
    "sswarm-model,1\nkind,psc\n[meta]\nfitness_variant,psi1\n",
    "sswarm-model,1\nkind,mystery\n[meta]\n",
    "sswarm-model,1\nkind,psc\n1,2\n",
])
def test_malformed(text):
    with pytest.raises(modelio.ModelFormatError):
        modelio.loads(text)
