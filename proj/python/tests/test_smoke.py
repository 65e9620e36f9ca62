import csv
import json
import math

import numpy as np
import pytest

import krait_lab as kl

TINY = {
    "data": {"sbm": {"classes": 3, "nodes_per_class": 12, "p_in": 0.4, "p_out": 0.05, "feature_dim": 6}},
    "pretrain": {"epochs": 2, "hidden_dim": 8},
    "pretrain_samples": 12,
    "prompt": {"token_count": 3},
    "tune": {"epochs": 2, "learning_rate": 0.5},
    "attack": {"type": "one-to-one", "trigger_method": "interact", "poisoning_rate": 0.2,
               "trigger_size": 3, "epochs": 2, "learning_rate": 0.5},
    "trials": 1,
    "seed": 5,
}


def test_sbm_graph_properties():
    g = kl.generate_sbm(classes=3, nodes_per_class=20, seed=1)
    assert g.node_count == 60
    assert g.num_labels == 3
    assert g.features.shape == (60, 32)
    assert all(u < v for u, v in g.edges)
    assert sum(g.train_mask) + sum(g.test_mask) == 60
    for v in range(g.node_count):
        assert g.degree(v) == len(g.neighbors(v))
    same = sum(g.labels[u] == g.labels[v] for u, v in g.edges)
    assert g.label_homophily() == pytest.approx(same / len(g.edges))


def test_label_nonuniformity_and_lnh():
    assert kl.label_nonuniformity([1 / 3] * 3) == pytest.approx(0.0, abs=1e-12)
    assert kl.label_nonuniformity([1.0, 0.0]) == pytest.approx(1.0)
    g = kl.generate_sbm(classes=2, nodes_per_class=10, seed=2)
    for v in range(g.node_count):
        assert kl.lnh_score(g, v) >= 0.0
    with pytest.raises(kl.KraitError):
        kl.label_nonuniformity([])


def test_ego_network_center_first():
    g = kl.generate_sbm(classes=2, nodes_per_class=10, p_in=0.5, seed=3)
    nodes, edges = kl.ego_network(g, 4, 1)
    assert nodes[0] == 4
    assert set(nodes[1:]) == set(g.neighbors(4))
    assert all(0 <= u < v < len(nodes) for u, v in edges)


def test_select_poisoned_respects_rate_and_labels():
    g = kl.generate_sbm(classes=4, nodes_per_class=30, seed=4)
    picked = kl.select_poisoned(g, "all-to-one", 0.1)
    assert picked
    targets = {flipped for _, _, flipped in picked}
    assert len(targets) == 1
    for node, original, flipped in picked:
        assert g.train_mask[node]
        assert g.labels[node] == original != flipped
    with pytest.raises(kl.KraitError):
        kl.select_poisoned(g, "one-to-many", 0.1)


def test_metrics_and_projection():
    assert kl.accuracy([0, 1, 1], [0, 1, 0]) == pytest.approx(2 / 3)
    assert kl.macro_f1([0, 1], [0, 1], 2) == pytest.approx(1.0)
    pts = np.random.default_rng(0).normal(size=(20, 5))
    coords, explained = kl.project_embeddings_2d(pts)
    assert coords.shape == (20, 2)
    assert 0.0 < explained[1] <= explained[0] <= 1.0


def test_defense_helpers():
    triangles = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
    assert kl.gnn_svd_filter(6, triangles, rank=2) == triangles
    e = np.linspace(-1.0, 1.0, 4)
    assert np.array_equal(kl.inject_embedding_noise(e, 0.0, 1), e)
    assert not np.array_equal(kl.inject_embedding_noise(e, 0.1, 1), e)


def test_config_defaults_and_rejection():
    cfg = kl.load_config(TINY)
    assert cfg["attack"]["trigger_method"] == "interact"
    with pytest.raises(kl.KraitError):
        kl.load_config({"no_such_key": 1})


def _read(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def test_run_experiment_and_audit_predictions(tmp_path):
    cfg = dict(TINY, output_dir=str(tmp_path / "run"))
    summary = kl.run_experiment(cfg)
    assert summary["attack_enabled"] is True
    trial = tmp_path / "run" / "trial_0"
    preds = _read(trial / "predictions.csv")
    report = _read(trial / "report.csv")[0]

    triggered = [r for r in preds if r["half"] == "triggered"]
    clean = [r for r in preds if r["half"] == "clean"]
    assert triggered and clean
    hits = [r for r in triggered if r["predicted"] == r["target"]]
    asr = len(hits) / len(triggered)
    ca = sum(r["predicted"] == r["true_label"] for r in clean) / len(clean)
    assert float(report["asr"]) == pytest.approx(asr, abs=1e-9)
    assert float(report["ca"]) == pytest.approx(ca, abs=1e-9)
    assert int(report["attacked"]) == len(triggered)
    assert int(report["successes"]) == len(hits)
    if hits:
        amc = sum(float(r["probs"].split(";")[int(r["target"])]) for r in hits) / len(hits)
        assert float(report["amc"]) == pytest.approx(amc, abs=1e-9)
    for r in preds:
        probs = [float(x) for x in r["probs"].split(";")]
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-9)
        assert int(r["predicted"]) == int(np.argmax(probs))

    poison = _read(trial / "poison_set.csv")
    assert sorted(int(p["node"]) for p in poison) == sorted(summary["trials"][0]["poisoned_nodes"])
    assert json.loads((tmp_path / "run" / "config.json").read_text())["seed"] == 5
