import math

import numpy as np
import pytest

import entrosim


def test_segment_entropy_closed_forms():
    assert entrosim.segment_entropy(b"\x00" * 200) == 0.0
    assert entrosim.segment_entropy(bytes(range(256))) == 8.0
    assert abs(entrosim.segment_entropy(bytes(range(200))) - math.log2(200)) < 1e-12


def test_empty_segment_raises():
    with pytest.raises(entrosim.EntrosimError):
        entrosim.segment_entropy(b"")


def test_stream_and_graph_shape():
    data = bytes(range(256)) * 10
    stream = entrosim.entropy_stream(data, segment_len=256)
    assert stream == [8.0] * 10
    g = entrosim.entropy_graph(stream, 8, 8)
    assert g.shape == (8, 8)
    assert np.all(g == 8.0)


def test_egr_round_trip(tmp_path):
    g = np.linspace(0.0, 8.0, 12).reshape(3, 4)
    path = tmp_path / "x.egr"
    entrosim.write_egr(path, g)
    back = entrosim.read_egr(path)
    np.testing.assert_array_equal(back, g.astype(np.float32).astype(np.float64))


def test_metrics_hand_case():
    cm = entrosim.confusion_matrix([0, 1, 1, 1], [0, 0, 1, 1], 2)
    assert cm.tolist() == [[1, 1], [0, 2]]
    per = entrosim.prf_per_class(cm)
    assert per[0]["recall"] == 0.5 and per[0]["precision"] == 1.0
    assert abs(per[1]["f1"] - 0.8) < 1e-15
    scores = np.array([[0.9, 0.1], [0.6, 0.4], [0.65, 0.35], [0.2, 0.8]])
    auc = entrosim.roc_auc(scores, [0, 0, 1, 1])
    assert auc["per_class"][1] == 0.75


def test_pipeline_end_to_end(tmp_path):
    corpus = tmp_path / "corpus"
    data = tmp_path / "data"
    info = entrosim.generate_corpus(corpus, preset="separated", seed=3)
    assert info["files"] == 353
    rows = entrosim.extract_corpus(corpus, data, height=32, width=32, workers=2)
    assert rows == 353
    g = entrosim.read_egr(data / "petya" / "petya_0000.egr")
    assert g.shape == (32, 32)
    assert g.min() >= 0.0 and g.max() <= 8.0


def test_train_classify_small(tmp_path):
    corpus = tmp_path / "corpus"
    data = tmp_path / "data"
    entrosim.generate_corpus(corpus, preset="separated", seed=3)
    entrosim.extract_corpus(corpus, data)
    ckpt = tmp_path / "model.ntc"
    history, report = entrosim.train(data / "manifest.jsonl", ckpt, epochs=2, seed=1)
    assert len(history) == 2
    assert all(math.isfinite(h["train_loss"]) for h in history)
    assert 0.0 <= report["weighted"]["f1"] <= 1.0
    clf = entrosim.Classifier(ckpt)
    assert clf.input_shape == (64, 64)
    p = clf.predict(entrosim.read_egr(data / "bitman" / "bitman_0000.egr"))
    assert p.shape == (len(clf.families),)
    assert abs(p.sum() - 1.0) < 1e-9
    with pytest.raises(entrosim.EntrosimError):
        clf.predict(np.zeros((8, 8)))
