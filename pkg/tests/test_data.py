import json

import numpy as np
import pytest

from protoal.classifier import HyperParams, init_params, fit, predict_batch
from protoal.data import (
    Dataset,
    Sample,
    SynthConfig,
    gen_blobs,
    load_csv,
    load_jsonl,
    save_csv,
    save_jsonl,
    split,
)
from protoal.errors import DuplicateId, ParseError, SchemaError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_jsonl_well_formed(tmp_path):
    path = tmp_path / "data.jsonl"
    write_lines(
        path,
        [
            '{"id": 0, "features": [1.0, 2.0], "label": 0}',
            '{"id": 1, "features": [0.5, -1.5], "label": 1, "payload": "hello"}',
            '{"id": 2, "features": [3.0, 4.0]}',
        ],
    )
    ds = load_jsonl(path)
    assert len(ds) == 3
    assert ds.d_in == 2
    assert ds.num_classes == 2
    assert ds.by_id(1).payload == "hello"
    assert ds.by_id(2).label is None


def test_load_jsonl_ragged_features(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_lines(
        path,
        ['{"id": 0, "features": [1.0, 2.0]}', '{"id": 1, "features": [1.0]}'],
    )
    with pytest.raises(SchemaError):
        load_jsonl(path)


def test_load_jsonl_duplicate_id(tmp_path):
    path = tmp_path / "dup.jsonl"
    write_lines(
        path,
        ['{"id": 3, "features": [1.0]}', '{"id": 3, "features": [2.0]}'],
    )
    with pytest.raises(DuplicateId):
        load_jsonl(path)


def test_load_jsonl_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.jsonl"
    write_lines(path, ['{"id": 0, "features": [1.0]}', "{not json"])
    with pytest.raises(ParseError, match=":2"):
        load_jsonl(path)


def test_load_jsonl_schema_checks(tmp_path):
    cases = [
        '{"features": [1.0]}',
        '{"id": "a", "features": [1.0]}',
        '{"id": 0, "features": "nope"}',
        '{"id": 0, "features": [1.0], "label": -1}',
        '{"id": 0, "features": [1.0], "payload": 5}',
    ]
    for i, line in enumerate(cases):
        path = tmp_path / f"case{i}.jsonl"
        write_lines(path, [line])
        with pytest.raises(SchemaError):
            load_jsonl(path)


def test_jsonl_roundtrip_identity(tmp_path):
    ds = gen_blobs(SynthConfig(num_classes=3, points_per_class=20, d_in=5, seed=3))
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    save_jsonl(ds, p1)
    ds2 = load_jsonl(p1)
    save_jsonl(ds2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    ds3 = load_jsonl(p2)
    assert ds3.ids == ds.ids
    np.testing.assert_array_equal(ds3.feature_matrix(), ds.feature_matrix())
    np.testing.assert_array_equal(ds3.labels(), ds.labels())
    assert [s.payload for s in ds3.samples] == [s.payload for s in ds.samples]
    assert ds3.vocab.names == ds.vocab.names


def test_csv_roundtrip_identity(tmp_path):
    ds = gen_blobs(SynthConfig(num_classes=2, points_per_class=10, d_in=3, seed=4))
    # CSV carries no payload column
    for s in ds.samples:
        s.payload = None
    p1 = tmp_path / "a.csv"
    save_csv(ds, p1)
    ds2 = load_csv(p1)
    np.testing.assert_array_equal(ds2.feature_matrix(), ds.feature_matrix())
    np.testing.assert_array_equal(ds2.labels(), ds.labels())


def test_csv_header_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,label,x0\n0,,1.0\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_csv(path)


def test_split_sizes():
    ds = gen_blobs(SynthConfig(num_classes=2, points_per_class=5, d_in=2, seed=5))
    train, test = split(ds, 0.5, seed=0)
    assert len(train) == 5 and len(test) == 5


def test_split_disjoint_exhaustive():
    ds = gen_blobs(SynthConfig(num_classes=3, points_per_class=30, d_in=2, seed=6))
    train, test = split(ds, 0.25, seed=1)
    assert set(train.ids) | set(test.ids) == set(ds.ids)
    assert not set(train.ids) & set(test.ids)


def test_split_deterministic():
    ds = gen_blobs(SynthConfig(num_classes=2, points_per_class=20, d_in=2, seed=7))
    a_train, a_test = split(ds, 0.3, seed=9)
    b_train, b_test = split(ds, 0.3, seed=9)
    assert a_train.ids == b_train.ids and a_test.ids == b_test.ids


def test_split_fraction_validation():
    ds = gen_blobs(SynthConfig(num_classes=2, points_per_class=5, d_in=2, seed=8))
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(SchemaError):
            split(ds, bad, seed=0)


def test_gen_blobs_counts_and_finiteness():
    ds = gen_blobs(SynthConfig(num_classes=4, points_per_class=250, d_in=3, seed=9))
    assert len(ds) == 1000
    labels = ds.labels()
    for c in range(4):
        assert np.sum(labels == c) == 250
    assert np.all(np.isfinite(ds.feature_matrix()))


def test_gen_blobs_deterministic():
    cfg = SynthConfig(num_classes=2, points_per_class=10, d_in=4, seed=10)
    np.testing.assert_array_equal(
        gen_blobs(cfg).feature_matrix(), gen_blobs(cfg).feature_matrix()
    )


def test_gen_blobs_overlap_shrinks_center_distances():
    distances = []
    for overlap in (0.0, 0.25, 0.5, 0.75, 1.0):
        cfg = SynthConfig(
            num_classes=4, points_per_class=50, d_in=3, overlap=overlap, seed=11
        )
        ds = gen_blobs(cfg)
        X, y = ds.feature_matrix(), ds.labels()
        centers = np.array([X[y == c].mean(axis=0) for c in range(4)])
        pair = [
            np.linalg.norm(centers[i] - centers[j])
            for i in range(4)
            for j in range(i + 1, 4)
        ]
        distances.append(np.mean(pair))
    assert all(a > b for a, b in zip(distances, distances[1:]))


def test_separable_blobs_reach_high_accuracy():
    # overlap 0 with tiny noise: an m=0 classifier should be near-perfect
    ds = gen_blobs(
        SynthConfig(num_classes=3, points_per_class=100, d_in=4, overlap=0.0,
                    noise_sigma=0.05, seed=12)
    )
    train, test = split(ds, 0.2, seed=0)
    hp = HyperParams(d_in=4, d_emb=4, margin=0.0, learning_rate=0.05,
                     epochs_per_round=40)
    params = init_params(hp, ds.num_classes, rng_seed=0)
    params, _ = fit(params, train.feature_matrix(), train.labels(), hp, rng_seed=0)
    acc = np.mean(predict_batch(params, test.feature_matrix()) == test.labels())
    assert acc >= 0.99


def test_dataset_subset_lookup():
    ds = gen_blobs(SynthConfig(num_classes=2, points_per_class=5, d_in=2, seed=13))
    sub = ds.subset([3, 7, 1])
    assert sub.ids == [3, 7, 1]
    np.testing.assert_array_equal(sub.by_id(7).features, ds.by_id(7).features)
