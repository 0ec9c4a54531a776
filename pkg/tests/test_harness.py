import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoset.coreset import sample_coreset, sensitivities
from protoset.errors import ConfigError, DataError, NumericalError, ShapeError
from protoset.harness import data
from protoset.harness.experiment import CSV_COLUMNS, ExperimentConfig, metrics_csv, run_experiment, stage_rng
from protoset.harness.io import (
    read_coreset,
    read_patterns,
    read_prototypes,
    write_coreset,
    write_patterns,
    write_prototypes,
)
from protoset.harness.metrics import misclustered_percentage, x_over_ave
from protoset.matching import Pattern, cost
from protoset.prototype import Instance, Prototype

from oracles import random_weights


def test_membership_vectors_for_three_clusters():
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
    vecs = data.clustering_to_pattern(labels, 3)
    assert vecs.tolist() == [
        [1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 1, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 1, 1, 1],
    ]


def test_moving_one_item_costs_two():
    a = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
    b = a.copy()
    b[3] = 1
    pa, pb = Pattern(data.clustering_to_pattern(a, 3)), Pattern(data.clustering_to_pattern(b, 3))
    # one coordinate flips in each of the two affected clusters
    assert cost(pa, pb) == 2.0
    assert cost(pa, pb, "l1") == 2.0


def test_ensemble_single_cluster_is_all_ones():
    inst, truth = data.gen_ensemble_instance(12, 1, 2, 4, rng=0)
    assert inst.points.shape == (4, 1, 12)
    assert np.all(inst.points == 1.0)
    assert np.all(truth == 0)


def test_ensemble_shapes_and_errors():
    inst, truth = data.gen_ensemble_instance(40, 4, 3, 6, rng=1)
    assert inst.points.shape == (6, 4, 40)
    # every item belongs to exactly one cluster in every clustering
    assert np.all(inst.points.sum(axis=1) == 1.0)
    assert np.bincount(truth).tolist() == [10, 10, 10, 10]
    with pytest.raises(ConfigError):
        data.gen_ensemble_instance(3, 4, 2, 2, rng=0)


def test_lloyd_recovers_separated_clusters():
    rng = np.random.default_rng(2)
    centres = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]])
    x = np.concatenate([c + rng.normal(size=(30, 2)) for c in centres])
    found, labels = data.lloyd_kmeans(x, 3, rng)
    for c in range(3):
        assert len(set(labels[30 * c : 30 * (c + 1)].tolist())) == 1
    assert np.allclose(np.sort(found[:, 0]), np.sort(centres[:, 0]), atol=1.0)


def test_lloyd_weighted_single_cluster_is_weighted_mean():
    x = np.array([[0.0], [1.0], [4.0]])
    w = np.array([1.0, 1.0, 2.0])
    centres, labels = data.lloyd_kmeans(x, 1, 0, weights=w)
    assert centres[0, 0] == pytest.approx(9.0 / 4.0)
    assert labels.tolist() == [0, 0, 0]


def test_image_single_pixel():
    img = np.zeros((5, 5))
    img[2, 3] = 200
    p = data.image_to_weighted_pattern(img, 1, rng=0, total_weight=1000)
    assert p.points.tolist() == [[2.0, 3.0]]
    assert p.weights.tolist() == [1000]


def test_image_two_equal_pixels():
    img = np.zeros((20, 20))
    img[1, 1] = img[18, 17] = 90
    p = data.image_to_weighted_pattern(img, 2, rng=0, total_weight=1000)
    assert sorted(map(tuple, p.points.tolist())) == [(1.0, 1.0), (18.0, 17.0)]
    assert p.weights.tolist() == [500, 500]


@pytest.mark.parametrize("seed", range(5))
def test_image_weights_sum_exactly(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((28, 28)) * (rng.random((28, 28)) > 0.6) * 255
    p = data.image_to_weighted_pattern(img, 30, rng, total_weight=997)
    assert p.weights.sum() == 997 and p.k == 30


def test_image_errors():
    with pytest.raises(DataError):
        data.image_to_weighted_pattern(np.zeros((4, 4)), 2, rng=0)
    with pytest.raises(DataError):
        data.image_to_weighted_pattern(-np.ones((4, 4)), 2, rng=0)


def test_largest_remainder():
    assert data.largest_remainder([1.5, 1.5, 1.0], 4).tolist() == [2, 1, 1]
    assert data.largest_remainder([0.2, 0.3, 0.5], 1).tolist() == [0, 0, 1]
    rng = np.random.default_rng(3)
    for _ in range(100):
        raw = rng.dirichlet(np.ones(7)) * 1000
        out = data.largest_remainder(raw, 1000)
        assert out.sum() == 1000 and np.all(np.abs(out - raw) < 1)


def test_blob_images_are_grayscale_and_seeded():
    a = data.blob_images(5, rng=4)
    b = data.blob_images(5, rng=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    for img in a:
        assert img.shape == (28, 28) and img.min() >= 0 and img.max() == 255


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    img = np.random.default_rng(5).integers(0, 256, size=(7, 9)).astype(float)
    path = tmp_path / "a.pgm"
    data.write_pgm(path, img, binary=binary)
    assert np.array_equal(data.read_pgm(path), img)
    assert len(data.load_image_dir(tmp_path)) == 1


def test_pgm_header_comments_and_errors(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_text("P2\n# made by hand\n2 2\n255\n0 1\n2 3\n")
    assert data.read_pgm(path).tolist() == [[0, 1], [2, 3]]
    path.write_text("P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(DataError):
        data.read_pgm(path)
    path.write_text("P2\n3 3\n255\n0 1\n")
    with pytest.raises(DataError):
        data.read_pgm(path)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError):
        data.load_image_dir(empty)


def test_pattern_file_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    inst = Instance(rng.normal(size=(5, 3, 4)) * 1e-7 + np.pi)
    path = tmp_path / "p.jsonl"
    write_patterns(path, inst)
    back = read_patterns(path)
    assert back == inst
    assert back.points.tobytes() == inst.points.tobytes()
    assert back.fingerprint == inst.fingerprint
    first = json.loads(path.read_text().splitlines()[0])
    assert first == {"meta": {"n": 5, "k": 3, "d": 4}}


def test_weighted_pattern_file_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    inst = Instance(rng.normal(size=(4, 3, 2)), np.stack([random_weights(rng, 3, 9) for _ in range(4)]))
    path = tmp_path / "w.jsonl"
    write_patterns(path, inst)
    assert read_patterns(path) == inst
    assert json.loads(path.read_text().splitlines()[0])["meta"]["W"] == 9


def test_pattern_file_errors(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"meta": {"n": 2, "k": 1, "d": 1}}\n{"id": 0, "points": [[0.0]]}\n')
    with pytest.raises(DataError):
        read_patterns(path)
    path.write_text('{"id": 0, "points": [[0.0]]}\n')
    with pytest.raises(DataError):
        read_patterns(path)
    path.write_text('{"meta": {"n": 1, "k": 1, "d": 1, "W": 3}}\n{"id": 0, "points": [[0.0]], "weights": [2]}\n')
    with pytest.raises(DataError):
        read_patterns(path)


def test_fingerprint_is_fnv1a_of_file_bytes(tmp_path):
    inst = Instance(np.arange(6.0).reshape(1, 3, 2))
    path = tmp_path / "f.jsonl"
    write_patterns(path, inst)
    h = 0xCBF29CE484222325
    for byte in path.read_bytes():
        h = ((h ^ byte) * 0x100000001B3) % 2**64
    assert inst.fingerprint == f"{h:016x}"


def test_coreset_sidecar_round_trip(tmp_path):
    inst = Instance(np.random.default_rng(8).normal(size=(30, 3, 2)))
    cs = sample_coreset(sensitivities(inst, 4), 7, rng=1, seed=1)
    path = tmp_path / "cs.jsonl"
    write_coreset(path, cs)
    back = read_coreset(path)
    assert np.array_equal(back.indices, cs.indices)
    assert back.weights.tobytes() == cs.weights.tobytes()
    assert (back.fingerprint, back.t_sum, back.alpha, back.pivot_index, back.seed) == (
        inst.fingerprint, cs.t_sum, 3.0, 4, 1)
    meta = json.loads(path.read_text().splitlines()[0])["meta"]
    assert set(meta) >= {"r", "T", "alpha", "pivot", "seed", "fingerprint"}


def test_prototype_sidecar_round_trip(tmp_path):
    q = Prototype(np.random.default_rng(9).normal(size=(3, 2)), [1, 2, 3])
    path = tmp_path / "q.jsonl"
    write_prototypes(path, [({"run_label": "full"}, q)], {"note": 1})
    meta, items = read_prototypes(path)
    assert meta == {"note": 1}
    assert items[0][0] == {"run_label": "full"} and items[0][1] == q


def test_misclustered_examples():
    truth = np.array([0, 0, 1, 1, 2, 2, 2, 0, 1, 2])
    exact = Prototype(data.clustering_to_pattern(truth, 3))
    assert misclustered_percentage(exact, truth) == 0.0
    # exchange the memberships of two items from different clusters
    swapped = exact.points.copy()
    swapped[:, [0, 2]] = swapped[:, [2, 0]]
    assert misclustered_percentage(Prototype(swapped), truth) == pytest.approx(2 / 10 * 100)
    flipped = Prototype(data.clustering_to_pattern(1 - np.array([0, 1, 1, 0]), 2))
    assert misclustered_percentage(flipped, np.array([0, 1, 1, 0])) == 0.0


def test_misclustered_ties_go_to_lowest_slot():
    proto = Prototype(np.array([[0.5, 1.0], [0.5, 0.0]]))
    # item 0 ties and goes to slot 0, item 1 to slot 0: one of two items is wrong
    assert misclustered_percentage(proto, np.array([0, 1])) == 50.0
    with pytest.raises(ShapeError):
        misclustered_percentage(proto, np.array([0, 1, 1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_misclustered_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    k, items = int(rng.integers(1, 6)), int(rng.integers(5, 30))
    proto = Prototype(rng.random((k, items)))
    truth = rng.integers(0, k, size=items)
    base = misclustered_percentage(proto, truth)
    shuffled = Prototype(proto.points[rng.permutation(k)])
    renamed = rng.permutation(k)[truth] + 10
    assert misclustered_percentage(shuffled, truth) == base
    assert misclustered_percentage(proto, renamed) == base


def test_x_over_ave_cases():
    inst = Instance(np.zeros((4, 1, 1)))
    full, other = Prototype([[1.0]]), Prototype([[3.0]])
    # Ave = 1 per pattern; x = (3 - 1)^2 = 4
    assert x_over_ave(full, full, inst) == 0.0
    assert x_over_ave(full, other, inst) == 4.0
    zero = Prototype([[0.0]])
    assert x_over_ave(zero, zero, inst) == 0.0
    with pytest.raises(NumericalError):
        x_over_ave(zero, other, inst)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=-1)
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=0, fractions=[0.0])
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=0, metric="l1", jl="auto")
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=0, dataset={"kind": "mnist"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"dataset": {"kind": "gaussian"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1, "colour": "red"})
    assert ExperimentConfig(seed=0, fractions=[0.3, 0.1]).fractions == [0.1, 0.3]


def test_stage_streams_are_independent_and_stable():
    a = stage_rng(5, "pivot", 0).random(4)
    assert np.array_equal(a, stage_rng(5, "pivot", 0).random(4))
    assert not np.array_equal(a, stage_rng(5, "pivot", 1).random(4))
    assert not np.array_equal(a, stage_rng(5, "sample", 0).random(4))


def test_identical_clusterings_give_unit_ratios(tmp_path):
    truth = np.repeat(np.arange(3), 4)
    inst = Instance(np.stack([data.clustering_to_pattern(truth, 3)] * 20))
    write_patterns(tmp_path / "same.jsonl", inst)
    (tmp_path / "truth.json").write_text(json.dumps({"truth": truth.tolist()}))
    cfg = ExperimentConfig(
        seed=3,
        dataset={"kind": "file", "path": str(tmp_path / "same.jsonl"), "truth": str(tmp_path / "truth.json")},
        output=str(tmp_path / "m.csv"),
    )
    res = run_experiment(cfg)
    assert [r.normalized_objective for r in res.rows] == [1.0] * 5
    assert [r.ground_truth_metric for r in res.rows] == [0.0] * 5


def test_experiment_rows_and_artifacts(tmp_path):
    cfg = ExperimentConfig(
        seed=4,
        dataset={"kind": "gaussian", "n": 60, "k": 3, "d": 5},
        fractions=[0.2, 0.5],
        output=str(tmp_path / "run" / "m.csv"),
    )
    res = run_experiment(cfg)
    base = res.rows[0]
    assert base.run_label == "full" and base.normalized_objective == 1.0 and base.ground_truth_metric == 0.0
    assert all(r.wall_time_s > 0 for r in res.rows)
    lines = (tmp_path / "run" / "m.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 4  # header, baseline, two fractions
    assert (tmp_path / "run" / "m.prototypes.jsonl").exists()
    cs = read_coreset(tmp_path / "run" / "m.coreset-0.2.jsonl")
    assert cs.sample_size == 12 and cs.fingerprint == res.instance.fingerprint
    for rep in res.reports:
        h = np.array(rep.objective_history)
        assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_experiment_is_reproducible_without_timing(tmp_path):
    kw = dict(seed=11, dataset={"kind": "gaussian", "n": 40, "k": 3, "d": 20}, jl="auto", eps=0.5, timing=False)
    a = run_experiment(ExperimentConfig(output=str(tmp_path / "a.csv"), **kw))
    b = run_experiment(ExperimentConfig(output=str(tmp_path / "b.csv"), **kw))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert metrics_csv(a.rows) == metrics_csv(b.rows)
    assert ",,," in (tmp_path / "a.csv").read_text().splitlines()[1]


def test_experiment_with_projection_lifts_to_original_space(tmp_path):
    cfg = ExperimentConfig(
        seed=12, dataset={"kind": "gaussian", "n": 40, "k": 3, "d": 300}, jl="auto", fractions=[0.5],
        output=str(tmp_path / "m.csv"),
    )
    res = run_experiment(cfg)
    assert res.projected_dim is not None and res.projected_dim < 300
    assert all(q.d == 300 for q in res.prototypes)


def test_metric_must_fit_dataset(tmp_path):
    cfg = ExperimentConfig(seed=0, dataset={"kind": "gaussian", "n": 10, "k": 2, "d": 2}, metric="emd2",
                           output=str(tmp_path / "m.csv"))
    with pytest.raises(ConfigError):
        run_experiment(cfg)
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(seed=0, dataset={"kind": "gaussian", "n": 10}, output=str(tmp_path / "m.csv")))
