import numpy as np
import pytest

from streamprune.errors import SchemaMismatchError, StreamDataError
from streamprune.models import StreamSchema
from streamprune.stream import (
    MovingSquares,
    chessboard_class,
    chunked,
    gen_moving_rbf,
    gen_moving_squares,
    gen_transient_chessboard,
    load_csv,
    write_csv,
)

GENERATOR_SHAPES = [
    (gen_moving_squares, 2, 4),
    (gen_moving_rbf, 10, 5),
    (gen_transient_chessboard, 2, 8),
]


def _sequence(source):
    return [(inst.features.tobytes(), inst.label) for inst in source]


@pytest.mark.parametrize("gen, features, classes", GENERATOR_SHAPES)
def test_generator_schema(gen, features, classes):
    source = gen(seed=3, total_instances=10)
    assert source.schema.num_features == features
    assert source.schema.num_classes == classes


@pytest.mark.parametrize("gen, features, classes", GENERATOR_SHAPES)
def test_generator_same_seed_is_identical(gen, features, classes):
    assert _sequence(gen(seed=42, total_instances=2_000)) == _sequence(gen(seed=42, total_instances=2_000))


@pytest.mark.parametrize("gen, features, classes", GENERATOR_SHAPES)
def test_generator_different_seed_differs(gen, features, classes):
    assert _sequence(gen(seed=1, total_instances=200)) != _sequence(gen(seed=2, total_instances=200))


@pytest.mark.parametrize("gen, features, classes", GENERATOR_SHAPES)
def test_generator_schema_conformance(gen, features, classes):
    source = gen(seed=11, total_instances=10_000)
    count = 0
    for instance in source:
        source.schema.check(instance)
        assert instance.features.shape == (features,)
        count += 1
    assert count == 10_000


def test_generator_instances_are_read_only():
    instance = next(iter(gen_moving_squares(seed=1, total_instances=1)))
    with pytest.raises(ValueError):
        instance.features[0] = 0.5


def test_generator_accepts_full_64_bit_seed():
    source = gen_moving_squares(seed=2**64 - 1, total_instances=3)
    assert len(list(source)) == 3
    with pytest.raises(ValueError):
        gen_moving_squares(seed=2**64, total_instances=3)


def test_moving_squares_in_unit_square_and_balanced():
    labels = []
    for instance in gen_moving_squares(seed=5, total_instances=200_000):
        x, y = instance.features
        assert 0.0 <= x < 1.0 and 0.0 <= y <= 1.0
        labels.append(instance.label)
    freq = np.bincount(labels, minlength=4) / len(labels)
    assert np.all(freq >= 0.24) and np.all(freq <= 0.26)


def test_moving_squares_rows_match_class_heights():
    for instance in gen_moving_squares(seed=9, total_instances=500):
        y = instance.features[1]
        assert abs(y - MovingSquares.HEIGHTS[instance.label]) <= MovingSquares.SIDE / 2


def test_moving_squares_drift_wraps_around():
    # offset alternates between 0.0 and 0.5
    xs = [inst.features[0] for inst in gen_moving_squares(seed=1, total_instances=4, speed=0.5)]
    assert xs[0] < 0.1 and 0.5 <= xs[1] < 0.6 and xs[2] < 0.1


def test_chessboard_cell_class():
    assert chessboard_class(0.05, 0.05) == 0
    assert chessboard_class(0.2, 0.05) == 1
    assert chessboard_class(0.95, 0.95) == (7 + 7) % 8
    assert chessboard_class(1.0, 1.0) == (7 + 7) % 8


def test_transient_chessboard_alternates_band_and_global_segments():
    source = gen_transient_chessboard(seed=4, total_instances=4_000, segment_length=1_000)
    ys = np.array([inst.features[1] for inst in source])
    # segment 0 reveals rows 0-1, segment 2 reveals rows 2-3
    assert ys[:1_000].max() < 0.25
    assert ys[2_000:3_000].min() >= 0.25 and ys[2_000:3_000].max() < 0.5
    assert ys[1_000:2_000].max() > 0.5
    for instance in source:
        x, y = instance.features
        assert instance.label == chessboard_class(x, y)


def test_moving_rbf_stationary_when_speed_zero():
    from streamprune.learners import GaussianNaiveBayes

    source = gen_moving_rbf(seed=8, total_instances=5_000, drift_speed=0.0)
    model = GaussianNaiveBayes(source.schema)
    accuracies = []
    for chunk in chunked(source, 500):
        predicted = model.predict_many(chunk.X).argmax(axis=1)
        accuracies.append(float(np.mean(predicted == chunk.y)))
        model.train_chunk(chunk)
    assert min(accuracies[1:]) >= 0.95


def test_moving_rbf_centroids_stay_in_unit_cube():
    source = gen_moving_rbf(seed=3, total_instances=20_000, drift_speed=0.01, sigma=1e-6)
    for instance in source:
        assert np.all(instance.features > -0.001) and np.all(instance.features < 1.001)


def test_chunked_drops_partial_tail():
    chunks = list(chunked(gen_moving_squares(seed=1, total_instances=10), 4))
    assert [len(c) for c in chunks] == [4, 4]
    assert [c.index for c in chunks] == [0, 1]


def test_chunked_size_one():
    chunks = list(chunked(gen_moving_squares(seed=1, total_instances=5), 1))
    assert len(chunks) == 5
    assert chunks[3].X.shape == (1, 2)


def test_chunked_empty_source():
    assert list(chunked(gen_moving_squares(seed=1, total_instances=0), 3)) == []


def test_chunked_preserves_order():
    source = gen_moving_rbf(seed=2, total_instances=30)
    flat = [inst.label for inst in source]
    chunks = list(chunked(source, 10))
    assert np.concatenate([c.y for c in chunks]).tolist() == flat


def test_chunked_rejects_zero():
    with pytest.raises(ValueError):
        list(chunked(gen_moving_squares(seed=1, total_instances=5), 0))


def test_load_csv_maps_labels_by_first_appearance(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("0.1,0.2,5\n0.3,0.4,9\n0.5,0.6,5\n")
    source = load_csv(path)
    assert [inst.label for inst in source] == [0, 1, 0]
    assert source.label_map == {"5": 0, "9": 1}
    assert source.total_instances == 3
    assert source.schema.num_features == 2


def test_load_csv_detects_header(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("height,width,kind\n1,2,a\n3,4,b\n5,6,c\n")
    source = load_csv(path)
    assert source.schema.feature_names == ("height", "width")
    assert source.schema.num_classes == 3
    assert len(list(source)) == 3


def test_load_csv_iterates_in_file_order(tmp_path):
    path = tmp_path / "order.csv"
    path.write_text("".join(f"{i},{i % 3}\n" for i in range(20)))
    assert [inst.features[0] for inst in load_csv(path)] == list(range(20))


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(StreamDataError, match="no data rows"):
        load_csv(path)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(StreamDataError, match="not found"):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_non_numeric_cell_reports_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,0\n3,x,1\n")
    with pytest.raises(StreamDataError) as excinfo:
        load_csv(path)
    assert excinfo.value.row == 2


def test_load_csv_ragged_row_reports_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2,0\n3,4,1\n5,1\n")
    with pytest.raises(StreamDataError) as excinfo:
        load_csv(path)
    assert excinfo.value.row == 3


def test_load_csv_rejects_missing_values(tmp_path):
    path = tmp_path / "missing.csv"
    path.write_text("1,2,0\n,4,1\n")
    with pytest.raises(StreamDataError, match="missing"):
        load_csv(path)


def test_load_csv_schema_hint(tmp_path):
    path = tmp_path / "hinted.csv"
    path.write_text("1,2,0\n3,4,1\n")
    source = load_csv(path, StreamSchema(num_features=2, num_classes=7))
    assert source.schema.num_classes == 7
    with pytest.raises(SchemaMismatchError):
        load_csv(path, StreamSchema(num_features=3, num_classes=7))


def test_csv_round_trip(tmp_path):
    original = gen_moving_rbf(seed=13, total_instances=500)
    path = tmp_path / "rbf.csv"
    assert write_csv(original, path) == 500
    reloaded = load_csv(path)
    assert reloaded.schema.num_features == 10
    pairs = list(zip(original, reloaded))
    assert len(pairs) == 500
    for before, after in pairs:
        assert int(reloaded.label_names[after.label]) == before.label
        assert np.allclose(before.features, after.features, atol=1e-9, rtol=0)
