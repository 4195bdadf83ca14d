import struct
from dataclasses import replace

import numpy as np
import pytest

from glyphcast.classify import (
    decode_payload,
    encode_payload,
    model_from_bytes,
    model_to_bytes,
    predict_batch,
    read_model,
    train,
    train_references,
    write_model,
)
from glyphcast.core import FormatError, ModelError, ModelKind


@pytest.fixture(scope="module")
def knn_model(clean_raw_set):
    return train("knn", clean_raw_set, {"k": 1}, seed=2)


def test_payload_preserves_names_dtypes_and_shapes():
    arrays = {
        "weights": np.arange(6, dtype=np.float32).reshape(2, 3),
        "bias": np.array([0.5, -1.0]),
        "labels": np.array([1, 2, 3], dtype=np.int32),
        "offsets": np.array([0, 4], dtype=np.int64),
        "scalar": np.array(7.0),
    }
    back = decode_payload(encode_payload(arrays))
    assert sorted(back) == sorted(arrays)
    for name, arr in arrays.items():
        assert back[name].dtype == arr.dtype
        np.testing.assert_array_equal(back[name], arr)


def test_payload_is_independent_of_insertion_order():
    a = {"x": np.zeros(2), "y": np.ones(3, dtype=np.int32)}
    b = {"y": np.ones(3, dtype=np.int32), "x": np.zeros(2)}
    assert encode_payload(a) == encode_payload(b)


def test_payload_rejects_bad_input():
    with pytest.raises(FormatError, match="unsupported dtype"):
        encode_payload({"u": np.zeros(2, dtype=np.uint8)})
    blob = encode_payload({"x": np.zeros(2)})
    with pytest.raises(FormatError, match="trailing"):
        decode_payload(blob + b"\x00")
    with pytest.raises(FormatError, match="truncated"):
        decode_payload(blob[:-1])


def test_model_file_round_trip(tmp_path, knn_model, clean_raw_set):
    path = write_model(knn_model, tmp_path / "models" / "knn.gcma")
    assert path.read_bytes()[:4] == b"GCMA"
    back = read_model(path)
    assert back.kind is ModelKind.KNN
    assert back.hyperparams == {"k": 1}
    assert back.seed == 2 and back.charset == knn_model.charset
    assert back.metadata == knn_model.metadata
    assert model_to_bytes(back) == path.read_bytes()
    np.testing.assert_array_equal(
        predict_batch(back, clean_raw_set.features),
        predict_batch(knn_model, clean_raw_set.features),
    )


def test_model_bytes_are_reproducible(clean_raw_set):
    a = model_to_bytes(train("svm", clean_raw_set, {"lambda": 1e-3, "epochs": 2}, seed=3))
    b = model_to_bytes(train("svm", clean_raw_set, {"lambda": 1e-3, "epochs": 2}, seed=3))
    assert a == b


def test_aiss_round_trip_keeps_bins(tmp_path):
    m = train_references(hyperparams={"radial_bins": 4, "angular_bins": 8})
    back = read_model(write_model(m, tmp_path / "aiss.gcma"))
    assert back.hyperparams == {"radial_bins": 4, "angular_bins": 8}
    assert decode_payload(back.payload)["references"].shape == (2 * 95, 32)


def test_corrupt_model_files(knn_model):
    blob = model_to_bytes(knn_model)
    with pytest.raises(FormatError, match="not a GCMA"):
        model_from_bytes(b"GCDS" + blob[4:])
    with pytest.raises(FormatError, match="unsupported GCMA version"):
        model_from_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
    with pytest.raises(FormatError, match="truncated"):
        model_from_bytes(blob[:-10])
    with pytest.raises(FormatError, match="trailing"):
        model_from_bytes(blob + b"xx")
    with pytest.raises(FormatError, match="unknown model kind"):
        model_from_bytes(blob[:8] + bytes([42]) + blob[9:])


def test_model_without_required_hyperparameter_is_rejected(tmp_path, knn_model):
    broken = replace(knn_model, hyperparams={})
    with pytest.raises(ModelError) as err:
        predict_batch(broken, np.zeros((1, 100)))
    assert err.value.error_type == "missing_param"
    path = tmp_path / "no_k.gcma"
    path.write_bytes(model_to_bytes(broken))
    with pytest.raises(FormatError, match="missing hyperparameter 'k'") as err:
        read_model(path)
    assert err.value.error_type == "missing_param"


def test_model_with_invalid_hyperparameter_value_is_rejected(knn_model):
    blob = model_to_bytes(replace(knn_model, hyperparams={"k": 0}))
    with pytest.raises(FormatError, match="positive integer"):
        model_from_bytes(blob)
