import struct

import numpy as np
import pytest

from rescnet.checkpoint import MAGIC, dumps, load_checkpoint, loads, save_checkpoint
from rescnet.config import DataConfig, TrainConfig
from rescnet.engine import predict, train
from rescnet.errors import CheckpointError, CheckpointVersionError

CFG = TrainConfig(max_layers=3, filters_per_layer=3, filter_size_first=5, filter_size_rest=3,
                  sop_block=(7, 7), sop_stride=7, transform="sigmoid", ridge=1.0,
                  stop_at_zero_train_error=False, max_patches=3000)


@pytest.fixture(scope="module")
def trainer_model(small_train):
    return train(small_train, CFG)


def test_round_trip_predictions(trainer_model, desk_test):
    probe = desk_test.images[..., :64]
    state = loads(dumps(trainer_model, DataConfig(n_train=7)))
    assert state.data_config.n_train == 7
    assert state.config == CFG
    np.testing.assert_array_equal(predict(state.model, probe)[1],
                                  predict(trainer_model, probe)[1])
    assert dumps(state.model, state.data_config) == dumps(trainer_model, DataConfig(n_train=7))


def test_layout(trainer_model):
    blob = dumps(trainer_model)
    assert blob[:8] == MAGIC == b"RESCNET1"
    version, header_len = struct.unpack("<IQ", blob[8:20])
    assert version == 1
    count, = struct.unpack("<I", blob[20 + header_len:24 + header_len])
    # kernels + bias per bank, weights + intercepts per present LDA model
    models = sum((layer.positive_model is not None) + (layer.negative_model is not None)
                 for layer in trainer_model.compensation_layers)
    assert count == 4 + 2 * len(trainer_model.compensation_layers) + 2 * models


def test_rejects_bad_files(trainer_model):
    blob = dumps(trainer_model)
    with pytest.raises(CheckpointVersionError):
        loads(b"RESCNET2" + blob[8:])
    with pytest.raises(CheckpointVersionError):
        loads(blob[:8] + struct.pack("<I", 2) + blob[12:])
    with pytest.raises(CheckpointError):
        loads(blob[:-3])
    with pytest.raises(CheckpointError):
        loads(blob + b"\0")


def test_atomic_save(tmp_path, trainer_model):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, trainer_model)
    save_checkpoint(path, trainer_model)
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]
    assert load_checkpoint(path).model.depth == 3
