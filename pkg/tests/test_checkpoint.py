import numpy as np
import pytest

from stockformer.checkpoint import load_checkpoint, restore_params, save_checkpoint
from stockformer.errors import IoError, ShapeMismatchError, UnknownKeyError
from stockformer.models import ModelConfig, StockFormer
from stockformer.tensor import Tensor


def test_round_trip_restores_exact_values(tmp_path):
    cfg = ModelConfig(lag=3, d_model=8, heads=2, enc_layers=1, dec_layers=1, seed=4)
    model = StockFormer(cfg)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model.params, {"kind": "stockformer", "lag": 3}, seed=4)

    fresh = StockFormer(ModelConfig(lag=3, d_model=8, heads=2, enc_layers=1, dec_layers=1, seed=99))
    arrays, sidecar = load_checkpoint(path)
    restore_params(fresh.params, arrays)
    assert sidecar["seed"] == 4 and sidecar["config"]["kind"] == "stockformer"
    for name, p in model.params.items():
        assert np.array_equal(p.data, fresh.params[name].data)


def test_restore_rejects_shape_mismatch(tmp_path):
    params = {"w": Tensor(np.zeros((2, 3)), requires_grad=True)}
    save_checkpoint(tmp_path / "c.npz", params, {}, seed=0)
    arrays, _ = load_checkpoint(tmp_path / "c.npz")
    wrong = {"w": Tensor(np.zeros((3, 2)), requires_grad=True)}
    with pytest.raises(ShapeMismatchError):
        restore_params(wrong, arrays)


def test_restore_rejects_key_drift(tmp_path):
    params = {"w": Tensor(np.zeros(3), requires_grad=True)}
    save_checkpoint(tmp_path / "c.npz", params, {}, seed=0)
    arrays, _ = load_checkpoint(tmp_path / "c.npz")
    with pytest.raises(UnknownKeyError):
        restore_params({"w2": Tensor(np.zeros(3), requires_grad=True)}, arrays)


def test_load_missing_files(tmp_path):
    with pytest.raises(IoError):
        load_checkpoint(tmp_path / "missing.npz")
    # archive without sidecar
    np.savez(tmp_path / "lone.npz", w=np.zeros(3))
    with pytest.raises(IoError):
        load_checkpoint(tmp_path / "lone.npz")
