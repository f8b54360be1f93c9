import json

import pandas as pd
import pytest

from src.config import AppConfig, TrainConfig
from src.rl.checkpoint import load
from src.rl.ppo import lr_schedule
from src.rl.rollout import LocalPool
from src.services.training import STATE_FILE, Trainer


def _trainer(cfg: AppConfig, out_dir) -> Trainer:
    return Trainer(cfg, out_dir, pool=LocalPool(cfg, cfg.train.n_workers, cfg.train.seed))


def _with_total(cfg: AppConfig, total: int) -> AppConfig:
    return cfg.model_copy(update={"train": cfg.train.model_copy(update={"total_steps": total})})


def test_single_update(tiny_train_cfg, tmp_path):
    trainer = _trainer(tiny_train_cfg, tmp_path)
    summary = trainer.run()
    assert summary["updates"] == 1
    assert summary["steps"] == 16
    assert len(trainer.checkpoints) == 1
    assert json.loads((tmp_path / "summary.json").read_text())["updates"] == 1
    log = pd.read_csv(tmp_path / "training.csv")
    assert log["update"].tolist() == [1]
    assert log["lr"].iloc[0] == pytest.approx(1e-3)
    restored = load(trainer.checkpoints[0], tiny_train_cfg.network, tiny_train_cfg.lidar_front.n_beams)
    assert set(restored.tensors) == set(trainer.params.tensors)


def test_update_count(tmp_path):
    cfg = AppConfig(train=TrainConfig(n_workers=2, n_steps=2048, total_steps=4096))
    assert Trainer(cfg, tmp_path).n_updates == 1


def test_resume_continues(tiny_train_cfg, tmp_path):
    first = _trainer(_with_total(tiny_train_cfg, 32), tmp_path)
    first.run()
    assert first.update == 2
    state = json.loads((tmp_path / STATE_FILE).read_text())
    assert state["update"] == 2 and state["steps"] == 32

    second = _trainer(_with_total(tiny_train_cfg, 48), tmp_path)
    second.restore()
    assert (second.update, second.steps) == (2, 32)
    assert second.adr.d_h == first.adr.d_h
    stats = second.step_once()
    assert second.update == 3
    assert stats.lr == pytest.approx(lr_schedule(32 / 48))


def test_resume_without_state_starts_fresh(tiny_train_cfg, tmp_path):
    trainer = _trainer(tiny_train_cfg, tmp_path)
    trainer.restore()
    assert trainer.update == 0


def test_resume_restores_worker_streams(tiny_train_cfg, tmp_path):
    first = _trainer(_with_total(tiny_train_cfg, 32), tmp_path)
    first.run()
    saved = json.loads((tmp_path / STATE_FILE).read_text())["worker_rng"]
    assert saved == first.pool.rng_states()

    second = _trainer(_with_total(tiny_train_cfg, 48), tmp_path)
    fresh = second.pool.rng_states()
    second.restore()
    assert second.pool.rng_states() == saved
    assert second.pool.rng_states() != fresh
