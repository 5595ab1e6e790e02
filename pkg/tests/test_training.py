"""
训练循环测试
学习率调度、AdamW、确定性、发散处理与评估
"""

import itertools
import math
import sys
import unittest
from unittest import mock
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.model import (
    AdamW,
    OptimizerConfig,
    TemporalKind,
    evaluate,
    init_params,
    learning_rate,
    params_equal,
    train,
)
from src.numerics import SeededRng
from src.utils.errors import ConfigError, DescriptionError, TrainingDivergedError
from tests.conftest import tiny_model_config


class TestSchedule(unittest.TestCase):
    """学习率调度测试"""

    def test_warmup_then_cosine(self):
        cfg = OptimizerConfig(lr=1.0, epochs=10, warmup_epochs=1, min_lr_ratio=0.0)
        self.assertAlmostEqual(learning_rate(cfg, 0, 4), 0.25)
        self.assertAlmostEqual(learning_rate(cfg, 3, 4), 1.0)
        self.assertAlmostEqual(learning_rate(cfg, 4, 4), 1.0)
        self.assertAlmostEqual(learning_rate(cfg, 40, 4), 0.0)
        mid = 4 + (40 - 4) // 2
        self.assertAlmostEqual(learning_rate(cfg, mid, 4), 0.5)

    def test_constant_without_decay(self):
        cfg = OptimizerConfig(lr=0.1, warmup_epochs=0, cosine_decay=False)
        self.assertEqual(learning_rate(cfg, 123, 5), 0.1)

    def test_validation(self):
        with self.assertRaises(ConfigError):
            OptimizerConfig(lr=-1.0).validate()
        with self.assertRaises(ConfigError):
            OptimizerConfig(beta1=1.0).validate()


class TestAdamW(unittest.TestCase):
    """优化器测试"""

    def setUp(self):
        self.cfg = tiny_model_config()
        self.params = init_params(self.cfg, SeededRng(0))

    def test_zero_lr_keeps_params(self):
        opt = AdamW(OptimizerConfig())
        grads = {"pos_embed": np.ones_like(self.params.pos_embed)}
        self.assertTrue(params_equal(opt.step(self.params, grads, 0.0), self.params))

    def test_first_step_moves_by_lr(self):
        """测试首步更新幅度约为学习率（符号与梯度相反）"""
        opt = AdamW(OptimizerConfig(weight_decay=0.0))
        grads = {"pos_embed": np.full_like(self.params.pos_embed, 3.0)}
        updated = opt.step(self.params, grads, 0.01)
        np.testing.assert_allclose(updated.pos_embed, self.params.pos_embed - 0.01, atol=1e-8)
        np.testing.assert_array_equal(updated.class_token, self.params.class_token)

    def test_frozen_image_encoder(self):
        opt = AdamW(OptimizerConfig(freeze_image_encoder=True))
        grads = {"patch_proj": np.ones_like(self.params.patch_proj),
                 "time_embed": np.ones_like(self.params.time_embed)}
        updated = opt.step(self.params, grads, 0.1)
        np.testing.assert_array_equal(updated.patch_proj, self.params.patch_proj)
        self.assertFalse(np.array_equal(updated.time_embed, self.params.time_embed))


@pytest.mark.slow
class TestTrain(unittest.TestCase):
    """训练循环测试（慢速）"""

    @pytest.fixture(autouse=True)
    def _data(self, tiny_dataset, tiny_descriptions):
        self.dataset = tiny_dataset
        self.descriptions = tiny_descriptions

    def test_zero_lr_keeps_loss_constant(self):
        """测试 lr=0 时参数不变、固定批次损失不变"""
        opt = OptimizerConfig(lr=0.0, epochs=2, batch_size=8)
        result = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=0)
        initial = init_params(result.config, SeededRng.derive(0, 0))
        self.assertTrue(params_equal(result.params, initial))
        losses = [h.fixed_batch_loss for h in result.history]
        self.assertEqual(losses[0], losses[1])

    def test_same_seed_reproducible(self):
        opt = OptimizerConfig(lr=3e-3, epochs=2, batch_size=8, warmup_epochs=0)
        a = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=3)
        b = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=3)
        self.assertEqual(a.history_dicts(), b.history_dicts())
        self.assertTrue(params_equal(a.params, b.params))

    def test_fixed_batch_loss_decreases(self):
        """测试固定批次损失随训练下降"""
        opt = OptimizerConfig(lr=3e-3, epochs=5, batch_size=8, warmup_epochs=0, cosine_decay=False)
        result = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=0,
                       val_clips=self.dataset.val)
        losses = [h.fixed_batch_loss for h in result.history]
        self.assertLess(losses[-1], losses[0])
        self.assertTrue(all(h.val_accuracy is not None for h in result.history))
        self.assertEqual(len(result.history), 5)

    def test_divergence_reported_with_diagnostics(self):
        """测试损失非有限时中止并附带诊断信息"""
        opt = OptimizerConfig(lr=1e-3, epochs=1, batch_size=8)
        nan_loss = lambda g, *args: g.constant(np.array(np.nan))
        with mock.patch("src.model.trainer.contrastive_loss", side_effect=nan_loss):
            with self.assertRaises(TrainingDivergedError) as ctx:
                train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=0)
        self.assertEqual(ctx.exception.diagnostics["step"], 0)
        self.assertIn("param_norms", ctx.exception.diagnostics)

    def test_early_stop(self):
        opt = OptimizerConfig(lr=1e-3, epochs=4, batch_size=8, early_stop_accuracy=0.0)
        result = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=0,
                       val_clips=self.dataset.val)
        self.assertEqual(len(result.history), 1)

    def test_evaluate_confusion(self):
        opt = OptimizerConfig(lr=0.0, epochs=1, batch_size=8)
        result = train(self.dataset.train, self.descriptions, tiny_model_config(), opt, seed=0)
        ev = evaluate(result.params, result.config, result.tokenizer, self.dataset.val, self.descriptions)
        self.assertEqual(sum(map(sum, ev.confusion)), len(self.dataset.val))
        self.assertTrue(0.0 <= ev.accuracy <= 1.0)
        self.assertEqual(ev.to_dict()["accuracy"], ev.accuracy)


def test_single_sample_overfit(tiny_dataset, tiny_descriptions):
    """测试单个 (片段, 描述) 反复训练后固定批次损失降到 0.01 以下"""
    opt = OptimizerConfig(lr=3e-3, epochs=200, batch_size=1, warmup_epochs=0, cosine_decay=False)
    result = train(tiny_dataset.train[:1], tiny_descriptions, tiny_model_config(), opt, seed=0)
    losses = [h.fixed_batch_loss for h in result.history]
    assert len(losses) == 200
    assert losses[0] > 1.0
    assert losses[-1] < 0.01
    print(f"✅ 单样本过拟合: {losses[0]:.3f} -> {losses[-1]:.2e}")


def test_best_validation_epoch_restored(tiny_dataset, tiny_descriptions, monkeypatch):
    """测试提供验证集时返回验证准确率最高的 epoch 的参数"""
    import src.model.trainer as trainer

    accuracies = itertools.cycle([0.25, 0.75, 0.5])
    real_evaluate = trainer.evaluate
    snapshots = []

    def fake_evaluate(params, *args, **kwargs):
        snapshots.append(params)
        result = real_evaluate(params, *args, **kwargs)
        result.accuracy = next(accuracies)
        return result

    monkeypatch.setattr(trainer, "evaluate", fake_evaluate)
    opt = OptimizerConfig(lr=3e-3, epochs=3, batch_size=8, warmup_epochs=0)
    result = train(tiny_dataset.train, tiny_descriptions, tiny_model_config(), opt, seed=0,
                   val_clips=tiny_dataset.val)
    assert [h.val_accuracy for h in result.history] == [0.25, 0.75, 0.5]
    assert result.best_epoch == 2
    assert params_equal(result.params, snapshots[1])
    assert not params_equal(result.params, snapshots[2])

    last = train(tiny_dataset.train, tiny_descriptions, tiny_model_config(),
                 OptimizerConfig(lr=3e-3, epochs=3, batch_size=8, warmup_epochs=0, restore_best=False),
                 seed=0, val_clips=tiny_dataset.val)
    assert params_equal(last.params, snapshots[-1])


def test_train_rejects_missing_class(tiny_dataset, tiny_descriptions):
    partial = {k: v for k, v in tiny_descriptions.items() if k != 3}
    with pytest.raises(DescriptionError):
        train(tiny_dataset.train, partial, tiny_model_config(), OptimizerConfig(epochs=1), seed=0)


def test_train_rejects_empty_dataset(tiny_descriptions):
    with pytest.raises(ConfigError):
        train([], tiny_descriptions, tiny_model_config(), OptimizerConfig(epochs=1), seed=0)


def test_temporal_kind_survives_training_config():
    cfg = tiny_model_config(temporal_kind=TemporalKind.KMCT)
    assert cfg.temporal_kind is TemporalKind.KMCT
    assert math.isclose(cfg.temperature, 0.1)


if __name__ == '__main__':
    unittest.main()
