"""
测试公共夹具
小尺寸模型/数据集配置，以及会话级缓存的玩具实验
"""

import sys
from pathlib import Path

import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.model import ModelConfig, OptimizerConfig, Tokenizer
from src.synthdata import DatasetConfig, default_description_store, descriptions_for, generate


def tiny_model_config(**overrides) -> ModelConfig:
    """4 帧 8x8 单通道，patch 4 -> 每帧 5 个 token"""
    base = dict(frames=4, height=8, width=8, channels=1, patch=4, dim=16, heads=2,
                image_layers=1, text_layers=1, max_text_len=12, num_classes=4,
                descriptions_per_class=2, temperature=0.1)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_dataset_config(**overrides) -> DatasetConfig:
    base = dict(train_per_class=6, val_per_class=3, frames=4, height=8, width=8, channels=1,
                sprite=3, noise=0.05, seed=0)
    base.update(overrides)
    return DatasetConfig(**base)


@pytest.fixture
def model_cfg():
    return tiny_model_config()


@pytest.fixture
def dataset_cfg():
    return tiny_dataset_config()


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate(tiny_dataset_config())


@pytest.fixture(scope="session")
def tiny_descriptions():
    cfg = tiny_dataset_config()
    return descriptions_for(cfg, default_description_store(cfg), 2)


@pytest.fixture(scope="session")
def tiny_tokenizer(tiny_descriptions):
    return Tokenizer.build(d.text for ds in tiny_descriptions.values() for d in ds)


@pytest.fixture(scope="session")
def toy_experiment():
    """会话级缓存：四种时序类型各训练几个 epoch"""
    from src.analysis import run_toy_experiment

    ds_cfg = tiny_dataset_config(train_per_class=8, val_per_class=4)
    opt = OptimizerConfig(lr=3e-3, epochs=3, batch_size=8, warmup_epochs=0)
    return run_toy_experiment(ds_cfg, tiny_model_config(), opt, seed=0)


@pytest.fixture(scope="session")
def reversal_experiment():
    """会话级缓存：默认配置（每类 200 训练 / 50 验证，30 个 epoch，种子 0）训练四种时序类型"""
    from src.analysis import run_toy_experiment

    return run_toy_experiment(DatasetConfig(), ModelConfig(), OptimizerConfig(), seed=0)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 训练玩具模型的慢速测试")
