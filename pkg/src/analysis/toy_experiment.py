"""
玩具实验编排
生成反转对数据集，按时序类型分别训练，再跑反转探针与打乱准确率研究
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from ..model import ModelConfig, OptimizerConfig, TemporalKind, TrainResult, train
from ..model.tokenizer import TextDescription, Tokenizer
from ..prompts import PROMPT_PRESETS
from ..synthdata import Dataset, DatasetConfig, default_description_store, descriptions_for, generate
from .reversal_probe import reversal_probe
from .shuffle_study import PermutationClass, shuffle_accuracy_study
from .study_report import StudyReport

logger = logging.getLogger(__name__)

DEFAULT_KINDS = (TemporalKind.MEAN_POOL, TemporalKind.KMT, TemporalKind.KMCT, TemporalKind.JOINT)


@dataclass
class ToyExperiment:
    dataset: Dataset
    descriptions: Dict[int, List[TextDescription]]
    tokenizer: Tokenizer
    models: Dict[str, TrainResult] = field(default_factory=dict)


def experiment_descriptions(dataset_cfg: DatasetConfig, m: int, preset: str = "decomposition"
                            ) -> Dict[int, List[TextDescription]]:
    preset_cfg = PROMPT_PRESETS[preset]
    store = default_description_store(dataset_cfg)
    return descriptions_for(dataset_cfg, store, m, preset_cfg["templates"], preset_cfg["aspects"])


def model_config_for(dataset_cfg: DatasetConfig, base: ModelConfig, kind: TemporalKind) -> ModelConfig:
    return replace(base, frames=dataset_cfg.frames, height=dataset_cfg.height, width=dataset_cfg.width,
                   channels=dataset_cfg.channels, num_classes=len(dataset_cfg.classes),
                   temporal_kind=TemporalKind(kind))


def run_toy_experiment(dataset_cfg: DatasetConfig, model_cfg: ModelConfig, opt_cfg: OptimizerConfig,
                       kinds: Sequence[TemporalKind] = DEFAULT_KINDS, seed: int = 0,
                       preset: str = "decomposition", progress: bool = False,
                       dataset: Optional[Dataset] = None) -> ToyExperiment:
    """
    训练全部时序类型

    所有模型共享同一数据集、描述集与分词器；各模型以相同种子初始化
    """
    dataset = dataset or generate(dataset_cfg)
    descriptions = experiment_descriptions(dataset_cfg, model_cfg.descriptions_per_class, preset)
    tokenizer = Tokenizer.build(d.text for ds in descriptions.values() for d in ds)
    experiment = ToyExperiment(dataset, descriptions, tokenizer)

    for kind in kinds:
        cfg = model_config_for(dataset_cfg, model_cfg, kind)
        logger.info(f"🎯 训练玩具模型: {cfg.temporal_kind.value}")
        experiment.models[cfg.temporal_kind.value] = train(
            dataset.train, descriptions, cfg, opt_cfg, seed, val_clips=dataset.val,
            tokenizer=tokenizer, progress=progress)
    return experiment


def experiment_reports(experiment: ToyExperiment, seed: int = 0, permutations: int = 5) -> List[StudyReport]:
    """反转探针 + 打乱准确率两份报告"""
    cfg = experiment.dataset.config
    reports = [reversal_probe(experiment.models, experiment.dataset.val, experiment.descriptions, cfg, seed)]
    shuffle_models = {k: v for k, v in experiment.models.items() if k != TemporalKind.MEAN_POOL.value}
    if shuffle_models:
        reports.append(shuffle_accuracy_study(shuffle_models, experiment.dataset.val, experiment.descriptions,
                                              PermutationClass.PATCH_FRAME_MIXING, permutations=permutations,
                                              seed=seed))
    return reports
