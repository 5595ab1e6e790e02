"""
配置管理器
统一管理模型、训练、数据集、分析研究、提示词与输出配置；
运行配置按 默认值 <- 配置文件 <- 命令行参数 的顺序合并
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "config/config.yaml"


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class ConfigManager:
    """统一配置管理器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化配置管理器

        Args:
            config_path: 配置文件路径（YAML 或 JSON），默认为 config/config.yaml
        """
        self.config_path = config_path or DEFAULT_CONFIG_PATH
        self.config = self._get_default_config()
        self._load_config()

    def _load_config(self):
        """加载配置文件并覆盖默认值"""
        config_file = Path(self.config_path)
        if not config_file.exists():
            logger.warning(f"⚠️ 配置文件不存在: {self.config_path}，使用默认配置")
            return
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            logger.error(f"❌ 配置文件解析失败: {e}")
            raise ConfigError(f"配置文件解析失败: {self.config_path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"配置文件顶层必须是映射: {self.config_path}")
        self.config = _deep_merge(self.config, loaded)
        logger.info(f"✅ 配置文件加载成功: {self.config_path}")

    @staticmethod
    def _get_default_config() -> Dict[str, Any]:
        """获取默认配置"""
        return {
            "seed": 0,
            "model": {
                "frames": 8,
                "height": 16,
                "width": 16,
                "channels": 1,
                "patch": 4,
                "dim": 32,
                "heads": 4,
                "image_layers": 3,
                "temporal_layers": None,
                "temporal_layer_scale": "third",
                "text_layers": 2,
                "max_text_len": 16,
                "descriptions_per_class": 8,
                "temperature": 0.07,
                "temporal_kind": "kmt",
                "scale_mode": "per_head",
            },
            "training": {
                "lr": 1e-3,
                "beta1": 0.9,
                "beta2": 0.98,
                "weight_decay": 0.001,
                "epochs": 30,
                "batch_size": 16,
                "warmup_epochs": 1,
                "cosine_decay": True,
                "min_lr_ratio": 0.01,
                "temporal_lr_mult": 1.0,
                "freeze_image_encoder": False,
                "descriptions_per_step": 1,
                "early_stop_accuracy": None,
                "restore_best": True,
            },
            "dataset": {
                "classes": ["move_left", "move_right", "move_up", "move_down"],
                "train_per_class": 200,
                "val_per_class": 50,
                "sprite": 4,
                "noise": 0.05,
            },
            "analysis": {
                "rank": {"t_range": [2, 6], "s_range": [2, 6], "trials": 200, "dim": 8, "heads": 2,
                         "rel_tol": 1e-8, "construction": "random", "workers": 1},
                "singular": {"t": 2, "s": 2, "budget": 200},
                "shuffle": {"trials": 100, "stage": "post", "permutation_class": "frame_mixing",
                            "clips": 8, "permutations": 5},
                "represent": {"n_values": [4, 6, 8], "trials": 5},
            },
            "prompts": {
                "preset": "decomposition",
                "aspect": "decomposition",
                "count": 4,
            },
            "llm": {
                "endpoint": "http://localhost:8000/v1",
                "model": "llama-3-8b-instruct",
                "temperature": 0.90,
                "top_p": 0.95,
                "max_tokens": 160,
                "timeout": 30,
                "retry_attempts": 3,
                "retry_delays": [1, 2, 4],
                "max_in_flight": 4,
                "offline": True,
                "cache_path": "outputs/prompt_cache.jsonl",
            },
            "output": {
                "dir": "outputs",
                "log_file": "logs/claver.log",
                "csv": True,
            },
        }

    def run_config(self, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """合并命令行覆盖项，得到完整解析的运行配置"""
        merged = copy.deepcopy(self.config)
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            node = merged
            *parents, leaf = dotted.split(".")
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
        seed = merged.pop("seed", 0)
        out_dir = merged.get("output", {}).get("dir", "outputs")
        return RunConfig(seed=int(seed), out_dir=str(out_dir), sections=merged)


@dataclass
class RunConfig:
    """一次 CLI 运行的完整配置，写入每份报告（密钥脱敏）"""
    seed: int = 0
    out_dir: str = "outputs"
    sections: Dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.sections.get(name, {}) or {})

    def get_model_config(self) -> Dict[str, Any]:
        """获取模型配置"""
        return self.section("model")

    def get_training_config(self) -> Dict[str, Any]:
        """获取训练配置"""
        return self.section("training")

    def get_dataset_config(self) -> Dict[str, Any]:
        """获取数据集配置"""
        return self.section("dataset")

    def get_analysis_config(self, study: Optional[str] = None) -> Dict[str, Any]:
        """获取分析研究配置；给定 study 时只返回该研究的小节"""
        analysis = self.section("analysis")
        return dict(analysis.get(study, {}) or {}) if study else analysis

    def get_prompt_config(self) -> Dict[str, Any]:
        """获取提示词配置"""
        return self.section("prompts")

    def get_output_config(self) -> Dict[str, Any]:
        """获取输出配置"""
        return self.section("output")

    def to_dict(self) -> Dict[str, Any]:
        sections = copy.deepcopy(self.sections)
        llm = sections.get("llm")
        if isinstance(llm, dict) and llm.get("api_key"):
            llm["api_key"] = "***"
        return {"seed": self.seed, "out_dir": self.out_dir, **sections}


# 全局配置管理器实例
_config_manager: Optional[ConfigManager] = None


def get_config_manager(config_path: Optional[str] = None) -> ConfigManager:
    """获取全局配置管理器实例；传入新路径时重新加载"""
    global _config_manager
    if _config_manager is None or (config_path and config_path != _config_manager.config_path):
        _config_manager = ConfigManager(config_path)
    return _config_manager
