"""
研究报告
各项研究的统一结果结构；相同种子重跑得到逐字节相同的 JSON
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """numpy 标量/数组、枚举、元组转成 JSON 可序列化的 Python 对象"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return value
    return value


@dataclass
class Check:
    """一条结论及其验证结果"""
    claim: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"claim": self.claim, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class StudyReport:
    study: str
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    trials: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)

    def add_check(self, claim: str, passed: bool, detail: str = "") -> Check:
        check = Check(claim, bool(passed), detail)
        self.checks.append(check)
        status = "✅" if check.passed else "❌"
        logger.info(f"{status} [{self.study}] {claim} {detail}".rstrip())
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable({
            "study": self.study,
            "seed": self.seed,
            "config": self.config,
            "trials": self.trials,
            "summary": self.summary,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    @property
    def filename(self) -> str:
        return f"{self.study}-{self.seed}.json"

    def save(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / self.filename
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        logger.info(f"💾 报告已保存: {path}")
        return path

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StudyReport":
        return cls(
            study=data["study"],
            seed=int(data["seed"]),
            config=data.get("config", {}),
            trials=data.get("trials", []),
            summary=data.get("summary", {}),
            checks=[Check(c["claim"], bool(c["passed"]), c.get("detail", "")) for c in data.get("checks", [])],
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StudyReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

