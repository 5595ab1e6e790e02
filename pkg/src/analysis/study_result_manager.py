#!/usr/bin/env python3
"""
研究结果管理器
负责保存研究报告 JSON、CSV 摘要，以及把多份报告汇总成结论对照表
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .study_report import StudyReport

logger = logging.getLogger(__name__)


class StudyResultManager:
    """研究结果管理器"""

    def __init__(self, base_output_dir: str = "outputs", write_csv: bool = True):
        """
        初始化研究结果管理器

        Args:
            base_output_dir: 输出目录
            write_csv: 保存报告时是否同时输出逐试验 CSV
        """
        self.base_output_dir = Path(base_output_dir)
        self.write_csv = write_csv

    def save_report(self, report: StudyReport) -> Path:
        """保存报告 JSON（文件名 {study}-{seed}.json），按需附带 CSV"""
        path = report.save(self.base_output_dir)
        if self.write_csv and report.trials:
            self.save_trials_csv(report)
        return path

    def save_trials_csv(self, report: StudyReport) -> Path:
        """逐试验记录展平成表格"""
        frame = pd.json_normalize(report.to_dict()["trials"])
        path = self.base_output_dir / f"{report.study}-{report.seed}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        logger.info(f"📊 试验明细已保存: {path} ({len(frame)} 行)")
        return path

    def save_history_csv(self, history: Sequence[Dict[str, Any]], name: str) -> Path:
        """训练曲线"""
        path = self.base_output_dir / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(list(history)).to_csv(path, index=False)
        logger.info(f"📈 训练曲线已保存: {path}")
        return path

    def collect_reports(self, directory: Optional[str] = None) -> List[StudyReport]:
        """读取目录下全部报告 JSON，跳过非报告文件"""
        root = Path(directory) if directory else self.base_output_dir
        reports = []
        for path in sorted(root.glob("*.json")):
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except ValueError:
                logger.warning(f"⚠️ 跳过无法解析的文件: {path}")
                continue
            if isinstance(data, dict) and {"study", "seed", "checks"} <= set(data):
                reports.append(StudyReport.from_dict(data))
        logger.info(f"📂 共读取 {len(reports)} 份报告: {root}")
        return reports

    @staticmethod
    def checks_frame(reports: Sequence[StudyReport]) -> pd.DataFrame:
        rows = [
            {"study": r.study, "seed": r.seed, "claim": c.claim, "passed": c.passed, "detail": c.detail}
            for r in reports for c in r.checks
        ]
        return pd.DataFrame(rows, columns=["study", "seed", "claim", "passed", "detail"])

    def render_markdown(self, reports: Sequence[StudyReport]) -> str:
        """结论 / 检查结果对照表"""
        frame = self.checks_frame(reports)
        lines = ["# 研究结论汇总", "", "| 研究 | 种子 | 结论 | 结果 | 细节 |", "|---|---|---|---|---|"]
        for row in frame.itertuples(index=False):
            status = "✅ 通过" if row.passed else "❌ 未通过"
            detail = str(row.detail).replace("|", "\\|")
            lines.append(f"| {row.study} | {row.seed} | {row.claim} | {status} | {detail} |")
        passed = int(frame["passed"].sum()) if len(frame) else 0
        lines += ["", f"共 {len(frame)} 项检查，通过 {passed} 项。", ""]
        return "\n".join(lines)

    def save_summary(self, reports: Sequence[StudyReport], name: str = "report") -> Dict[str, Path]:
        """写出汇总 markdown 与 CSV"""
        self.base_output_dir.mkdir(parents=True, exist_ok=True)
        md_path = self.base_output_dir / f"{name}.md"
        md_path.write_text(self.render_markdown(reports), encoding="utf-8")
        csv_path = self.base_output_dir / f"{name}.csv"
        self.checks_frame(reports).to_csv(csv_path, index=False)
        logger.info(f"✅ 汇总报告已保存: {md_path}")
        return {"markdown": md_path, "csv": csv_path}
