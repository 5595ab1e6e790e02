"""
命令行入口测试
子命令端到端运行、报告输出、配置合并与退出码
"""

import json
import sys
from pathlib import Path

import pytest
import yaml

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from src.analysis import StudyReport, StudyResultManager
from src.utils import ConfigManager
from src.utils.errors import ConfigError

TINY_CONFIG = {
    "seed": 0,
    "model": {"frames": 4, "height": 8, "width": 8, "channels": 1, "patch": 4, "dim": 16, "heads": 2,
              "image_layers": 1, "text_layers": 1, "max_text_len": 12, "descriptions_per_class": 2,
              "temperature": 0.1},
    "training": {"epochs": 1, "batch_size": 8, "warmup_epochs": 0},
    "dataset": {"train_per_class": 2, "val_per_class": 1, "sprite": 3},
    "analysis": {"rank": {"trials": 4}, "shuffle": {"trials": 3, "clips": 2, "permutations": 1},
                 "represent": {"n_values": [4], "trials": 1}},
    "output": {"log_file": None, "csv": True},
}


@pytest.fixture
def cli(tmp_path):
    """返回 run(*argv)：自动附加临时配置与输出目录"""
    config_path = tmp_path / "config.yaml"
    out_dir = tmp_path / "out"
    config = dict(TINY_CONFIG, llm={"cache_path": str(tmp_path / "cache.jsonl")})
    config_path.write_text(yaml.safe_dump(config, allow_unicode=True), encoding="utf-8")

    def run(*argv):
        return main([*argv, "--config", str(config_path), "--out", str(out_dir)])

    run.out_dir = out_dir
    return run


def load_report(out_dir: Path, name: str) -> dict:
    return json.loads((out_dir / name).read_text(encoding="utf-8"))


def test_help_exits_zero():
    assert main(["--help"]) == EXIT_OK


def test_missing_required_argument_is_usage_error():
    assert main(["mask", "dump", "--kind", "kmt"]) == EXIT_USAGE


def test_unsupported_mask_kind_is_usage_error(cli):
    assert cli("mask", "dump", "--kind", "meanpool", "--frames", "2", "--slots", "2") == EXIT_USAGE
    assert cli("mask", "dump", "--kind", "cls", "--frames", "2", "--slots", "2") == EXIT_USAGE


def test_mask_dump(cli, capsys):
    """测试掩码导出打印 0/1 行并写出报告"""
    assert cli("mask", "dump", "--kind", "kmt", "--frames", "2", "--slots", "2") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[:4] == ["0 1 0 0", "1 0 0 0", "0 0 0 1", "0 0 1 0"]
    report = load_report(cli.out_dir, "mask-kmt-0.json")
    assert report["passed"] is True
    assert report["config"]["run"]["seed"] == 0
    assert report["config"]["frames"] == 2


def test_seed_override_changes_report_name(cli):
    assert cli("mask", "dump", "--kind", "kmct", "--frames", "3", "--slots", "2", "--seed", "5") == EXIT_OK
    assert (cli.out_dir / "mask-kmct-5.json").exists()


def test_rank_and_csv(cli):
    assert cli("rank", "--kind", "kmct", "--trials", "3") == EXIT_OK
    report = load_report(cli.out_dir, "rank-kmct-0.json")
    assert report["summary"]["full_rank_rate"] == 1.0
    assert (cli.out_dir / "rank-kmct-0.csv").exists()


def test_rank_rejects_non_mask_kind(cli):
    assert cli("rank", "--kind", "meanpool") == EXIT_USAGE


def test_singular(cli, capsys):
    assert cli("singular") == EXIT_OK
    assert "printed_example_det=-4/125" in capsys.readouterr().out


def test_represent(cli):
    assert cli("represent") == EXIT_OK
    assert load_report(cli.out_dir, "represent-0.json")["passed"] is True


def test_shuffle_random_init(cli):
    assert cli("shuffle", "--kind", "joint", "--stage", "post", "--perm-class", "frame_mixing") == EXIT_OK
    report = load_report(cli.out_dir, "shuffle-joint-post-frame_mixing-0.json")
    assert report["summary"]["equivariant_trials"] == 3


def test_data_train_eval_report(cli, capsys):
    """测试 数据生成 -> 训练 -> 评估 -> 汇总 的完整流程"""
    assert cli("data", "gen") == EXIT_OK
    data_path = cli.out_dir / "dataset-0.clvd"
    assert data_path.exists()
    assert load_report(cli.out_dir, "data-0.json")["summary"]["train"] == 8

    checkpoint = cli.out_dir / "model.clvr"
    assert cli("train", "--data", str(data_path), "--temporal", "kmct", "--checkpoint", str(checkpoint)) == EXIT_OK
    assert checkpoint.exists()
    assert (cli.out_dir / "history-kmct-0.csv").exists()
    assert load_report(cli.out_dir, "train-kmct-0.json")["summary"]["epochs"] == 1

    assert cli("eval", "--checkpoint", str(checkpoint), "--data", str(data_path)) == EXIT_OK
    evaluation = load_report(cli.out_dir, "eval-kmct-0.json")
    assert 0.0 <= evaluation["summary"]["accuracy"] <= 1.0

    capsys.readouterr()
    assert cli("report") == EXIT_OK
    summary = Path(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary.name == "report.md"
    assert "研究结论汇总" in summary.read_text(encoding="utf-8")
    print("✅ 端到端流程完成")


def test_corrupted_dataset_exits_one(cli, tmp_path):
    bad = tmp_path / "bad.clvd"
    bad.write_bytes(b"junk")
    assert cli("train", "--data", str(bad)) == EXIT_FAILED


def test_report_on_empty_directory(cli):
    assert cli("report") == EXIT_FAILED


def test_report_with_failed_check(cli):
    failing = StudyReport("demo", 0)
    failing.add_check("never holds", False)
    StudyResultManager(str(cli.out_dir)).save_report(failing)
    assert cli("report") == EXIT_FAILED


def test_prompts_gen_offline(cli):
    assert cli("prompts", "gen", "--aspect", "synonym", "--count", "2") == EXIT_OK
    report = load_report(cli.out_dir, "prompts-synonym-0.json")
    assert report["config"]["offline"] is True
    assert report["summary"]["descriptions"] == 4
    assert (cli.out_dir / "descriptions-synonym-0.json").exists()


def test_prompts_gen_offline_unknown_concept(cli):
    assert cli("prompts", "gen", "--concepts", "juggling", "--aspect", "body_parts") == EXIT_FAILED


class TestConfigManager:
    """配置合并测试"""

    def test_defaults_when_file_missing(self, tmp_path):
        manager = ConfigManager(str(tmp_path / "missing.yaml"))
        run = manager.run_config()
        assert run.seed == 0
        assert run.get_model_config()["temporal_kind"] == "kmt"

    def test_file_and_overrides_merge(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: 3\nmodel:\n  dim: 64\n", encoding="utf-8")
        run = ConfigManager(str(path)).run_config({"model.heads": 8, "training.lr": None})
        assert run.seed == 3
        assert run.get_model_config()["dim"] == 64
        assert run.get_model_config()["heads"] == 8
        assert run.get_model_config()["patch"] == 4
        assert run.get_training_config()["lr"] == 1e-3
        assert run.to_dict()["seed"] == 3

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- just\n- a list\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            ConfigManager(str(path))

    def test_section_getters(self, tmp_path):
        run = ConfigManager(str(tmp_path / "missing.yaml")).run_config()
        assert run.get_analysis_config("rank")["trials"] == 200
        assert "shuffle" in run.get_analysis_config()
        assert run.get_dataset_config()["train_per_class"] == 200
        assert run.get_prompt_config()["preset"] == "decomposition"
        assert run.get_output_config()["csv"] is True

    def test_api_key_redacted_in_report_config(self, tmp_path):
        """测试写入报告的配置回显不含明文密钥"""
        path = tmp_path / "c.yaml"
        path.write_text("llm:\n  api_key: sk-secret\n", encoding="utf-8")
        run = ConfigManager(str(path)).run_config()
        assert run.to_dict()["llm"]["api_key"] == "***"
        assert run.sections["llm"]["api_key"] == "sk-secret"
        assert "sk-secret" not in json.dumps(run.to_dict())


def test_api_key_not_written_to_report(tmp_path):
    config_path = tmp_path / "config.yaml"
    config = dict(TINY_CONFIG, llm={"api_key": "sk-secret"})
    config_path.write_text(yaml.safe_dump(config, allow_unicode=True), encoding="utf-8")
    out_dir = tmp_path / "out"
    argv = ["mask", "dump", "--kind", "kmt", "--frames", "2", "--slots", "2",
            "--config", str(config_path), "--out", str(out_dir)]
    assert main(argv) == EXIT_OK
    text = (out_dir / "mask-kmt-0.json").read_text(encoding="utf-8")
    assert "sk-secret" not in text
    assert load_report(out_dir, "mask-kmt-0.json")["config"]["run"]["llm"]["api_key"] == "***"


def test_root_level_flags_survive_subcommand(tmp_path):
    """测试写在子命令之前的公共参数不会被子命令层的缺省值覆盖"""
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump(TINY_CONFIG, allow_unicode=True), encoding="utf-8")
    out_dir = tmp_path / "out"
    argv = ["--seed", "5", "--config", str(config_path), "--out", str(out_dir),
            "mask", "dump", "--kind", "kmt", "--frames", "2", "--slots", "2"]
    assert main(argv) == EXIT_OK
    assert (out_dir / "mask-kmt-5.json").exists()


def test_subcommand_flag_overrides_root_flag(tmp_path):
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump(TINY_CONFIG, allow_unicode=True), encoding="utf-8")
    out_dir = tmp_path / "out"
    argv = ["--seed", "5", "mask", "dump", "--kind", "kmt", "--frames", "2", "--slots", "2",
            "--seed", "6", "--config", str(config_path), "--out", str(out_dir)]
    assert main(argv) == EXIT_OK
    assert (out_dir / "mask-kmt-6.json").exists()
    assert not (out_dir / "mask-kmt-5.json").exists()


def test_utils_does_not_import_analysis():
    """测试 utils 层不依赖 analysis 层"""
    for path in (project_root / "src" / "utils").glob("*.py"):
        source = path.read_text(encoding="utf-8")
        assert "src.analysis" not in source, path.name
        assert "..analysis" not in source, path.name
    print("✅ utils 层未引用 analysis")
