#!/usr/bin/env python3
"""
Kronecker 掩码时序注意力实验平台
命令行入口

子命令覆盖掩码导出、秩研究、奇异实例搜索、token 打乱研究、反转实验、
合成数据生成、训练、评估、解释性提示词生成、可表示性检查与报告汇总。
退出码：0 成功，1 检查未通过或运行错误，2 用法错误。
"""

import argparse
import asyncio
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# 添加项目根目录到Python路径
sys.path.insert(0, str(Path(__file__).parent))

from src.analysis import (
    PermutationClass,
    StudyReport,
    experiment_reports,
    probe_model,
    rank_study,
    representation_study,
    run_toy_experiment,
    shuffle_study,
    singular_study,
)
from src.analysis.toy_experiment import experiment_descriptions, model_config_for
from src.masks import MaskKind, build_mask, equivalent_via_kron, mask_to_dict, mask_to_json, render_ascii
from src.model import (
    ModelConfig,
    OptimizerConfig,
    ShuffleStage,
    TemporalKind,
    Tokenizer,
    TrainResult,
    evaluate,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from src.numerics import SeededRng
from src.prompts import Aspect, DescriptionStore, PromptCache, PromptRequest, generate_many
from src.synthdata import DatasetConfig, generate, load_dataset, save_dataset
from src.utils import ClaverError, LLMConfigManager, RunConfig, get_config_manager, setup_logging
from src.utils.llm_client import ChatCompletionClient
from src.analysis import StudyResultManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

KIND_CHOICES = ["joint", "spatial", "pipeline", "cls", "kmt", "kmct", "meanpool"]


class UsageError(Exception):
    """参数组合非法"""


def _known(cls, section: Dict[str, Any]) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in section.items() if k in names}


def model_config(run: RunConfig) -> ModelConfig:
    return ModelConfig.from_dict(run.get_model_config())


def optimizer_config(run: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(**_known(OptimizerConfig, run.get_training_config()))


def dataset_config(run: RunConfig) -> DatasetConfig:
    model = run.get_model_config()
    section = dict(run.get_dataset_config())
    for key in ("frames", "height", "width", "channels"):
        if key in model:
            section.setdefault(key, model[key])
    section["seed"] = run.seed
    return DatasetConfig(**_known(DatasetConfig, section))


def _temporal_kind(value: Optional[str]) -> Optional[TemporalKind]:
    if value is None:
        return None
    try:
        return TemporalKind(value)
    except ValueError:
        raise UsageError(f"{value} 不是时序编码器类型，可选 {[k.value for k in TemporalKind]}")


def _finish(run: RunConfig, reports: Sequence[StudyReport]) -> int:
    """写出报告并根据检查结果决定退出码"""
    output = run.get_output_config()
    manager = StudyResultManager(run.out_dir, write_csv=bool(output.get("csv", True)))
    for report in reports:
        report.config = {"run": run.to_dict(), **report.config}
        manager.save_report(report)
    failed = [r.study for r in reports if not r.passed]
    if failed:
        logger.error(f"❌ 检查未通过: {failed}")
        return EXIT_FAILED
    return EXIT_OK


def _dataset(run: RunConfig, data_path: Optional[str]):
    if data_path:
        return load_dataset(data_path)
    return generate(dataset_config(run))


# ---- 子命令 ---------------------------------------------------------

def cmd_mask_dump(args, run: RunConfig) -> int:
    if args.kind not in {k.value for k in MaskKind} or args.kind == MaskKind.CLASS_TOKEN_ONLY.value:
        raise UsageError(f"mask dump 不支持 {args.kind}")
    mask = build_mask(args.kind, args.frames, args.slots)
    for row in mask.pattern():
        print(" ".join(str(int(v)) for v in row))
    print()
    print(render_ascii(mask))
    print(mask_to_json(mask))

    report = StudyReport(study=f"mask-{mask.kind.value}", seed=run.seed,
                         config={"kind": mask.kind.value, "frames": args.frames, "slots": args.slots},
                         summary=mask_to_dict(mask))
    report.add_check("谓词构造与 Kronecker 代数逐元素一致", equivalent_via_kron(mask))
    return _finish(run, [report])


def cmd_rank(args, run: RunConfig) -> int:
    section = run.get_analysis_config("rank")
    if args.kind in ("cls", "meanpool"):
        raise UsageError(f"rank 不支持 {args.kind}")
    t_range = [args.frames, args.frames] if args.frames else section.get("t_range", [2, 6])
    s_range = [args.slots, args.slots] if args.slots else section.get("s_range", [2, 6])
    report = rank_study(args.kind, t_range, s_range,
                        trials=args.trials or section.get("trials", 200),
                        rel_tol=section.get("rel_tol", 1e-8), seed=run.seed,
                        dim=section.get("dim", 8), heads=section.get("heads", 2),
                        construction=args.construction or section.get("construction", "random"),
                        workers=section.get("workers", 1))
    return _finish(run, [report])


def cmd_singular(args, run: RunConfig) -> int:
    section = run.get_analysis_config("singular")
    report = singular_study(args.frames or section.get("t", 2), args.slots or section.get("s", 2),
                            budget=section.get("budget", 200), seed=run.seed)
    summary = report.summary
    print(f"found={summary['found']} T={summary['t']} S={summary['s']} "
          f"printed_example_det={summary['printed_example']['exact_det']}")
    return _finish(run, [report])


def cmd_represent(args, run: RunConfig) -> int:
    section = run.get_analysis_config("represent")
    report = representation_study(tuple(section.get("n_values", (4, 6, 8))),
                                  trials=args.trials or section.get("trials", 5), seed=run.seed)
    return _finish(run, [report])


def cmd_shuffle(args, run: RunConfig) -> int:
    section = run.get_analysis_config("shuffle")
    if args.checkpoint:
        cfg, params, tokenizer = load_checkpoint(args.checkpoint)
        if tokenizer is None:
            raise UsageError("检查点缺少词表，无法编码描述")
    else:
        kind = _temporal_kind(args.kind or run.get_model_config().get("temporal_kind", "kmt"))
        cfg = model_config_for(dataset_config(run), model_config(run), kind)
    ds_cfg = replace(dataset_config(run), train_per_class=1, val_per_class=1,
                     frames=cfg.frames, height=cfg.height, width=cfg.width, channels=cfg.channels)
    descriptions = experiment_descriptions(ds_cfg, cfg.descriptions_per_class,
                                           run.get_prompt_config().get("preset", "decomposition"))
    if not args.checkpoint:
        tokenizer = Tokenizer.build(d.text for ds in descriptions.values() for d in ds)
        cfg = replace(cfg, vocab_size=tokenizer.vocab_size)
        params = init_params(cfg, SeededRng.derive(run.seed, 0))

    clips = _dataset(run, args.data).val[:section.get("clips", 8)]
    report = shuffle_study(params, cfg, tokenizer, clips, descriptions,
                           ShuffleStage(args.stage or section.get("stage", "post")),
                           PermutationClass(args.perm_class or section.get("permutation_class", "frame_mixing")),
                           trials=args.trials or section.get("trials", 100), seed=run.seed)
    return _finish(run, [report])


def cmd_reversal(args, run: RunConfig) -> int:
    section = run.get_analysis_config("shuffle")
    ds = _dataset(run, args.data)
    kinds = [_temporal_kind(k) for k in (args.kinds or ["meanpool", "kmt", "kmct", "joint"])]
    experiment = run_toy_experiment(ds.config, model_config(run), optimizer_config(run), kinds, seed=run.seed,
                                    preset=run.get_prompt_config().get("preset", "decomposition"),
                                    progress=args.progress, dataset=ds)
    reports = experiment_reports(experiment, seed=run.seed, permutations=section.get("permutations", 5))
    for report in reports:
        print(f"{report.study}: {report.summary}")
    return _finish(run, reports)


def cmd_data_gen(args, run: RunConfig) -> int:
    cfg = dataset_config(run)
    ds = generate(cfg)
    path = save_dataset(Path(run.out_dir) / f"dataset-{run.seed}.clvd", ds)
    print(path)
    report = StudyReport(study="data", seed=run.seed, config={"dataset": cfg.to_dict()},
                         summary={"path": path.name, "train": len(ds.train), "val": len(ds.val)})
    return _finish(run, [report])


def cmd_train(args, run: RunConfig) -> int:
    ds = _dataset(run, args.data)
    base = model_config(run)
    cfg = model_config_for(ds.config, base, base.temporal_kind)
    descriptions = experiment_descriptions(ds.config, cfg.descriptions_per_class,
                                           run.get_prompt_config().get("preset", "decomposition"))
    result = train(ds.train, descriptions, cfg, optimizer_config(run), run.seed, val_clips=ds.val,
                   progress=args.progress)
    kind = result.config.temporal_kind.value
    checkpoint = Path(args.checkpoint or Path(run.out_dir) / f"model-{kind}-{run.seed}.clvr")
    save_checkpoint(checkpoint, result.config, result.params, result.tokenizer)
    StudyResultManager(run.out_dir).save_history_csv(result.history_dicts(), f"history-{kind}-{run.seed}")

    final = result.history[-1] if result.history else None
    report = StudyReport(study=f"train-{kind}", seed=run.seed,
                         config={"model": result.config.to_dict(), "optimizer": optimizer_config(run).to_dict()},
                         trials=result.history_dicts(),
                         summary={"checkpoint": checkpoint.name, "epochs": len(result.history),
                                  "val_accuracy": final.val_accuracy if final else None})
    print(f"checkpoint={checkpoint} val_accuracy={report.summary['val_accuracy']}")
    return _finish(run, [report])


def cmd_eval(args, run: RunConfig) -> int:
    cfg, params, tokenizer = load_checkpoint(args.checkpoint)
    if tokenizer is None:
        raise UsageError("检查点缺少词表，无法编码描述")
    ds = _dataset(run, args.data)
    descriptions = experiment_descriptions(ds.config, cfg.descriptions_per_class,
                                           run.get_prompt_config().get("preset", "decomposition"))
    result = evaluate(params, cfg, tokenizer, ds.val, descriptions)

    probe = probe_model(TrainResult(cfg, params, tokenizer), ds.val, descriptions, ds.config)
    report = StudyReport(study=f"eval-{cfg.temporal_kind.value}", seed=run.seed,
                         config={"checkpoint": Path(args.checkpoint).name, "model": cfg.to_dict()},
                         summary={**result.to_dict(), "pair_accuracy": probe["pair_accuracy"],
                                  "augmented_accuracy": probe["augmented_accuracy"],
                                  "reversal_max_diff": probe["reversal_max_diff"]})
    print(f"accuracy={result.accuracy:.4f} pair_accuracy={probe['pair_accuracy']}")
    return _finish(run, [report])


def cmd_prompts_gen(args, run: RunConfig) -> int:
    llm = LLMConfigManager(config=run.sections).get_llm_config()
    if args.endpoint:
        llm.endpoint = args.endpoint
    offline = llm.offline and not args.online
    section = run.get_prompt_config()
    aspect = Aspect(args.aspect or section.get("aspect", "decomposition"))
    count = args.count or section.get("count", 4)
    concepts = args.concepts or dataset_config(run).labels

    request = PromptRequest(llm.endpoint, llm.model, temperature=llm.temperature, top_p=llm.top_p,
                            max_tokens=llm.max_tokens)
    cache = PromptCache(args.cache or llm.cache_path)

    async def run_generation():
        async with ChatCompletionClient(llm) as client:
            return await generate_many(list(enumerate(concepts)), aspect, count, request, cache,
                                       client=client, offline=offline, max_in_flight=llm.max_in_flight)

    generated = asyncio.run(run_generation())
    store = DescriptionStore()
    for class_id, concept in enumerate(concepts):
        store.add_label(class_id, concept)
        store.extend(generated[class_id])
    store.save(str(Path(run.out_dir) / f"descriptions-{aspect.value}-{run.seed}.json"))

    report = StudyReport(study=f"prompts-{aspect.value}", seed=run.seed,
                         config={"llm": llm.to_dict(), "aspect": aspect.value, "count": count,
                                 "offline": offline, "concepts": list(concepts)},
                         trials=[{"class": k, "concept": concepts[k], "text": d.text, "source": d.source}
                                 for k in sorted(generated) for d in generated[k]],
                         summary={"descriptions": sum(len(v) for v in generated.values())})
    return _finish(run, [report])


def cmd_report(args, run: RunConfig) -> int:
    manager = StudyResultManager(run.out_dir)
    reports = manager.collect_reports(args.reports_dir)
    if not reports:
        logger.warning(f"⚠️ 目录中没有报告: {args.reports_dir or run.out_dir}")
        return EXIT_FAILED
    paths = manager.save_summary(reports)
    print(paths["markdown"])
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


# ---- 参数解析 -------------------------------------------------------

def add_common_arguments(parser: argparse.ArgumentParser):
    suppress = parser.argument_default == argparse.SUPPRESS
    parser.add_argument("--seed", type=int, help="全局随机种子（默认取配置文件）")
    parser.add_argument("--config", help="配置文件路径（YAML 或 JSON）")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--log-level", default=argparse.SUPPRESS if suppress else "INFO", help="日志级别")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Kronecker 掩码时序注意力实验平台")
    add_common_arguments(parser)
    # 子命令层的公共参数未给出时不写入命名空间，不会覆盖上层的值
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    add_common_arguments(common)
    sub = parser.add_subparsers(dest="command", required=True)

    mask = sub.add_parser("mask", help="掩码工具", parents=[common])
    mask_sub = mask.add_subparsers(dest="action", required=True)
    dump = mask_sub.add_parser("dump", help="打印掩码模式", parents=[common])
    dump.add_argument("--kind", required=True, choices=KIND_CHOICES, help="掩码类型")
    dump.add_argument("--frames", type=int, required=True, help="帧数 T")
    dump.add_argument("--slots", type=int, required=True, help="每帧 token 数 S")
    dump.set_defaults(handler=cmd_mask_dump)

    rank = sub.add_parser("rank", help="注意力矩阵秩研究", parents=[common])
    rank.add_argument("--kind", required=True, choices=KIND_CHOICES, help="掩码类型")
    rank.add_argument("--trials", type=int, help="试验次数")
    rank.add_argument("--frames", type=int, help="固定帧数 T（默认在区间内抽样）")
    rank.add_argument("--slots", type=int, help="固定每帧 token 数 S")
    rank.add_argument("--construction", choices=["random", "zero", "identity"], help="参数构造方式")
    rank.set_defaults(handler=cmd_rank)

    singular = sub.add_parser("singular", help="KMT 奇异实例搜索", parents=[common])
    singular.add_argument("--frames", type=int, help="帧数 T")
    singular.add_argument("--slots", type=int, help="每帧 token 数 S")
    singular.set_defaults(handler=cmd_singular)

    represent = sub.add_parser("represent", help="注意力可表示性检查", parents=[common])
    represent.add_argument("--trials", type=int, help="每个 n 的试验次数")
    represent.set_defaults(handler=cmd_represent)

    shuffle = sub.add_parser("shuffle", help="token 打乱研究", parents=[common])
    shuffle.add_argument("--kind", choices=KIND_CHOICES, help="时序编码器类型（无检查点时）")
    shuffle.add_argument("--checkpoint", help="CLVR 检查点；缺省使用随机初始化模型")
    shuffle.add_argument("--data", help="CLVD 数据集；缺省按配置生成")
    shuffle.add_argument("--stage", choices=[s.value for s in ShuffleStage], help="打乱阶段")
    shuffle.add_argument("--perm-class", choices=[p.value for p in PermutationClass], help="置换类别")
    shuffle.add_argument("--trials", type=int, help="置换个数")
    shuffle.set_defaults(handler=cmd_shuffle)

    reversal = sub.add_parser("reversal", help="反转对实验（训练多个时序类型）", parents=[common])
    reversal.add_argument("--data", help="CLVD 数据集；缺省按配置生成")
    reversal.add_argument("--kinds", nargs="+", choices=[k.value for k in TemporalKind], help="参与比较的类型")
    reversal.add_argument("--epochs", type=int, help="训练轮数")
    reversal.add_argument("--lr", type=float, help="学习率")
    reversal.add_argument("--progress", action="store_true", help="显示进度条")
    reversal.set_defaults(handler=cmd_reversal)

    data = sub.add_parser("data", help="合成数据集", parents=[common])
    data_sub = data.add_subparsers(dest="action", required=True)
    gen = data_sub.add_parser("gen", help="生成并保存 CLVD 数据集", parents=[common])
    gen.add_argument("--per-class", type=int, help="每类训练样本数")
    gen.add_argument("--val-per-class", type=int, help="每类验证样本数")
    gen.add_argument("--frames", type=int, help="帧数 T")
    gen.set_defaults(handler=cmd_data_gen)

    train_p = sub.add_parser("train", help="训练视频-文本模型", parents=[common])
    train_p.add_argument("--temporal", choices=[k.value for k in TemporalKind], help="时序编码器类型")
    train_p.add_argument("--epochs", type=int, help="训练轮数")
    train_p.add_argument("--lr", type=float, help="学习率")
    train_p.add_argument("--data", help="CLVD 数据集；缺省按配置生成")
    train_p.add_argument("--checkpoint", help="检查点输出路径")
    train_p.add_argument("--progress", action="store_true", help="显示进度条")
    train_p.set_defaults(handler=cmd_train)

    eval_p = sub.add_parser("eval", help="评估检查点", parents=[common])
    eval_p.add_argument("--checkpoint", required=True, help="CLVR 检查点")
    eval_p.add_argument("--data", help="CLVD 数据集；缺省按配置生成")
    eval_p.set_defaults(handler=cmd_eval)

    prompts = sub.add_parser("prompts", help="解释性提示词", parents=[common])
    prompts_sub = prompts.add_subparsers(dest="action", required=True)
    pgen = prompts_sub.add_parser("gen", help="生成解释性描述", parents=[common])
    pgen.add_argument("--aspect", choices=[a.value for a in Aspect], help="设计角度")
    pgen.add_argument("--count", type=int, help="每个概念的条数")
    pgen.add_argument("--concepts", nargs="+", help="动作概念（缺省为数据集类别标签）")
    pgen.add_argument("--endpoint", help="OpenAI 兼容端点，覆盖配置与环境变量")
    pgen.add_argument("--online", action="store_true", help="允许网络请求（默认离线）")
    pgen.add_argument("--cache", help="JSONL 缓存路径")
    pgen.set_defaults(handler=cmd_prompts_gen)

    report = sub.add_parser("report", help="汇总 JSON 报告为 markdown 对照表", parents=[common])
    report.add_argument("--reports-dir", help="报告目录（默认 --out）")
    report.set_defaults(handler=cmd_report)
    return parser


def _overrides(args) -> Dict[str, Any]:
    """命令行参数 -> 配置覆盖项（点号路径）"""
    mapping = {
        "seed": "seed",
        "out": "output.dir",
        "epochs": "training.epochs",
        "lr": "training.lr",
        "temporal": "model.temporal_kind",
        "per_class": "dataset.train_per_class",
        "val_per_class": "dataset.val_per_class",
    }
    out = {dotted: getattr(args, name) for name, dotted in mapping.items() if getattr(args, name, None) is not None}
    if args.command == "data" and getattr(args, "frames", None):
        out["model.frames"] = args.frames
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    try:
        run = get_config_manager(args.config).run_config(_overrides(args))
        setup_logging(args.log_level, run.get_output_config().get("log_file"))
        logger.info(f"🚀 执行子命令: {args.command} (seed={run.seed}, out={run.out_dir})")
        code = args.handler(args, run)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ClaverError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILED

    if code == EXIT_OK:
        logger.info("🎉 操作成功完成")
    return code


if __name__ == "__main__":
    sys.exit(main())
