"""
分析模块测试
秩研究、奇异实例搜索、可表示性、打乱研究、研究报告与反转探针
"""

import json
import sys
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.analysis import (
    PermutationClass,
    ShuffleSpec,
    StudyReport,
    construct_attention,
    diagonal_heavy,
    expected_equivariant,
    experiment_reports,
    find_singular_kmta,
    pair_accuracy,
    printed_example_check,
    rank_study,
    representation_study,
    sample_permutation,
    shuffle_study,
    singular_study,
    to_jsonable,
    transposition_heavy,
)
from src.attention import attention_matrix
from src.masks import build_mask, is_frame_preserving
from src.model import ShuffleStage, TemporalKind, init_params
from src.numerics import SeededRng, lu_determinant
from src.utils.errors import ConfigError
from tests.conftest import tiny_model_config


class TestRankStudy(unittest.TestCase):
    """秩研究测试"""

    @pytest.mark.slow
    def test_kmct_always_full_rank(self):
        """测试 200 次随机试验（T, S 取 2..6）中 KMCT 注意力矩阵全部满秩"""
        report = rank_study("kmct", t_range=(2, 6), s_range=(2, 6), trials=200, seed=0)
        self.assertTrue(report.passed)
        self.assertEqual(len({r["trial"] for r in report.trials}), 200)
        self.assertEqual(report.summary["matrices"], 200 * 2)
        self.assertTrue(all(2 <= r["t"] <= 6 and 2 <= r["s"] <= 6 for r in report.trials))
        self.assertEqual(report.summary["full_rank_rate"], 1.0)
        self.assertEqual(report.study, "rank-kmct")
        print(f"✅ KMCT 满秩: {report.summary['full_rank']}/{report.summary['matrices']}")

    def test_joint_zero_projection_rank_one(self):
        report = rank_study("joint", trials=5, construction="zero")
        self.assertTrue(report.passed)
        self.assertTrue(all(r["rank"] == 1 for r in report.trials))

    def test_identity_construction_full_rank(self):
        report = rank_study("kmt", trials=5, construction="identity")
        self.assertTrue(report.passed)

    def test_deterministic_and_worker_independent(self):
        """测试相同种子与不同线程数下报告逐字节相同"""
        a = rank_study("kmt", trials=6, seed=3).to_json()
        b = rank_study("kmt", trials=6, seed=3, workers=3).to_json()
        self.assertEqual(a, b)

    def test_trial_sizes_within_range(self):
        report = rank_study("spatial", t_range=(2, 3), s_range=(4, 4), trials=8)
        self.assertTrue(all(r["s"] == 4 and 2 <= r["t"] <= 3 for r in report.trials))

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigError):
            rank_study("kmt", trials=0)
        with self.assertRaises(ConfigError):
            rank_study("kmt", construction="magic")
        with self.assertRaises(ConfigError):
            rank_study("kmt", t_range=(3, 2))


class TestSingularSearch(unittest.TestCase):
    """KMT 奇异实例搜索测试"""

    def test_endpoints_have_opposite_sign(self):
        a, b = diagonal_heavy(2, 2), transposition_heavy(2, 2)
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-15)
        self.assertGreater(lu_determinant(a), 0.0)
        self.assertLess(lu_determinant(b), 0.0)

    def test_finds_singular_instance(self):
        """测试在 T=2, S=2 下找到满足模式的奇异行随机矩阵"""
        result = find_singular_kmta(2, 2)
        self.assertTrue(result.found)
        cert = result.certificate()
        self.assertTrue(cert["pattern_ok"])
        self.assertGreater(cert["min_positive"], 1e-4)
        self.assertLessEqual(cert["max_row_sum_error"], 1e-12)
        self.assertLess(cert["numerical_rank"], 4)
        print(f"✅ 奇异实例: lambda={result.lam}, |det|={cert['abs_det']:.3e}")

    def test_single_frame_escalates(self):
        result = find_singular_kmta(1, 4)
        self.assertGreaterEqual(result.t, 2)
        self.assertEqual(result.escalations[0]["t"], 1)

    def test_too_small(self):
        with self.assertRaises(ConfigError):
            find_singular_kmta(1, 2)

    def test_printed_example_exact(self):
        """测试 4x4 例子的精确行列式为 -4/125，精确秩为 4"""
        check = printed_example_check()
        self.assertEqual(check["exact_det"], "-4/125")
        self.assertEqual(check["exact_rank"], 4)
        self.assertFalse(check["singular"])
        self.assertTrue(check["pattern_ok"])

    def test_study_report(self):
        report = singular_study()
        self.assertTrue(report.summary["found"])
        self.assertEqual(report.summary["printed_example"]["exact_det"], "-4/125")
        self.assertTrue(report.passed)


class TestRepresentation(unittest.TestCase):
    """可表示性测试"""

    def test_exact_construction(self):
        rng = SeededRng(0)
        x = np.linalg.qr(rng.normal_array((5, 5)))[0]
        target = rng.uniform_array((5, 5), 0.1, 1.0)
        target /= target.sum(axis=1, keepdims=True)
        realized = attention_matrix(x, None, construct_attention(x, target), 0)
        np.testing.assert_allclose(realized, target, atol=1e-10)

    def test_low_dim_rejected(self):
        with self.assertRaises(ConfigError):
            construct_attention(np.eye(4)[:, :2], np.full((4, 4), 0.25))

    def test_study(self):
        report = representation_study(n_values=(4, 6), trials=2)
        self.assertTrue(report.passed)
        self.assertEqual(report.summary["unreachable_cases"], 4)


class TestPermutations(unittest.TestCase):
    """置换抽样与等变预期测试"""

    def test_classes(self):
        t, s = 3, 4
        for i in range(10):
            rng = SeededRng.derive(0, i)
            self.assertTrue(is_frame_preserving(sample_permutation("frame_preserving", t, s, rng), t, s))
            self.assertFalse(is_frame_preserving(sample_permutation("frame_mixing", t, s, rng), t, s))
            perm = sample_permutation("patch_frame_mixing", t, s, rng)
            self.assertFalse(is_frame_preserving(perm, t, s))
            np.testing.assert_array_equal(perm[::s], np.arange(t) * s)

    def test_mixing_needs_two_frames(self):
        with self.assertRaises(ConfigError):
            sample_permutation("frame_mixing", 1, 4, SeededRng(0))

    def test_expected_equivariance(self):
        t, s = 2, 3
        swap = np.arange(6)
        swap[0], swap[3] = 3, 0
        self.assertTrue(expected_equivariant(TemporalKind.JOINT, ShuffleStage.POST_TE, swap, t, s))
        self.assertFalse(expected_equivariant(TemporalKind.JOINT, ShuffleStage.PRE_TE, swap, t, s))
        self.assertFalse(expected_equivariant(TemporalKind.KMT, ShuffleStage.POST_TE, swap, t, s))
        within = np.array([1, 0, 2, 4, 3, 5])
        self.assertTrue(expected_equivariant(TemporalKind.KMCT, ShuffleStage.PRE_TE, within, t, s))
        self.assertTrue(expected_equivariant(TemporalKind.MEAN_POOL, ShuffleStage.POST_TE, swap, t, s))

    def test_spec_rejects_non_bijection(self):
        with self.assertRaises(ConfigError):
            ShuffleSpec(ShuffleStage.POST_TE, (0, 0, 1))


@pytest.fixture
def random_model(tiny_tokenizer):
    cfg = tiny_model_config(temporal_kind=TemporalKind.KMT, vocab_size=tiny_tokenizer.vocab_size)
    return cfg, init_params(cfg, SeededRng(0))


@pytest.mark.slow
def test_shuffle_frame_preserving_equivariant(random_model, tiny_tokenizer, tiny_dataset, tiny_descriptions):
    """测试 100 个帧内置换下 KMT 时序编码器全部等变"""
    cfg, params = random_model
    report = shuffle_study(params, cfg, tiny_tokenizer, tiny_dataset.val[:4], tiny_descriptions,
                           ShuffleStage.PRE_TE, PermutationClass.FRAME_PRESERVING, trials=100)
    assert report.summary["equivariant_trials"] == 100
    assert report.summary["max_delta_equivariant"] <= 1e-10
    assert report.passed


@pytest.mark.slow
def test_shuffle_frame_mixing_breaks_kmt(random_model, tiny_tokenizer, tiny_dataset, tiny_descriptions):
    """测试 100 个跨帧置换中至少 99 个破坏 KMT 时序编码器的等变性"""
    cfg, params = random_model
    report = shuffle_study(params, cfg, tiny_tokenizer, tiny_dataset.val[:4], tiny_descriptions,
                           ShuffleStage.POST_TE, PermutationClass.FRAME_MIXING, trials=100)
    assert report.summary["violations"] >= 99
    assert report.passed
    assert report.study == "shuffle-kmt-post-frame_mixing"


@pytest.mark.slow
def test_shuffle_frame_mixing_breaks_kmct(tiny_tokenizer, tiny_dataset, tiny_descriptions):
    cfg = tiny_model_config(temporal_kind=TemporalKind.KMCT, vocab_size=tiny_tokenizer.vocab_size)
    params = init_params(cfg, SeededRng(2))
    report = shuffle_study(params, cfg, tiny_tokenizer, tiny_dataset.val[:4], tiny_descriptions,
                           ShuffleStage.POST_TE, PermutationClass.FRAME_MIXING, trials=100)
    assert report.summary["violations"] >= 99
    assert report.passed


@pytest.mark.slow
def test_shuffle_joint_post_te_equivariant(tiny_tokenizer, tiny_dataset, tiny_descriptions):
    """测试联合注意力在 100 个任意置换下全部等变"""
    cfg = tiny_model_config(temporal_kind=TemporalKind.JOINT, vocab_size=tiny_tokenizer.vocab_size)
    params = init_params(cfg, SeededRng(1))
    report = shuffle_study(params, cfg, tiny_tokenizer, tiny_dataset.val[:3], tiny_descriptions,
                           ShuffleStage.POST_TE, PermutationClass.FRAME_MIXING, trials=100)
    assert report.summary["equivariant_trials"] == 100
    assert report.summary["max_delta_equivariant"] <= 1e-10
    assert report.passed


def test_shuffle_quick_smoke(random_model, tiny_tokenizer, tiny_dataset, tiny_descriptions):
    cfg, params = random_model
    report = shuffle_study(params, cfg, tiny_tokenizer, tiny_dataset.val[:2], tiny_descriptions,
                           ShuffleStage.POST_TE, PermutationClass.FRAME_MIXING, trials=3)
    assert report.summary["violations"] == 3
    assert len(report.trials) == 3


class TestStudyReport(unittest.TestCase):
    """研究报告测试"""

    def test_jsonable(self):
        value = to_jsonable({"a": np.float64(0.5), "b": np.arange(3), "c": (np.bool_(True),),
                             "d": float("nan"), "e": TemporalKind.KMT, 1: np.int32(7)})
        self.assertEqual(value, {"a": 0.5, "b": [0, 1, 2], "c": [True], "d": "nan", "e": "kmt", "1": 7})

    def test_save_load_round_trip(self):
        report = StudyReport("demo", 7, config={"x": 1}, summary={"y": np.float32(0.25)})
        report.add_check("something holds", True, "ok")
        report.add_check("something else holds", False)
        self.assertFalse(report.passed)
        with tempfile.TemporaryDirectory() as tmp:
            path = report.save(tmp)
            self.assertEqual(path.name, "demo-7.json")
            loaded = StudyReport.load(path)
            self.assertEqual(loaded.to_json(), report.to_json())
            self.assertFalse(json.loads(path.read_text(encoding="utf-8"))["passed"])

    def test_pair_accuracy(self):
        scores = np.array([[2.0, 1.0, 9.0], [0.0, 1.0, 9.0], [1.0, 0.0, 0.0]])
        labels = np.array([0, 0, 2])
        self.assertEqual(pair_accuracy(scores, labels, (0, 1)), 0.5)
        self.assertTrue(np.isnan(pair_accuracy(scores, labels, (1, 1))))


@pytest.mark.slow
def test_meanpool_cannot_separate_reversal(toy_experiment):
    """测试 MeanPool 对片段与反转片段的表示相同，增广准确率不超过一半"""
    reports = experiment_reports(toy_experiment, permutations=2)
    assert [r.study for r in reports] == ["reversal", "shuffle-accuracy"]
    by_kind = {r["kind"]: r for r in reports[0].trials}
    assert by_kind["meanpool"]["reversal_max_diff"] == 0.0
    assert by_kind["meanpool"]["augmented_accuracy"] <= 0.5
    assert by_kind["kmt"]["reversal_max_diff"] > 0.0
    assert set(reports[1].summary["drops"]) == {"kmt", "kmct", "joint"}


@pytest.mark.slow
def test_toy_models_share_tokenizer_and_dataset(toy_experiment):
    assert sorted(toy_experiment.models) == ["joint", "kmct", "kmt", "meanpool"]
    vocab = {m.tokenizer.vocab_size for m in toy_experiment.models.values()}
    assert vocab == {toy_experiment.tokenizer.vocab_size}
    frames = {replace(m.config, temporal_kind=TemporalKind.KMT) for m in toy_experiment.models.values()}
    assert len(frames) == 1


@pytest.mark.slow
def test_reversal_checks_at_default_scale(reversal_experiment):
    """测试默认规模下 KMT/KMCT 准确率至少 90% 且比 MeanPool 高 30 个百分点，MeanPool 不超过 60%"""
    reversal = experiment_reports(reversal_experiment, seed=0)[0]
    assert reversal.study == "reversal"
    assert len(reversal.checks) == 6
    failed = [(c.claim, c.detail) for c in reversal.checks if not c.passed]
    assert not failed, failed
    by_kind = {r["kind"]: r for r in reversal.trials}
    assert by_kind["meanpool"]["reversal_max_diff"] == 0.0
    assert len(reversal_experiment.dataset.val) == 4 * 50
    print(f"✅ 反转实验: {reversal.summary}")


@pytest.mark.slow
def test_shuffle_accuracy_ordering_at_default_scale(reversal_experiment):
    """测试 PostTE 跨帧打乱使 KMT/KMCT 的准确率下降严格大于联合注意力"""
    shuffle = experiment_reports(reversal_experiment, seed=0)[1]
    assert shuffle.study == "shuffle-accuracy"
    assert len(shuffle.checks) == 2
    failed = [(c.claim, c.detail) for c in shuffle.checks if not c.passed]
    assert not failed, failed
    drops = shuffle.summary["drops"]
    assert drops["kmt"] > drops["joint"]
    assert drops["kmct"] > drops["joint"]
    print(f"✅ 打乱准确率下降: {drops}")


if __name__ == '__main__':
    unittest.main()
