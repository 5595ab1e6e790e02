"""
分析模块
秩研究、KMT 奇异实例搜索、token 打乱研究、反转探针、可表示性检查与玩具实验
"""

from .rank_study import CONSTRUCTIONS, rank_study
from .representation import construct_attention, representation_study
from .reversal_probe import pair_accuracy, probe_model, reversal_equality, reversal_probe
from .shuffle_study import (
    PermutationClass,
    ShuffleSpec,
    equivariance_delta,
    expected_equivariant,
    sample_permutation,
    shuffle_accuracy_study,
    shuffle_study,
)
from .singular_search import (
    SingularSearchResult,
    diagonal_heavy,
    find_singular_kmta,
    printed_example_check,
    singular_study,
    transposition_heavy,
)
from .study_report import Check, StudyReport, to_jsonable
from .study_result_manager import StudyResultManager
from .toy_experiment import DEFAULT_KINDS, ToyExperiment, experiment_reports, run_toy_experiment

__all__ = [
    "CONSTRUCTIONS",
    "rank_study",
    "construct_attention",
    "representation_study",
    "pair_accuracy",
    "probe_model",
    "reversal_equality",
    "reversal_probe",
    "PermutationClass",
    "ShuffleSpec",
    "equivariance_delta",
    "expected_equivariant",
    "sample_permutation",
    "shuffle_accuracy_study",
    "shuffle_study",
    "SingularSearchResult",
    "diagonal_heavy",
    "find_singular_kmta",
    "printed_example_check",
    "singular_study",
    "transposition_heavy",
    "Check",
    "StudyReport",
    "to_jsonable",
    "StudyResultManager",
    "DEFAULT_KINDS",
    "ToyExperiment",
    "experiment_reports",
    "run_toy_experiment",
]
