"""
错误类型定义
项目内所有领域异常的统一层级，CLI 依据该层级映射退出码
"""

from typing import Any, Dict, Optional


class ClaverError(Exception):
    """项目异常基类"""


class ShapeError(ClaverError, ValueError):
    """矩阵/张量形状不匹配"""


class OutOfRangeError(ClaverError, IndexError):
    """行号或注意力头编号越界"""


class DegenerateRowError(ClaverError, ArithmeticError):
    """softmax 某一行全部被掩码"""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row


class NumericalError(ClaverError, ArithmeticError):
    """数值计算失败（不收敛、非有限值、零范数）"""

    def __init__(self, message: str, iterations: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations


class MaskError(ClaverError, ValueError):
    """掩码类型或尺寸非法"""


class GeometryError(ClaverError, ValueError):
    """视频片段几何参数与配置不一致"""


class ConfigError(ClaverError, ValueError):
    """模型或运行配置非法"""


class DescriptionError(ClaverError, ValueError):
    """文本描述缺失或为空"""


class PromptError(ClaverError, ValueError):
    """格式化提示词非法"""


class TransportError(ClaverError):
    """网络传输失败（重试耗尽）"""


class ProtocolError(ClaverError):
    """补全响应格式错误"""


class GenerationError(ClaverError):
    """补全为空，或离线模式下缺少样例"""


class DatasetFormatError(ClaverError, ValueError):
    """数据集/检查点文件格式错误"""


class UnsupportedVersionError(DatasetFormatError):
    """文件版本不受支持"""

    def __init__(self, message: str, version: Optional[int] = None):
        super().__init__(message)
        self.version = version


class TrainingDivergedError(ClaverError, ArithmeticError):
    """训练损失出现非有限值"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
