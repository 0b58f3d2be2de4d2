"""
工具函数模块
包含日志记录、异常层级、输入校验、数值格式化等实用功能
"""

import logging
import os
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np
import warnings
warnings.filterwarnings('ignore')


def setup_logging(level: Optional[str] = None):
    """设置日志记录"""
    level_name = (level or os.environ.get('FINITEGAP_LOG_LEVEL', 'INFO')).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.environ.get('FINITEGAP_LOG_FILE', 'finitegap.log')),
            logging.StreamHandler()
        ]
    )
    return logging.getLogger('finitegap')


def set_log_level(level: str):
    """调整全局日志级别（CLI 的 --verbose 使用）"""
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))


# ---------------------------------------------------------------------------
# 异常层级
# ---------------------------------------------------------------------------

class FiniteGapError(Exception):
    """所有数值工具包错误的基类"""


class ValidationError(FiniteGapError, ValueError):
    """输入不合法，index 指向出错的位置"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DomainError(FiniteGapError, ValueError):
    """点落在不允许的区域"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class NumericalDegeneracyError(FiniteGapError):
    """线性系统奇异或间隙过窄"""


class AccuracyError(FiniteGapError):
    """求积在节点上限内没有收敛"""

    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(FiniteGapError):
    """迭代没有收敛"""

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class PoleError(FiniteGapError):
    """剥离时遇到 M_n 的零点"""


class BoundaryError(FiniteGapError):
    """在带端点处求值"""


class UnsupportedSetError(FiniteGapError):
    """调和测度不是 1/p 的整数倍"""


class GeometryError(FiniteGapError):
    """圆相交、间隙闭合或约化失败"""


class WordLimitError(FiniteGapError):
    """字枚举数量超过上限"""


class FitFailure(FiniteGapError):
    """圆拟合残差停滞"""

    def __init__(self, message: str, history: Optional[List[float]] = None):
        super().__init__(message)
        self.history = list(history or [])


class DiagnosticError(FiniteGapError):
    """两种检测方法结果不一致"""

    def __init__(self, message: str, first: Iterable[float] = (), second: Iterable[float] = ()):
        super().__init__(message)
        self.first = list(first)
        self.second = list(second)


class ResolutionError(FiniteGapError):
    """环面采样过稀，特征标无法区分"""


class ConfigError(FiniteGapError, ValueError):
    """配置文件不合法"""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


def describe_error(error: Exception, context: str = "") -> str:
    """
    把异常转换为面向用户的提示

    Args:
        error: 异常对象
        context: 错误上下文

    Returns:
        用户友好的错误消息
    """
    if isinstance(error, (ValidationError, ConfigError)):
        where = f"（位置 {error.index}）" if getattr(error, 'index', None) is not None else ""
        return f"输入不合法{where}：{error}。{context}"
    elif isinstance(error, DomainError):
        return f"参数落在允许区域之外：{error}。{context}"
    elif isinstance(error, AccuracyError):
        return f"求积精度不足（残差 {format_number(error.residual, 3, scientific=True)}），请提高节点数。{context}"
    elif isinstance(error, (ConvergenceError, FitFailure)):
        return f"迭代没有收敛，请调整初值或容差。{context}"
    elif isinstance(error, (GeometryError, WordLimitError)):
        return f"几何构造失败：{error}。{context}"
    elif isinstance(error, ResolutionError):
        return f"环面采样过稀，请增加采样点数。{context}"
    elif isinstance(error, FiniteGapError):
        return f"数值计算失败：{error}。{context}"
    else:
        return f"未知错误：{error}。{context}"


def retry_numerical(func: Callable[[int], Any], max_retries: int = 3,
                    retry_on: tuple = (PoleError, ConvergenceError)) -> Any:
    """
    重试机制：func 接收尝试序号，调用方据此更换探针或细化步长

    Args:
        func: 以尝试序号为参数的计算函数
        max_retries: 最大尝试次数
        retry_on: 触发重试的异常类型

    Returns:
        func 的返回值
    """
    for attempt in range(max_retries):
        try:
            return func(attempt)
        except retry_on as e:
            if attempt < max_retries - 1:
                logger.warning(f"{type(e).__name__}: {e}; retry {attempt + 1}/{max_retries}")
                continue
            raise


def validate_endpoints(endpoints: Iterable[float]) -> np.ndarray:
    """
    验证端点序列：偶数个、严格递增、有限

    Args:
        endpoints: 端点列表

    Returns:
        端点数组
    """
    values = np.asarray(list(endpoints), dtype=float)
    if values.ndim != 1 or len(values) < 2 or len(values) % 2 != 0:
        raise ValidationError(f"need an even number (>= 2) of endpoints, got {len(values)}",
                              index=len(values))
    for i, value in enumerate(values):
        if not np.isfinite(value):
            raise ValidationError(f"endpoint {i} is not finite", index=i)
        if i > 0 and value <= values[i - 1]:
            raise ValidationError(f"endpoints must be strictly increasing (index {i})", index=i)
    return values


def phase_distance(u: complex, v: complex) -> float:
    """两个单位复数之间的相位距离，取值 [0, π]"""
    return float(abs(np.angle(complex(u) / complex(v))))


def format_number(value: float, decimals: int = 6, scientific: bool = False) -> str:
    """
    格式化数字显示

    Args:
        value: 数值
        decimals: 小数位数
        scientific: 是否使用科学计数法

    Returns:
        格式化后的字符串
    """
    try:
        if np.isnan(value):
            return "N/A"
        if np.isinf(value):
            return "-inf" if value < 0 else "inf"
        return f"{value:.{decimals}e}" if scientific else f"{value:.{decimals}f}"
    except (TypeError, ValueError):
        return "N/A"


def to_serializable(value: Any) -> Any:
    """把 numpy / 复数等对象转换为 JSON 可写的形式"""
    if isinstance(value, dict):
        return {str(k): to_serializable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_serializable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_serializable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(np.real(value)), 'im': float(np.imag(value))}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "-inf" if value < 0 else "inf"
        return value
    return value


def create_check(name: str, value: float, reference: float, tolerance: float) -> Dict[str, Any]:
    """
    创建一条通过/失败检查记录

    Args:
        name: 检查名称
        value: 计算值
        reference: 参考值
        tolerance: 容差

    Returns:
        检查记录字典
    """
    error = float(abs(value - reference))
    return {
        'check': name,
        'value': value,
        'reference': reference,
        'error': error,
        'tolerance': tolerance,
        'passed': bool(error <= tolerance),
    }


# 全局日志记录器
logger = setup_logging()
