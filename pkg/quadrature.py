"""
求积模块
Gauss-Legendre 节点、带端点平方根奇性的区间规则（余弦代换 + 三次分级）以及自适应倍增
"""

from functools import lru_cache
from typing import Callable, NamedTuple, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from utils import AccuracyError, logger

# 自适应倍增的默认参数
DEFAULT_TOLERANCE = 1e-10
MAX_NODES = 2 ** 14


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """[-1, 1] 上的 n 点 Gauss-Legendre 节点与权重"""
    nodes, weights = leggauss(int(n))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def interval_rule(a: float, b: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    [a, b] 上的 Gauss-Legendre 规则

    Args:
        a: 左端点
        b: 右端点
        n: 节点数

    Returns:
        (节点, 权重)
    """
    nodes, weights = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def graded_unit_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(0, 1) 上的三次分级规则 s = u^3，节点向 0 聚集"""
    u, w = interval_rule(0.0, 1.0, n)
    return u ** 3, 3.0 * u ** 2 * w


def graded_interval_rule(a: float, b: float, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    两端都分级的区间规则，适合端点处有对数奇性的被积函数

    Returns:
        (节点, 权重, 到最近端点的有符号距离)
    """
    s, ws = graded_unit_rule(n)
    half = 0.5 * (b - a)
    left = a + half * s
    right = b - half * s
    nodes = np.concatenate([left, right[::-1]])
    weights = np.concatenate([half * ws, (half * ws)[::-1]])
    offsets = np.concatenate([half * s, -(half * s)[::-1]])
    return nodes, weights, offsets


class BandNodes(NamedTuple):
    """带 [alpha, beta] 上余弦代换 x = m + h cosθ 的节点"""
    theta: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    d_lo: np.ndarray
    d_hi: np.ndarray
    sin_theta: np.ndarray
    half_width: float


def band_rule(alpha: float, beta: float, n: int, graded: bool = True) -> BandNodes:
    """
    带上的余弦代换规则

    ∫_α^β f(x) / √((x-α)(β-x)) dx = ∫_0^π f(m + h cosθ) dθ，
    θ 区间在 π/2 处分开，两半各 n 个节点；graded=True 时采用 θ = (π/2)u³ 分级。
    d_lo = x-α 与 d_hi = β-x 用半角公式直接计算，靠近端点时不损失精度。

    Args:
        alpha: 左端点
        beta: 右端点
        n: 每半区间节点数
        graded: 是否分级

    Returns:
        BandNodes
    """
    h = 0.5 * (beta - alpha)
    if graded:
        s, ws = graded_unit_rule(n)
        s = 0.5 * np.pi * s
        ws = 0.5 * np.pi * ws
    else:
        s, ws = interval_rule(0.0, 0.5 * np.pi, n)
    # 前半 θ = s（靠近 β），后半 θ = π - s（靠近 α）
    sin_half, cos_half = np.sin(0.5 * s), np.cos(0.5 * s)
    theta = np.concatenate([s, np.pi - s[::-1]])
    weights = np.concatenate([ws, ws[::-1]])
    d_hi = np.concatenate([2.0 * h * sin_half ** 2, (2.0 * h * cos_half ** 2)[::-1]])
    d_lo = np.concatenate([2.0 * h * cos_half ** 2, (2.0 * h * sin_half ** 2)[::-1]])
    x = np.where(d_hi < d_lo, beta - d_hi, alpha + d_lo)
    sin_theta = np.concatenate([np.sin(s), np.sin(s)[::-1]])
    return BandNodes(theta, weights, x, d_lo, d_hi, sin_theta, h)


def half_line_rule(start: float, length: float, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    [start, ∞) 上的规则，代换 t = start + L s²/(1-s²)

    Returns:
        (t 节点, dt 权重, √(t-start) 的精确值)
    """
    s, w = interval_rule(0.0, 1.0, n)
    one_minus = 1.0 - s ** 2
    t = start + length * s ** 2 / one_minus
    dt = w * 2.0 * length * s / one_minus ** 2
    root = np.sqrt(length) * s / np.sqrt(one_minus)
    return t, dt, root


def adaptive_integrate(rule: Callable[[int], complex], start_order: int = 32,
                       tol: float = DEFAULT_TOLERANCE, max_nodes: int = MAX_NODES,
                       label: str = "integral") -> Tuple[complex, int]:
    """
    自适应倍增：阶数加倍直到相对变化小于 tol

    Args:
        rule: 以阶数为参数、返回积分近似值的函数
        start_order: 起始阶数
        tol: 相对容差
        max_nodes: 节点上限
        label: 日志中的名称

    Returns:
        (积分值, 最终阶数)
    """
    order = max(int(start_order), 4)
    previous = rule(order)
    while 2 * order <= max_nodes:
        order *= 2
        current = rule(order)
        change = abs(current - previous)
        if change <= tol * max(1.0, abs(current)):
            return current, order
        previous = current
    residual = float(change) if 'change' in locals() else float('nan')
    logger.error(f"{label}: no convergence within {max_nodes} nodes (last change {residual:.3e})")
    raise AccuracyError(f"{label} did not converge within {max_nodes} nodes", residual=residual)
