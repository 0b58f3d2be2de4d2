"""
Jacobi 矩阵模块
Jacobi 算子、正交多项式、截断特征问题、谱测度、m 函数与系数剥离，以及条件报告中的各类泛函
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar
import warnings
warnings.filterwarnings('ignore')

from gapset import GapSet
from quadrature import adaptive_integrate, band_rule
from torus import TorusPoint, torus_calculator
from utils import (BoundaryError, ConvergenceError, DiagnosticError, DomainError, PoleError,
                   ValidationError, logger)


@dataclass(frozen=True)
class JacobiOperator:
    """
    半直线 Jacobi 算子：周期尾部（自由或环面点）加有限个头部覆盖 (n, a_n, b_n)
    """
    tail: TorusPoint = field(default_factory=TorusPoint.free)
    head: Tuple[Tuple[int, float, float], ...] = ()

    def __post_init__(self):
        for n, a, _ in self.head:
            if n < 1:
                raise ValidationError(f"override index {n} must be >= 1", index=n)
            if not a > 0:
                raise ValidationError(f"a_{n} = {a} must be positive", index=n)

    @classmethod
    def free(cls) -> 'JacobiOperator':
        return cls()

    @classmethod
    def periodic(cls, T: TorusPoint) -> 'JacobiOperator':
        return cls(tail=T)

    def with_head(self, a_head: Sequence[float], b_head: Optional[Sequence[float]] = None) -> 'JacobiOperator':
        """
        覆盖前若干个系数

        Args:
            a_head: a_1, a_2, ... 的新值
            b_head: b_1, b_2, ...；缺省时沿用尾部

        Returns:
            新的 JacobiOperator
        """
        b_head = list(b_head) if b_head is not None else []
        length = max(len(a_head), len(b_head))
        head = []
        for n in range(1, length + 1):
            a = float(a_head[n - 1]) if n <= len(a_head) else self.a(n)
            b = float(b_head[n - 1]) if n <= len(b_head) else self.b(n)
            head.append((n, a, b))
        merged = {n: (a, b) for n, a, b in self.head}
        merged.update({n: (a, b) for n, a, b in head})
        return JacobiOperator(self.tail, tuple((n, a, b) for n, (a, b) in sorted(merged.items())))

    @cached_property
    def _overrides(self) -> Dict[int, Tuple[float, float]]:
        return {n: (a, b) for n, a, b in self.head}

    def a(self, n: int) -> float:
        if n < 1:
            raise DomainError(f"index {n} must be >= 1", index=n)
        if n in self._overrides:
            return self._overrides[n][0]
        return self.tail.a_at(n)

    def b(self, n: int) -> float:
        if n < 1:
            raise DomainError(f"index {n} must be >= 1", index=n)
        if n in self._overrides:
            return self._overrides[n][1]
        return self.tail.b_at(n)

    @property
    def head_length(self) -> int:
        return max((n for n, _, _ in self.head), default=0)

    def strip(self, n: int = 1) -> 'JacobiOperator':
        """J^{(n)}：去掉前 n 行与前 n 列"""
        if n < 0:
            raise DomainError("strip count must be >= 0", index=n)
        head = tuple((k - n, a, b) for k, a, b in self.head if k > n)
        return JacobiOperator(self.tail.shift(n), head)

    def coefficients(self, N: int) -> Tuple[np.ndarray, np.ndarray]:
        """(a_1..a_N, b_1..b_N)"""
        return (np.array([self.a(n) for n in range(1, N + 1)]),
                np.array([self.b(n) for n in range(1, N + 1)]))

    def truncation(self, N: int) -> np.ndarray:
        """N×N 主子矩阵"""
        a, b = self.coefficients(N)
        return np.diag(b) + np.diag(a[:-1], 1) + np.diag(a[:-1], -1)

    def essential_spectrum(self) -> GapSet:
        return self.tail.bands()


@dataclass(frozen=True)
class SpectralMeasure:
    """谱测度：带内部的绝对连续密度加 𝔢 外的有限个点质量"""
    gapset: Optional[GapSet]
    density: Optional[Callable] = None
    points: Tuple[Tuple[float, float], ...] = ()

    def band_mass(self, j: int, tol: float = 1e-10) -> float:
        """第 j 条带上的绝对连续质量"""
        if self.density is None or self.gapset is None:
            return 0.0
        alpha, beta = self.gapset.bands[j]

        def rule(n: int) -> float:
            nodes = band_rule(alpha, beta, n)
            values = np.asarray(self.density(nodes.x), dtype=float)
            return float(np.sum(nodes.weights * values * np.sqrt(nodes.d_lo * nodes.d_hi)))

        return float(adaptive_integrate(rule, 16, tol, label=f"band mass {j}")[0])

    def total_mass(self) -> float:
        continuous = sum(self.band_mass(j) for j in range(len(self.gapset.bands))) if self.gapset else 0.0
        return continuous + sum(w for _, w in self.points)


@dataclass(frozen=True)
class MFunction:
    """m 函数：kind ∈ {measure, periodic, finite_rank}"""
    kind: str
    evaluator: Callable[[complex], complex]
    spectrum: Optional[GapSet] = None

    def __call__(self, x: complex) -> complex:
        return m_value(self, x)


# ---------------------------------------------------------------------------
# 正交多项式与截断
# ---------------------------------------------------------------------------

def orthonormal_eval(J: JacobiOperator, n: int, x: complex) -> complex:
    """
    三项递推求 p_n(x)，p_{-1} = 0，p_0 = 1

    Args:
        J: Jacobi 算子
        n: 次数
        x: 求值点

    Returns:
        p_n(x)
    """
    if n < 0:
        raise DomainError(f"degree {n} must be >= 0", index=n)
    previous, current = 0.0, 1.0
    for k in range(n):
        a_prev = J.a(k) if k >= 1 else 0.0
        previous, current = current, ((x - J.b(k + 1)) * current - a_prev * previous) / J.a(k + 1)
    return current


def truncated_spectrum(J: JacobiOperator, N: int) -> pd.DataFrame:
    """
    N×N 截断的特征值与 Gauss 权重（第一分量平方）

    Args:
        J: Jacobi 算子
        N: 截断尺寸

    Returns:
        DataFrame，列为 eigenvalue、weight
    """
    if N < 1:
        raise DomainError(f"truncation size {N} must be >= 1", index=N)
    a, b = J.coefficients(N)
    if N == 1:
        return pd.DataFrame({'eigenvalue': [b[0]], 'weight': [1.0]})
    try:
        values, vectors = eigh_tridiagonal(b, a[:-1], lapack_driver='stebz')
    except LinAlgError as e:
        logger.error(f"Tridiagonal eigensolver failed at N={N}: {e}")
        raise ConvergenceError(f"tridiagonal eigensolver failed at N={N}", iterations=N)
    return pd.DataFrame({'eigenvalue': values, 'weight': vectors[0, :] ** 2})


# ---------------------------------------------------------------------------
# m 函数
# ---------------------------------------------------------------------------

def _reverse_strip_value(a: float, b: float, x: complex, m_next: complex) -> complex:
    denominator = b - x - a * a * m_next
    if denominator == 0:
        raise PoleError(f"m has a pole at x = {x}")
    return 1.0 / denominator


def _finite_rank_value(J: JacobiOperator, x: complex) -> complex:
    N = J.head_length
    m = torus_calculator.m_periodic(J.tail.shift(N), x)
    for n in range(N, 0, -1):
        m = _reverse_strip_value(J.a(n), J.b(n), x, m)
    return m


def m_boundary_value(J: JacobiOperator, x: float) -> complex:
    """带内部的边界值 m(x + i0)"""
    N = J.head_length
    m = torus_calculator.m_periodic_boundary(J.tail.shift(N), x)
    for n in range(N, 0, -1):
        m = _reverse_strip_value(J.a(n), J.b(n), x, m)
    return m


def operator_m_function(J: JacobiOperator) -> MFunction:
    """J 的 m 函数：无头部时为周期不动点，否则为反向剥离的有限秩表示"""
    kind = 'periodic' if not J.head else 'finite_rank'
    return MFunction(kind, lambda x: _finite_rank_value(J, x), J.essential_spectrum())


def measure_m_function(mu: SpectralMeasure, tol: float = 1e-10) -> MFunction:
    """由测度直接积分得到 m(x) = ∫ dμ(t)/(t - x)"""

    def evaluate(x: complex) -> complex:
        value = sum(w / (E - x) for E, w in mu.points)
        if mu.density is None or mu.gapset is None:
            return complex(value)
        for j, (alpha, beta) in enumerate(mu.gapset.bands):
            def rule(n: int, alpha=alpha, beta=beta) -> complex:
                nodes = band_rule(alpha, beta, n)
                density = np.asarray(mu.density(nodes.x), dtype=float)
                return complex(np.sum(nodes.weights * density * np.sqrt(nodes.d_lo * nodes.d_hi)
                                      / (nodes.x - x)))
            value += adaptive_integrate(rule, 32, tol, label=f"m quadrature on band {j}")[0]
        return complex(value)

    return MFunction('measure', evaluate, mu.gapset)


def m_value(M: MFunction, x: complex) -> complex:
    """
    求 m(x)

    Args:
        M: m 函数
        x: Im x ≠ 0 或实轴上谱外的点

    Returns:
        m(x)
    """
    x = complex(x)
    if x.imag == 0 and M.spectrum is not None and M.spectrum.contains(x.real):
        raise DomainError(f"x = {x.real} lies in the essential spectrum")
    return complex(M.evaluator(x))


def strip(M: MFunction, a1: float, b1: float, direction: str = 'forward') -> MFunction:
    """
    系数剥离：m^{-1} = b_1 - x - a_1² m_1

    Args:
        M: m 函数
        a1: a_1 > 0
        b1: b_1
        direction: forward 由 m 求 m_1；reverse 由 m_1 求 m

    Returns:
        新的 MFunction
    """
    if not a1 > 0:
        raise ValidationError(f"a1 = {a1} must be positive", index=1)
    if direction == 'forward':
        def evaluate(x: complex) -> complex:
            m = M.evaluator(x)
            if m == 0:
                raise PoleError(f"m vanishes at x = {x}")
            return (b1 - x - 1.0 / m) / (a1 * a1)
    elif direction == 'reverse':
        def evaluate(x: complex) -> complex:
            return _reverse_strip_value(a1, b1, x, M.evaluator(x))
    else:
        raise ValidationError(f"unknown strip direction: {direction}")
    return MFunction(M.kind, evaluate, M.spectrum)


def herglotz_check(M: MFunction, count: int = 100, seed: int = 0) -> Dict[str, float]:
    """在上半平面随机点检查 Im m > 0"""
    rng = np.random.default_rng(seed)
    hull = M.spectrum.hull if M.spectrum is not None else (-2.0, 2.0)
    width = hull[1] - hull[0]
    points = (rng.uniform(hull[0] - width, hull[1] + width, count)
              + 1j * 10.0 ** rng.uniform(-3, 1, count))
    imag = np.array([M.evaluator(z).imag for z in points])
    return {'min_imag': float(np.min(imag)), 'passed': bool(np.all(imag > 0))}


# ---------------------------------------------------------------------------
# 实极点、特征值与谱测度
# ---------------------------------------------------------------------------

def _inverse_m(J: JacobiOperator, x: float) -> float:
    """1/m(x) = b_1 - x - a_1² m_1(x)，m_1 有极点时返回 inf"""
    try:
        m_next = _finite_rank_value(J.strip(1), complex(x))
    except PoleError:
        return np.inf
    return float(np.real(J.b(1) - x - J.a(1) ** 2 * m_next))


def _search_intervals(J: JacobiOperator, gs: GapSet) -> List[Tuple[float, float]]:
    a_max = max([J.a(n) for n in range(1, J.head_length + 1)] + list(J.tail.a))
    b_max = max([abs(J.b(n)) for n in range(1, J.head_length + 1)] + [abs(v) for v in J.tail.b])
    radius = 2.0 * (b_max + 2.0 * a_max) + 1.0
    low, high = gs.hull
    return [(min(-radius, low - 1.0), low)] + list(gs.gaps) + [(high, max(radius, high + 1.0))]


def _real_roots(func: Callable[[float], float], intervals, samples: int = 400,
                tol: float = 1e-8) -> List[float]:
    roots = []
    for lo, hi in intervals:
        grid = np.linspace(lo, hi, samples + 2)[1:-1]
        values = np.array([func(x) for x in grid])
        for i in range(len(grid)):
            if values[i] == 0:
                roots.append(float(grid[i]))
        for i in range(len(grid) - 1):
            f0, f1 = values[i], values[i + 1]
            if not (np.isfinite(f0) and np.isfinite(f1)) or f0 == 0 or f1 == 0 or f0 * f1 > 0:
                continue
            root = brentq(func, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
            if abs(func(root)) < tol * max(1.0, abs(root)):
                roots.append(float(root))
    return sorted(roots)


def m_poles(J: JacobiOperator) -> List[float]:
    """m 在 𝔢 外的实极点（1/m 的零点），即 J 在 𝔢 外的特征值"""
    gs = J.essential_spectrum()
    return _real_roots(lambda x: _inverse_m(J, x), _search_intervals(J, gs))


def m_zeros(J: JacobiOperator) -> List[float]:
    """m 在 𝔢 外的实零点"""
    gs = J.essential_spectrum()

    def m_real(x: float) -> float:
        try:
            return float(np.real(_finite_rank_value(J, complex(x))))
        except PoleError:
            return np.inf

    return _real_roots(m_real, _search_intervals(J, gs))


def _truncation_sizes(J: JacobiOperator, size: Optional[int] = None) -> Tuple[int, int]:
    p = J.tail.period
    N = max(size or 60, 8 * (J.head_length + p))
    while p > 1 and (N + 1) % p == 0:
        N += 1
    return N, 2 * N + 1


def eigenvalues_outside(J: JacobiOperator, gs: Optional[GapSet] = None,
                        match_tol: float = 1e-8, agree_tol: float = 1e-6,
                        size: Optional[int] = None) -> List[float]:
    """
    𝔢 外的孤立特征值：两种截断尺寸匹配，并与 m 的实极点对照

    Args:
        J: Jacobi 算子
        gs: 本质谱；缺省取尾部的带
        match_tol: 两个截断尺寸之间的匹配容差
        agree_tol: 截断结果与极点结果之间的容差
        size: 较小截断尺寸 N（另一个为 2N+1），不小于 8(头部长度 + 周期)

    Returns:
        特征值列表（升序）
    """
    gs = gs or J.essential_spectrum()
    sizes = _truncation_sizes(J, size)
    outside = []
    for N in sizes:
        values = truncated_spectrum(J, N)['eigenvalue'].to_numpy()
        outside.append([float(v) for v in values if gs.dist_to_set(v) > match_tol])
    matched = []
    for v in outside[0]:
        # 截断两端的局域态可能成对出现，簇合并为一个
        if any(abs(v - w) < match_tol for w in outside[1]) and not any(abs(v - u) < match_tol for u in matched):
            matched.append(v)
    exact = m_poles(J)
    if len(matched) != len(exact) or any(abs(u - v) > agree_tol for u, v in zip(matched, exact)):
        logger.error(f"Eigenvalue detection disagrees: truncation {matched} vs poles {exact}")
        raise DiagnosticError("truncation and pole search disagree", first=matched, second=exact)
    logger.info(f"Found {len(exact)} eigenvalues outside the essential spectrum")
    return exact


def _richardson_density(J: JacobiOperator, x: float) -> float:
    """Im m(x + iε)/π 在 ε → 0 的外推"""
    eps = np.array([1e-2, 1e-3, 1e-4])
    values = np.array([_finite_rank_value(J, complex(x, e)).imag / np.pi for e in eps])
    return float(np.polyval(np.polyfit(eps, values, 2), 0.0))


def _boundary_density(J: JacobiOperator, x: float) -> float:
    try:
        return float(m_boundary_value(J, x).imag / np.pi)
    except BoundaryError:
        return 0.0
    except (PoleError, DomainError):
        return _richardson_density(J, x)


def _point_weight(J: JacobiOperator, E: float, h: float = 1e-5) -> float:
    """w = -1 / (d(1/m)/dx)，四点中心差分"""
    f = lambda x: _inverse_m(J, x)
    slope = (f(E - 2 * h) - 8 * f(E - h) + 8 * f(E + h) - f(E + 2 * h)) / (12.0 * h)
    return float(-1.0 / slope)


def spectral_measure(J: JacobiOperator) -> SpectralMeasure:
    """
    由闭式 m 函数构造谱测度

    Args:
        J: 有限秩头部加周期尾部的算子

    Returns:
        SpectralMeasure（密度 = Im m(x+i0)/π，点质量来自实极点）
    """
    gs = J.essential_spectrum()
    density = np.vectorize(lambda x: _boundary_density(J, float(x)), otypes=[float])
    points = tuple((E, _point_weight(J, E)) for E in m_poles(J))
    return SpectralMeasure(gs, density, points)


# ---------------------------------------------------------------------------
# 条件报告
# ---------------------------------------------------------------------------

def distance_to_point(J: JacobiOperator, T: TorusPoint, m: int, depth: int = 40) -> float:
    """d_m(J, T) = Σ_j e^{-j} (|a_{m+j} - a'_{m+j}| + |b_{m+j} - b'_{m+j}|)，j 截断到 depth"""
    total = 0.0
    for j in range(depth + 1):
        n = m + j
        total += np.exp(-j) * (abs(J.a(n) - T.a_at(n)) + abs(J.b(n) - T.b_at(n)))
    return float(total)


def _refine_distance(J: JacobiOperator, sample: List[TorusPoint], m: int, best: int) -> float:
    """在最近采样点与相邻点之间的线段上做一维极小化（投影回环面）"""
    target = sample[0].band_edges()
    value = distance_to_point(J, sample[best], m)
    for other in (best - 1, (best + 1) % len(sample)):
        if other < 0 or other == best:
            continue
        start, end = sample[best].params, sample[other].params

        def objective(t: float) -> float:
            vector, _ = torus_calculator.project_to_torus(start + t * (end - start), target)
            if np.any(vector[:len(vector) // 2] <= 0):
                return np.inf
            return distance_to_point(J, TorusPoint.from_vector(vector), m)

        result = minimize_scalar(objective, bounds=(0.0, 1.0), method='bounded',
                                 options={'xatol': 1e-6})
        value = min(value, float(result.fun))
    return value


def torus_distance(J: JacobiOperator, sample: Sequence[TorusPoint], m: int,
                   refine: bool = True) -> float:
    """d_m(J, 𝒯)：采样上的最小值加局部细化"""
    sample = list(sample)
    if not sample:
        raise ValidationError("torus sample is empty", index=0)
    distances = [distance_to_point(J, T, m) for T in sample]
    best = int(np.argmin(distances))
    if refine and len(sample) > 1 and sample[0].period > 1:
        return min(distances[best], _refine_distance(J, sample, m, best))
    return distances[best]


def condition_report(J: JacobiOperator, reference: Optional[TorusPoint] = None, horizon: int = 50,
                     epsilon: float = 0.1, torus_sample: Optional[Sequence[TorusPoint]] = None,
                     refine: bool = True) -> Dict:
    """
    条件报告：各类部分和

    Args:
        J: Jacobi 算子
        reference: 参考环面点；缺省取 J 的尾部
        horizon: 部分和的上限
        epsilon: 对数加权指数中的 ε
        torus_sample: d_m 极小化所用的环面采样；缺省为 [reference]
        refine: 是否在采样之间细化

    Returns:
        报告字典（含逐项 DataFrame）
    """
    if horizon < 1:
        raise ValidationError(f"horizon {horizon} must be >= 1", index=horizon)
    reference = reference or J.tail
    sample = list(torus_sample) if torus_sample is not None else [reference]
    if not sample:
        raise ValidationError("torus sample is empty", index=0)

    rows = []
    for n in range(1, horizon + 1):
        a, b = J.a(n), J.b(n)
        deviation = abs(a - reference.a_at(n)) + abs(b - reference.b_at(n))
        rows.append({
            'n': n,
            'free_term': b * b + (a - 1.0) ** 2,
            'deviation': deviation,
            'log_weighted': np.log(n + 1.0) ** (1.0 + epsilon) * deviation,
            'd_m': torus_distance(J, sample, n, refine),
        })
    profile = pd.DataFrame(rows)
    report = {
        'horizon': horizon,
        'epsilon': epsilon,
        'free_sum': float(profile['free_term'].sum()),
        'deviation_sum': float(profile['deviation'].sum()),
        'log_weighted_sum': float(profile['log_weighted'].sum()),
        'dm_square_sum': float((profile['d_m'] ** 2).sum()),
        'd_1': float(profile['d_m'].iloc[0]),
        'profile': profile,
    }
    logger.info(f"Condition report: deviation sum {report['deviation_sum']:.6e}, "
                f"d_m² sum {report['dm_square_sum']:.6e}")
    return report
