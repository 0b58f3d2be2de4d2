"""
等谱环面模块
构造具有给定带结构的周期 Jacobi 矩阵（有理调和测度的环面点）、判别式、周期 m 函数的闭式，以及沿等谱流形的延拓
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import eigh
import warnings
warnings.filterwarnings('ignore')

from gapset import EquilibriumData, GapSet, equilibrium, make_gapset
from utils import (BoundaryError, DomainError, GeometryError, PoleError,
                   UnsupportedSetError, logger)


def _split_params(p: int, params) -> Tuple[np.ndarray, np.ndarray]:
    """参数可以是 (a, b) 二元组，也可以是长度 2p 的向量"""
    if isinstance(params, tuple) and len(params) == 2 and np.ndim(params[0]) == 1:
        a, b = np.asarray(params[0], dtype=float), np.asarray(params[1], dtype=float)
    else:
        vector = np.asarray(params, dtype=float).ravel()
        a, b = vector[:p], vector[p:]
    if len(a) != p or len(b) != p:
        raise DomainError(f"expected {p} values of a and b")
    bad = np.where(a <= 0)[0]
    if len(bad):
        raise DomainError(f"a_{int(bad[0]) + 1} must be positive", index=int(bad[0]))
    return a, b


def boundary_matrix(a: np.ndarray, b: np.ndarray, sign: float) -> np.ndarray:
    """p×p 周期（sign=+1）或反周期（sign=-1）边值问题的矩阵"""
    p = len(a)
    matrix = np.diag(np.asarray(b, dtype=float)).astype(float)
    for n in range(p - 1):
        matrix[n, n + 1] = matrix[n + 1, n] = a[n]
    matrix[0, p - 1] += sign * a[p - 1]
    matrix[p - 1, 0] += sign * a[p - 1]
    return matrix


@dataclass(frozen=True)
class TorusPoint:
    """周期为 p 的 Jacobi 参数 (a_1..a_p, b_1..b_p)"""
    a: Tuple[float, ...]
    b: Tuple[float, ...]
    residual: float = field(default=0.0, compare=False)
    converged: bool = field(default=True, compare=False)

    @classmethod
    def free(cls) -> 'TorusPoint':
        """自由 Jacobi 矩阵 a ≡ 1, b ≡ 0"""
        return cls((1.0,), (0.0,))

    @classmethod
    def from_vector(cls, vector: Sequence[float], residual: float = 0.0,
                    converged: bool = True) -> 'TorusPoint':
        vector = np.asarray(vector, dtype=float)
        p = len(vector) // 2
        return cls(tuple(float(v) for v in vector[:p]), tuple(float(v) for v in vector[p:]),
                   float(residual), bool(converged))

    @property
    def period(self) -> int:
        return len(self.a)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.a, self.b]).astype(float)

    @property
    def is_free(self) -> bool:
        return all(abs(x - 1.0) < 1e-15 for x in self.a) and all(abs(x) < 1e-15 for x in self.b)

    def a_at(self, n: int) -> float:
        """a_n（n ≥ 1，周期延拓）"""
        return self.a[(n - 1) % self.period]

    def b_at(self, n: int) -> float:
        return self.b[(n - 1) % self.period]

    def product_a(self) -> float:
        return float(np.prod(self.a))

    def shift(self, k: int = 1) -> 'TorusPoint':
        """剥离 k 次：参数循环移位"""
        k = k % self.period
        return TorusPoint(self.a[k:] + self.a[:k], self.b[k:] + self.b[:k],
                          self.residual, self.converged)

    @property
    def discriminant(self) -> Polynomial:
        return discriminant(self.period, (np.asarray(self.a), np.asarray(self.b)))

    @property
    def dirichlet(self) -> np.ndarray:
        """去掉第一行第一列后 (p-1)×(p-1) 截断的特征值"""
        if self.period == 1:
            return np.zeros(0)
        inner = np.diag(self.b[1:]) + np.diag(self.a[1:-1], 1) + np.diag(self.a[1:-1], -1)
        return np.sort(np.linalg.eigvalsh(np.atleast_2d(inner)))

    def band_edges(self) -> np.ndarray:
        """周期与反周期问题全部 2p 个特征值（排序）"""
        a, b = np.asarray(self.a), np.asarray(self.b)
        values = np.concatenate([np.linalg.eigvalsh(boundary_matrix(a, b, 1.0)),
                                 np.linalg.eigvalsh(boundary_matrix(a, b, -1.0))])
        return np.sort(values)

    def bands(self, closed_tol: float = 1e-7) -> GapSet:
        """{|Δ| ≤ 2} 对应的带集合，闭合间隙被合并"""
        return _merge_edges(self.band_edges(), closed_tol)


def _merge_edges(edges: np.ndarray, closed_tol: float) -> GapSet:
    edges = list(np.sort(edges))
    merged = [edges[0]]
    i = 1
    while i < len(edges) - 1:
        if edges[i + 1] - edges[i] <= closed_tol:
            i += 2
            continue
        merged.extend([edges[i], edges[i + 1]])
        i += 2
    merged.append(edges[-1])
    return make_gapset(merged)


def _polynomial_matmul(left, right):
    return [[left[0][0] * right[0][0] + left[0][1] * right[1][0],
             left[0][0] * right[0][1] + left[0][1] * right[1][1]],
            [left[1][0] * right[0][0] + left[1][1] * right[1][0],
             left[1][0] * right[0][1] + left[1][1] * right[1][1]]]


def discriminant(p: int, params) -> Polynomial:
    """
    判别式 Δ(x) = 一个周期转移矩阵乘积的迹

    Args:
        p: 周期
        params: (a, b) 或长度 2p 的向量

    Returns:
        p 次多项式，首项系数 1/∏a_n
    """
    a, b = _split_params(p, params)
    x = Polynomial([0.0, 1.0])
    one, zero = Polynomial([1.0]), Polynomial([0.0])
    product = [[one, zero], [zero, one]]
    for n in range(p):
        step = [[(x - b[n]) / a[n], Polynomial([-a[n - 1] / a[n]])], [one, zero]]
        product = _polynomial_matmul(step, product)
    return product[0][0] + product[1][1]


def bands_of(poly: Polynomial, closed_tol: float = 1e-7) -> GapSet:
    """由判别式求带：Δ = ±2 的实根"""
    roots = np.concatenate([(poly - 2.0).roots(), (poly + 2.0).roots()])
    if np.max(np.abs(np.imag(roots))) > 1e-6:
        raise GeometryError("discriminant has non-real band edges")
    return _merge_edges(np.real(roots), closed_tol)


class TorusCalculator:
    """环面计算器：拟合周期点、周期 m 函数与延拓"""

    def __init__(self):
        self.max_iterations = 200     # Gauss-Newton 最大迭代次数
        self.residual_tol = 1e-12     # 端点匹配残差
        self.measure_tol = 1e-6       # 调和测度有理性检查
        self.restarts = 8             # 随机重启次数
        self.step = 0.05              # 延拓步长
        self.max_walk_points = 20000  # 延拓路径点上限

    # ------------------------------------------------------------------
    # 端点匹配系统
    # ------------------------------------------------------------------

    @staticmethod
    def _residual_and_jacobian(vector: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """排序后的周期/反周期特征值与目标端点之差，以及 Hellmann-Feynman 导数"""
        p = len(vector) // 2
        a, b = vector[:p], vector[p:]
        values, rows = [], []
        for sign in (1.0, -1.0):
            evals, evecs = eigh(boundary_matrix(a, b, sign))
            for k in range(p):
                u = evecs[:, k]
                grad = np.empty(2 * p)
                for i in range(2 * p):
                    unit = np.zeros(2 * p)
                    unit[i] = 1.0
                    grad[i] = u @ boundary_matrix(unit[:p], unit[p:], sign) @ u
                values.append(evals[k])
                rows.append(grad)
        order = np.argsort(values)
        return np.asarray(values)[order] - target, np.asarray(rows)[order]

    def _gauss_newton(self, vector: np.ndarray, target: np.ndarray,
                      max_iterations: Optional[int] = None) -> Tuple[np.ndarray, float, List[float]]:
        """最小范数 Gauss-Newton，带回溯与正性保护"""
        history = []
        residual, jacobian = self._residual_and_jacobian(vector, target)
        p = len(vector) // 2
        for _ in range(max_iterations or self.max_iterations):
            norm = float(np.max(np.abs(residual)))
            history.append(norm)
            if norm < self.residual_tol:
                break
            step = np.linalg.lstsq(jacobian, -residual, rcond=1e-10)[0]
            t = 1.0
            accepted = False
            while t > 1e-6:
                trial = vector + t * step
                if np.all(trial[:p] > 0):
                    trial_residual, trial_jacobian = self._residual_and_jacobian(trial, target)
                    if np.linalg.norm(trial_residual) < np.linalg.norm(residual):
                        accepted = True
                        break
                t *= 0.5
            if not accepted:
                break
            vector, residual, jacobian = trial, trial_residual, trial_jacobian
        return vector, float(np.max(np.abs(residual))), history

    def edge_targets(self, gs: GapSet, p: int, eq: Optional[EquilibriumData] = None) -> np.ndarray:
        """
        端点匹配目标：集合端点，加上闭合间隙处的二重点

        Args:
            gs: 有限间隙集
            p: 周期
            eq: 平衡数据

        Returns:
            长度 2p 的排序目标
        """
        eq = eq or equilibrium(gs, 64)
        scaled = np.asarray(eq.band_masses) * p
        counts = np.rint(scaled).astype(int)
        if np.any(np.abs(scaled - counts) > self.measure_tol) or np.any(counts < 1):
            raise UnsupportedSetError(f"band harmonic measures {eq.band_masses} are not multiples of 1/{p}")
        targets = []
        cumulative = 0.0
        for j, (alpha, beta) in enumerate(gs.bands):
            targets.append(alpha)
            for i in range(1, counts[j]):
                closed = eq.quantile(cumulative + i / p)
                targets.extend([closed, closed])
            targets.append(beta)
            cumulative += eq.band_masses[j]
        return np.sort(np.asarray(targets))

    def _default_init(self, gs: GapSet, p: int, target: np.ndarray,
                      eq: EquilibriumData) -> np.ndarray:
        """每条 Δ-带贡献一个对角块：b_n 取带中点，a_n 取 C(𝔢)"""
        mids = 0.5 * (target[0::2] + target[1::2])
        return np.concatenate([np.full(p, eq.capacity), mids])

    @staticmethod
    def _unjam(vector: np.ndarray, target: np.ndarray) -> np.ndarray:
        """初值处特征值重合时，对 a 做确定性扰动（a_1 增大）"""
        p = len(vector) // 2
        a, b = vector[:p], vector[p:]
        edges = np.sort(np.concatenate([np.linalg.eigvalsh(boundary_matrix(a, b, 1.0)),
                                        np.linalg.eigvalsh(boundary_matrix(a, b, -1.0))]))
        scale = max(np.ptp(target), 1.0)
        if p > 1 and np.min(np.diff(edges)) < 1e-6 * scale:
            jitter = 1.0 + 0.05 * np.array([1.0 if n % 2 == 0 else -1.0 for n in range(p)])
            return np.concatenate([a * jitter, b])
        return vector

    def fit_periodic(self, gs: GapSet, p: int, init=None, eq: Optional[EquilibriumData] = None,
                     seed: int = 0) -> TorusPoint:
        """
        拟合周期为 p、带集合为 gs 的环面点

        Args:
            gs: 有限间隙集
            p: 周期（≥ ℓ+1）
            init: 初值 (a, b)；None 时使用对角块启发式
            eq: 平衡数据
            seed: 随机重启的种子

        Returns:
            TorusPoint（converged=False 时为最优残差点）
        """
        if p < gs.ell + 1:
            raise DomainError(f"period {p} is too small for {gs.ell} gaps")
        eq = eq or equilibrium(gs, 64)
        target = self.edge_targets(gs, p, eq)
        if init is None:
            start = self._default_init(gs, p, target, eq)
        else:
            a0, b0 = _split_params(p, init)
            start = np.concatenate([a0, b0])
        start = self._unjam(start, target)

        vector, residual, history = self._gauss_newton(start, target)
        best = (residual, vector)
        rng = np.random.default_rng(seed)
        attempt = 0
        while best[0] >= 1e-10 and attempt < self.restarts:
            attempt += 1
            logger.warning(f"fit_periodic stagnated at residual {best[0]:.3e}; restart {attempt}")
            scale = 0.25 * max(np.ptp(target), 1.0)
            trial = start + rng.normal(scale=scale, size=len(start))
            trial[:p] = np.abs(trial[:p]) + 1e-3
            vector, residual, _ = self._gauss_newton(trial, target)
            if residual < best[0]:
                best = (residual, vector)
        residual, vector = best
        converged = residual < 1e-10
        if converged:
            logger.info(f"Fitted period-{p} torus point with residual {residual:.2e}")
        else:
            logger.error(f"fit_periodic failed: best residual {residual:.3e}")
        return TorusPoint.from_vector(vector, residual, converged)

    def project_to_torus(self, vector: Sequence[float], target: Sequence[float]) -> Tuple[np.ndarray, float]:
        """把参数向量投影回等谱流形（Gauss-Newton 校正）"""
        vector, residual, _ = self._gauss_newton(np.asarray(vector, dtype=float),
                                                 np.asarray(target, dtype=float))
        return vector, residual

    # ------------------------------------------------------------------
    # 周期 m 函数
    # ------------------------------------------------------------------

    @staticmethod
    def _period_map(T: TorusPoint, x: complex) -> np.ndarray:
        """一个周期剥离 Möbius 映射的矩阵 M_1 M_2 … M_p，M_n = [[0,1],[-a_n², b_n - x]]"""
        product = np.eye(2, dtype=complex)
        for a, b in zip(T.a, T.b):
            product = product @ np.array([[0.0, 1.0], [-a * a, b - x]], dtype=complex)
        return product

    def _fixed_points(self, T: TorusPoint, x: complex) -> Tuple[np.ndarray, np.ndarray, complex]:
        (A, B), (C, D) = self._period_map(T, x)
        det = complex(np.prod(np.square(T.a)))
        scale = max(abs(A), abs(B), abs(C), abs(D), 1.0)
        if abs(C) < 1e-14 * scale:
            if abs(A) < abs(D):
                return np.array([B / (D - A)]), np.array([abs(A / D)]), det
            raise PoleError(f"m has a pole at x = {x}")
        disc = (D - A) ** 2 + 4.0 * B * C
        if abs(disc) < 1e-14 * scale ** 2:
            raise BoundaryError(f"x = {x} is a band endpoint")
        root = np.sqrt(complex(disc))
        roots = np.array([(A - D + root) / (2.0 * C), (A - D - root) / (2.0 * C)])
        multipliers = np.abs(det) / np.abs(C * roots + D) ** 2
        return roots, multipliers, det

    def m_periodic(self, T: TorusPoint, x: complex) -> complex:
        """
        周期 m 函数：一周期剥离映射的吸引不动点

        Args:
            T: 环面点
            x: 𝔢 之外的点

        Returns:
            m(x)
        """
        x = complex(x)
        if x.imag == 0 and abs(T.discriminant(x.real)) < 2.0:
            raise DomainError(f"x = {x.real} lies inside a band")
        roots, multipliers, _ = self._fixed_points(T, x)
        return complex(roots[int(np.argmin(multipliers))])

    def m_periodic_boundary(self, T: TorusPoint, x: float) -> complex:
        """带内部的边界值 m(x + i0)（取 Im > 0 的不动点）"""
        x = float(x)
        if abs(T.discriminant(x)) >= 2.0:
            raise DomainError(f"x = {x} is not inside a band")
        roots, _, _ = self._fixed_points(T, complex(x))
        return complex(roots[int(np.argmax(np.imag(roots)))])

    def periodic_density(self, T: TorusPoint, x: float) -> float:
        """周期谱测度的密度 Im m(x+i0)/π"""
        return float(self.m_periodic_boundary(T, x).imag / np.pi)

    # ------------------------------------------------------------------
    # 延拓
    # ------------------------------------------------------------------

    def _null_space(self, vector: np.ndarray, target: np.ndarray) -> np.ndarray:
        _, jacobian = self._residual_and_jacobian(vector, target)
        _, singular, vt = np.linalg.svd(jacobian)
        rank = int(np.sum(singular > 1e-8 * singular[0]))
        return vt[rank:].T

    def _walk_direction(self, T0: TorusPoint, target: np.ndarray, direction: np.ndarray,
                        closing: bool) -> List[np.ndarray]:
        """沿一个切方向做预测-校正延拓，返回路径"""
        h = self.step * max(1.0, float(np.ptp(target)) / 4.0)
        origin = T0.params
        path = [origin]
        tangent = direction / np.linalg.norm(direction)
        length = 0.0
        budget = 2.0 * np.pi * max(1.0, float(np.ptp(target)) / 4.0)
        while len(path) < self.max_walk_points:
            current = path[-1]
            predicted = current + h * tangent
            corrected, residual = self.project_to_torus(predicted, target)
            if residual > 1e-10:
                h *= 0.5
                if h < 1e-8:
                    raise GeometryError("continuation step collapsed")
                continue
            null = self._null_space(corrected, target)
            if null.shape[1] == 0:
                raise GeometryError("lost the tangent space during continuation")
            new_tangent = null @ (null.T @ tangent)
            tangent = new_tangent / np.linalg.norm(new_tangent)
            length += float(np.linalg.norm(corrected - current))
            path.append(corrected)
            if closing and length > 4.0 * h and np.linalg.norm(corrected - origin) < 1.5 * h:
                path[-1] = origin
                return path
            if not closing and length >= budget:
                return path
        raise GeometryError("torus cycle did not close")

    def _resample(self, path: List[np.ndarray], steps: int, closing: bool,
                  target: np.ndarray) -> List[TorusPoint]:
        points = np.asarray(path)
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
        total = arc[-1]
        samples = np.arange(steps) * total / (steps if closing else max(steps - 1, 1))
        result = []
        for s in samples:
            i = int(np.clip(np.searchsorted(arc, s, side='right') - 1, 0, len(points) - 2))
            frac = (s - arc[i]) / max(arc[i + 1] - arc[i], 1e-300)
            guess = points[i] + frac * (points[i + 1] - points[i])
            vector, residual = self.project_to_torus(guess, target)
            result.append(TorusPoint.from_vector(vector, residual, residual < 1e-10))
        return result

    def torus_walk(self, T0: TorusPoint, steps: int) -> List[TorusPoint]:
        """
        沿等谱环面延拓采样

        Args:
            T0: 起点（所有间隙张开）
            steps: 每个环面循环的采样点数

        Returns:
            环面点列表；ℓ = 0 时只返回 T0
        """
        p = T0.period
        if p == 1:
            return [T0]
        target = T0.band_edges()
        if np.min(np.diff(target)) < 1e-7:
            raise GeometryError("closed gap encountered: torus walk needs all gaps open")
        ell = p - 1
        null = self._null_space(T0.params, target)
        if null.shape[1] > ell:
            raise GeometryError(f"endpoint Jacobian has null dimension {null.shape[1]} > {ell}")
        if null.shape[1] < ell:
            raise GeometryError(f"endpoint Jacobian has null dimension {null.shape[1]} < {ell}")
        walk: List[TorusPoint] = []
        for k in range(ell):
            closing = ell == 1
            path = self._walk_direction(T0, target, null[:, k], closing)
            walk.extend(self._resample(path, steps, closing, target))
        logger.info(f"Torus walk produced {len(walk)} points")
        return walk


# 全局计算器实例
torus_calculator = TorusCalculator()
fit_periodic = torus_calculator.fit_periodic
m_periodic = torus_calculator.m_periodic
torus_walk = torus_calculator.torus_walk
project_to_torus = torus_calculator.project_to_torus
