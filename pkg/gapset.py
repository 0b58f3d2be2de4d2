"""
有限间隙集模块
表示 𝔢 = ∪[α_j, β_j]，并计算其对数位势论：容量、Green 函数、平衡测度、调和测度与 Szegő 型泛函
"""

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq
import warnings
warnings.filterwarnings('ignore')

from quadrature import BandNodes, adaptive_integrate, band_rule, half_line_rule, interval_rule
from utils import (AccuracyError, DomainError, NumericalDegeneracyError,
                   validate_endpoints, logger)


@dataclass(frozen=True)
class GapSet:
    """有限间隙集：2(ℓ+1) 个严格递增的带端点"""
    endpoints: Tuple[float, ...]

    @property
    def ell(self) -> int:
        """间隙个数"""
        return len(self.endpoints) // 2 - 1

    @property
    def alphas(self) -> Tuple[float, ...]:
        return self.endpoints[0::2]

    @property
    def betas(self) -> Tuple[float, ...]:
        return self.endpoints[1::2]

    @property
    def bands(self) -> List[Tuple[float, float]]:
        return list(zip(self.alphas, self.betas))

    @property
    def gaps(self) -> List[Tuple[float, float]]:
        return list(zip(self.betas[:-1], self.alphas[1:]))

    @property
    def hull(self) -> Tuple[float, float]:
        return self.endpoints[0], self.endpoints[-1]

    @property
    def diameter(self) -> float:
        return self.endpoints[-1] - self.endpoints[0]

    def band_index(self, x: float) -> Optional[int]:
        """x 所在的（闭）带序号，不在 𝔢 上时返回 None"""
        for j, (alpha, beta) in enumerate(self.bands):
            if alpha <= x <= beta:
                return j
        return None

    def gap_index(self, x: float) -> Optional[int]:
        """x 所在的开间隙序号（0 为最低间隙），不在间隙内时返回 None"""
        for k, (lo, hi) in enumerate(self.gaps):
            if lo < x < hi:
                return k
        return None

    def contains(self, x: float) -> bool:
        return self.band_index(x) is not None

    def in_interior(self, x: float) -> bool:
        return any(alpha < x < beta for alpha, beta in self.bands)

    def dist_to_set(self, x: float) -> float:
        """dist(x, 𝔢)"""
        if self.contains(x):
            return 0.0
        return float(np.min(np.abs(np.asarray(self.endpoints) - x)))

    def dist_to_complement(self, x: float) -> float:
        """dist(x, ℝ∖𝔢)"""
        j = self.band_index(x)
        if j is None:
            return 0.0
        alpha, beta = self.bands[j]
        return float(min(x - alpha, beta - x))

    def scaled(self, factor: float) -> 'GapSet':
        """s·𝔢，factor > 0"""
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        return GapSet(tuple(float(factor * e) for e in self.endpoints))

    def shifted(self, offset: float) -> 'GapSet':
        """𝔢 + t"""
        return GapSet(tuple(float(e + offset) for e in self.endpoints))

    def merged(self, gap: int) -> 'GapSet':
        """去掉第 gap 个间隙（把两条相邻的带并为它们的凸包）"""
        ends = list(self.endpoints)
        del ends[2 * gap + 1:2 * gap + 3]
        return GapSet(tuple(ends))


def make_gapset(endpoints: Sequence[float]) -> GapSet:
    """
    由端点列表构造 GapSet

    Args:
        endpoints: α_1 < β_1 < α_2 < … < β_{ℓ+1}

    Returns:
        GapSet
    """
    values = validate_endpoints(endpoints)
    return GapSet(tuple(float(v) for v in values))


def _upper_sqrt(w: np.ndarray) -> np.ndarray:
    """主支平方根；负实数取上岸值 +i√|w|"""
    w = np.asarray(w, dtype=complex)
    w = np.where(w.imag == 0, w.real + 0j, w)
    return np.sqrt(w)


def _evaluate(func: Callable, x: np.ndarray) -> np.ndarray:
    """在节点上求值，兼容向量化与标量函数"""
    try:
        values = np.asarray(func(x), dtype=float)
        if values.shape == x.shape:
            return values
    except (TypeError, ValueError):
        pass
    return np.array([float(func(float(t))) for t in x])


class SzegoIntegral(NamedTuple):
    """Szegő 积分结果；diverged=True 时 value 为 None（−∞ 哨兵）"""
    value: Optional[float]
    diverged: bool
    order: int

    @property
    def is_finite(self) -> bool:
        return not self.diverged


class EigenvalueFunctionals(NamedTuple):
    """特征值泛函：Σdist^{1/2}、Σdist^{3/2} 与 ∏exp(−G(E_j))"""
    half_sum: float
    three_half_sum: float
    green_product: float


@dataclass(frozen=True, eq=False)
class EquilibriumData:
    """
    平衡测度数据

    gap_polynomial 是首一的 ℓ 次多项式 P，使 𝒢' = P/√R；
    green_* 方法给出 𝒢 = G + iG̃ 在上/下半平面及实轴上的值。
    """
    gapset: GapSet
    gap_polynomial: Polynomial
    capacity: float
    band_masses: Tuple[float, ...]
    quad_order: int = 64
    tolerance: float = 1e-13

    # ------------------------------------------------------------------
    # 基本量
    # ------------------------------------------------------------------

    @property
    def endpoint_array(self) -> np.ndarray:
        return np.asarray(self.gapset.endpoints, dtype=float)

    def sqrt_r_upper(self, z) -> np.ndarray:
        """上岸的 √R(z)，在 x > β_{ℓ+1} 时为正"""
        z = np.asarray(z, dtype=complex)
        factors = _upper_sqrt(z[..., None] - self.endpoint_array)
        return np.prod(factors, axis=-1)

    def density(self, x):
        """平衡密度 ρ_𝔢(x) = |P(x)| / (π √|R(x)|)，在 𝔢 之外为 0"""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        result = np.zeros_like(x_arr)
        for j, (alpha, beta) in enumerate(self.gapset.bands):
            inside = (x_arr > alpha) & (x_arr < beta)
            if np.any(inside):
                t = x_arr[inside]
                r = np.abs(np.prod(t[:, None] - self.endpoint_array[None, :], axis=1))
                result[inside] = np.abs(self.gap_polynomial(t)) / (np.pi * np.sqrt(r))
        return result if np.ndim(x) else float(result[0])

    @property
    def endpoint_values(self) -> np.ndarray:
        """𝒢₊ 在各端点的值：α_k 处 iπΣ_{j≥k}ω_j，β_k 处 iπΣ_{j>k}ω_j"""
        masses = np.asarray(self.band_masses)
        tail = np.concatenate([np.cumsum(masses[::-1])[::-1], [0.0]])
        values = []
        for j in range(self.gapset.ell + 1):
            values.extend([1j * np.pi * tail[j], 1j * np.pi * tail[j + 1]])
        return np.asarray(values, dtype=complex)

    @property
    def gap_critical_points(self) -> np.ndarray:
        """P 在各间隙中的零点 c_k（按 x 递增）"""
        if self.gapset.ell == 0:
            return np.zeros(0)
        roots = self.gap_polynomial.roots()
        roots = np.sort(np.real(roots[np.abs(np.imag(roots)) < 1e-9]))
        points = []
        for k, (lo, hi) in enumerate(self.gapset.gaps):
            inside = roots[(roots >= lo - 1e-12) & (roots <= hi + 1e-12)]
            if len(inside) != 1:
                raise NumericalDegeneracyError(f"gap polynomial has {len(inside)} zeros in gap {k}")
            points.append(float(np.clip(inside[0], lo, hi)))
        return np.asarray(points)

    @property
    def gap_critical_values(self) -> np.ndarray:
        """G 在各间隙临界点处的值（间隙中 G 的最大值）"""
        return np.array([self.green_real(c) for c in self.gap_critical_points])

    # ------------------------------------------------------------------
    # Green 函数
    # ------------------------------------------------------------------

    def green_upper(self, z: complex) -> complex:
        """
        上半平面（含实轴上岸）的 𝒢₊(z)

        从最近端点 e 出发沿直线积分，代换 t = e + (z-e)s² 吸收端点处的平方根奇性。
        """
        z = complex(z)
        if z.imag < 0:
            raise DomainError("green_upper needs Im z >= 0")
        ends = self.endpoint_array
        k = int(np.argmin(np.abs(z - ends)))
        e0 = ends[k]
        d = z - e0
        if d == 0:
            return complex(self.endpoint_values[k])
        if d.imag == 0:
            d = complex(d.real, 0.0)
        root = np.sqrt(d)
        others = np.delete(ends, k)
        poly = self.gap_polynomial

        def rule(n: int) -> complex:
            s, w = interval_rule(0.0, 1.0, n)
            t = e0 + d * s ** 2
            denom = np.prod(_upper_sqrt(t[:, None] - others[None, :]), axis=1)
            return complex(2.0 * root * np.sum(w * poly(t) / denom))

        value, _ = adaptive_integrate(rule, start_order=self.quad_order,
                                      tol=self.tolerance, label="green")
        return complex(self.endpoint_values[k]) + value

    def green_lower(self, z: complex) -> complex:
        """下半平面的 𝒢₋(z) = conj(𝒢₊(z̄))"""
        return complex(np.conj(self.green_upper(np.conj(complex(z)))))

    def green(self, z: complex) -> complex:
        """切割平面上的 𝒢(z)；实轴上取上岸值"""
        z = complex(z)
        return self.green_lower(z) if z.imag < 0 else self.green_upper(z)

    def green_real(self, x) -> float:
        """G_𝔢(x) = Re 𝒢(x)，在 𝔢 上为 0"""
        if np.iscomplexobj(x) and np.imag(x) != 0:
            return float(self.green(x).real)
        x = float(np.real(x))
        if self.gapset.contains(x):
            return 0.0
        return float(self.green_upper(x).real)

    def green_through_gap(self, z: complex, gap: int) -> complex:
        """
        𝒢₊ 穿过第 gap 个间隙解析延拓到下半平面的值

        gap = -1 表示左侧外部区间 (-∞, α_1)，gap = ℓ 表示右侧 (β_{ℓ+1}, ∞)。
        """
        z = complex(z)
        if z.imag > 0:
            return self.green_upper(z)
        masses = np.asarray(self.band_masses)
        jump = 2j * np.pi * float(np.sum(masses[gap + 1:]))
        return self.green_lower(z) + jump

    def green_derivative_upper(self, z: complex) -> complex:
        """𝒢₊'(z) = P(z) / √R₊(z)"""
        z = complex(z)
        return complex(self.gap_polynomial(z) / self.sqrt_r_upper(z))

    def green_derivative_lower(self, z: complex) -> complex:
        """𝒢₋'(z) = conj(𝒢₊'(z̄))"""
        return complex(np.conj(self.green_derivative_upper(np.conj(complex(z)))))

    # ------------------------------------------------------------------
    # 分布函数
    # ------------------------------------------------------------------

    def band_partial_mass(self, band: int, theta: float) -> float:
        """带 band 中 x = m + h cosθ 左侧的平衡质量"""
        alpha, beta = self.gapset.bands[band]
        if theta >= np.pi:
            return 0.0
        others = np.delete(self.endpoint_array, [2 * band, 2 * band + 1])
        m, h = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
        poly = self.gap_polynomial

        def rule(n: int) -> float:
            nodes, weights = interval_rule(theta, np.pi, n)
            t = m + h * np.cos(nodes)
            rest = np.abs(np.prod(t[:, None] - others[None, :], axis=1)) if len(others) else 1.0
            return float(np.sum(weights * np.abs(poly(t)) / np.sqrt(rest)) / np.pi)

        value, _ = adaptive_integrate(rule, start_order=16, tol=1e-14, label="cdf")
        return value

    def cdf(self, x: float) -> float:
        """平衡测度的分布函数 ρ_𝔢((-∞, x])"""
        x = float(x)
        masses = np.asarray(self.band_masses)
        for j, (alpha, beta) in enumerate(self.gapset.bands):
            if x < alpha:
                return float(np.sum(masses[:j]))
            if x <= beta:
                h = 0.5 * (beta - alpha)
                theta = float(np.arccos(np.clip((x - alpha - h) / h, -1.0, 1.0)))
                return float(np.sum(masses[:j]) + self.band_partial_mass(j, theta))
        return 1.0

    def quantile(self, u: float) -> float:
        """分布函数的反函数，u ∈ [0, 1]"""
        u = float(np.clip(u, 0.0, 1.0))
        masses = np.asarray(self.band_masses)
        cumulative = np.concatenate([[0.0], np.cumsum(masses)])
        j = int(np.clip(np.searchsorted(cumulative, u, side='right') - 1, 0, len(masses) - 1))
        alpha, beta = self.gapset.bands[j]
        target = u - cumulative[j]
        if target <= 0:
            return float(alpha)
        if target >= masses[j]:
            return float(beta)
        m, h = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
        theta = brentq(lambda th: self.band_partial_mass(j, th) - target, 0.0, np.pi,
                       xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return float(m + h * np.cos(theta))


class GapSetCalculator:
    """位势论计算器：平衡测度、Szegő 积分与特征值泛函"""

    def __init__(self):
        self.tolerance = 1e-10        # 自适应倍增的相对容差
        self.max_nodes = 2 ** 14      # 节点上限
        self.min_gap_ratio = 1e-8     # 最窄间隙 / 直径
        self.max_condition = 1e12     # P 线性系统条件数上限
        self.edge_floor = 1e-9        # 端点附近改用幂律模型的相对距离

    # ------------------------------------------------------------------
    # 平衡测度
    # ------------------------------------------------------------------

    def _gap_polynomial(self, gs: GapSet, order: int) -> Polynomial:
        """由 ℓ 个间隙条件 ∫_gap P/√|R| = 0 解出首一多项式 P"""
        ell = gs.ell
        if ell == 0:
            return Polynomial([1.0])
        ends = np.asarray(gs.endpoints)
        center, scale = 0.5 * (ends[0] + ends[-1]), 0.5 * gs.diameter

        def system(n: int) -> Tuple[np.ndarray, np.ndarray]:
            matrix = np.zeros((ell, ell))
            rhs = np.zeros(ell)
            for k, (lo, hi) in enumerate(gs.gaps):
                nodes = band_rule(lo, hi, n, graded=False)
                others = np.delete(ends, [2 * k + 1, 2 * k + 2])
                rest = np.abs(np.prod(nodes.x[:, None] - others[None, :], axis=1))
                kernel = nodes.weights / np.sqrt(rest)
                u = (nodes.x - center) / scale
                for i in range(ell):
                    matrix[k, i] = np.sum(kernel * u ** i)
                rhs[k] = -np.sum(kernel * u ** ell)
            return matrix, rhs

        n = order
        previous = None
        while n <= self.max_nodes:
            matrix, rhs = system(n)
            condition = np.linalg.cond(matrix)
            if not np.isfinite(condition) or condition > self.max_condition:
                raise NumericalDegeneracyError(f"gap polynomial system is singular (cond={condition:.3e})")
            coeffs = np.linalg.solve(matrix, rhs)
            if previous is not None and np.max(np.abs(coeffs - previous)) <= 1e-14 * max(1.0, np.max(np.abs(coeffs))):
                break
            previous = coeffs
            n *= 2
        else:
            raise AccuracyError("gap polynomial did not converge",
                                residual=float(np.max(np.abs(coeffs - previous))))
        scaled = Polynomial(np.append(coeffs, 1.0))
        return scaled(Polynomial([-center / scale, 1.0 / scale])) * scale ** ell

    def _band_masses(self, gs: GapSet, poly: Polynomial, order: int) -> np.ndarray:
        """ω_j = (1/π)∫_{band j} |P|/√|R| dx"""
        ends = np.asarray(gs.endpoints)
        masses = []
        for j, (alpha, beta) in enumerate(gs.bands):
            others = np.delete(ends, [2 * j, 2 * j + 1])

            def rule(n: int) -> float:
                nodes = band_rule(alpha, beta, n, graded=False)
                rest = np.abs(np.prod(nodes.x[:, None] - others[None, :], axis=1)) if len(others) else 1.0
                return float(np.sum(nodes.weights * np.abs(poly(nodes.x)) / np.sqrt(rest)) / np.pi)

            value, _ = adaptive_integrate(rule, start_order=order, tol=self.tolerance,
                                          max_nodes=self.max_nodes, label=f"band mass {j}")
            masses.append(value)
        return np.asarray(masses)

    def _log_capacity(self, gs: GapSet, poly: Polynomial, order: int) -> float:
        """log C = log(β_{ℓ+1} − α_1) − ∫_β^∞ [P/√R − 1/(t−α_1)] dt"""
        ends = np.asarray(gs.endpoints)
        beta, alpha = ends[-1], ends[0]
        others = ends[:-1]

        def rule(n: int) -> float:
            t, dt, root = half_line_rule(beta, gs.diameter, n)
            sqrt_r = root * np.prod(np.sqrt(t[:, None] - others[None, :]), axis=1)
            return float(np.sum(dt * (poly(t) / sqrt_r - 1.0 / (t - alpha))))

        integral, _ = adaptive_integrate(rule, start_order=order, tol=self.tolerance,
                                         max_nodes=self.max_nodes, label="capacity")
        return float(np.log(beta - alpha) - integral)

    def equilibrium(self, gs: GapSet, quad_order: int = 64) -> EquilibriumData:
        """
        计算平衡测度数据

        Args:
            gs: 有限间隙集
            quad_order: 起始求积阶数（≥ 16）

        Returns:
            EquilibriumData
        """
        if quad_order < 16:
            raise DomainError(f"quad_order must be >= 16, got {quad_order}")
        for k, (lo, hi) in enumerate(gs.gaps):
            if hi - lo < self.min_gap_ratio * gs.diameter:
                raise NumericalDegeneracyError(f"gap {k} is narrower than {self.min_gap_ratio:g} x diameter")

        poly = self._gap_polynomial(gs, quad_order)
        masses = self._band_masses(gs, poly, quad_order)
        total = float(np.sum(masses))
        if abs(total - 1.0) > 1e-8:
            logger.warning(f"equilibrium band masses sum to {total:.12f}")
        capacity = float(np.exp(self._log_capacity(gs, poly, quad_order)))
        logger.info(f"Equilibrium for {len(gs.endpoints)} endpoints: capacity={capacity:.12f}")
        return EquilibriumData(gs, poly, capacity, tuple(float(m) for m in masses), quad_order)

    # ------------------------------------------------------------------
    # Szegő 积分
    # ------------------------------------------------------------------

    def band_log_weight(self, w: Callable, alpha: float, beta: float,
                        nodes: BandNodes) -> Optional[np.ndarray]:
        """
        带节点上的 log w

        分级节点可以离端点近到 x 舍入成端点本身，此时 w 的数值不可信。
        到端点距离小于 floor 的节点改用 log w ≈ log w(e±floor) + κ log(d/floor)，
        κ 由 floor 与 4·floor 两处的取值估计。

        Args:
            w: 权函数
            alpha: 带左端点
            beta: 带右端点
            nodes: band_rule 给出的节点

        Returns:
            log w 数组；w 在某个节点（或端点探测点）为 0 时返回 None
        """
        floor = min(self.edge_floor * max(1.0, abs(alpha), abs(beta)), 1e-3 * nodes.half_width)
        near_lo = nodes.d_lo < floor
        near_hi = (nodes.d_hi < floor) & ~near_lo
        inner = ~(near_lo | near_hi)
        log_w = np.empty_like(nodes.x)

        values = _evaluate(w, nodes.x[inner])
        negative = np.where(values < 0)[0]
        if len(negative):
            index = int(np.flatnonzero(inner)[negative[0]])
            raise DomainError(f"weight is negative at node {index} of [{alpha}, {beta}]", index=index)
        if np.any(values == 0):
            return None
        log_w[inner] = np.log(values)

        for mask, edge, sign, dist in ((near_lo, alpha, 1.0, nodes.d_lo),
                                       (near_hi, beta, -1.0, nodes.d_hi)):
            if not np.any(mask):
                continue
            probes = _evaluate(w, np.array([edge + sign * floor, edge + 4.0 * sign * floor]))
            if np.any(probes < 0):
                raise DomainError(f"weight is negative next to the endpoint {edge}")
            if np.any(probes == 0):
                return None
            kappa = np.log(probes[1] / probes[0]) / np.log(4.0)
            log_w[mask] = np.log(probes[0]) + kappa * np.log(dist[mask] / floor)
        return log_w

    def _szego_sum(self, gs: GapSet, w: Callable, exponent: float, weight_kind: str,
                   order: int, eq: Optional[EquilibriumData]) -> float:
        total = 0.0
        ends = np.asarray(gs.endpoints)
        for j, (alpha, beta) in enumerate(gs.bands):
            nodes = band_rule(alpha, beta, order, graded=True)
            log_w = self.band_log_weight(w, alpha, beta, nodes)
            if log_w is None:
                return float('-inf')
            if weight_kind == 'distance':
                dist = np.minimum(nodes.d_lo, nodes.d_hi)
                kernel = dist ** exponent * nodes.half_width * nodes.sin_theta
            else:
                others = np.delete(ends, [2 * j, 2 * j + 1])
                rest = np.abs(np.prod(nodes.x[:, None] - others[None, :], axis=1)) if len(others) else np.ones_like(nodes.x)
                r_abs = (nodes.half_width * nodes.sin_theta) ** 2 * rest
                kernel = r_abs ** exponent * nodes.half_width * nodes.sin_theta
            total += float(np.sum(nodes.weights * kernel * log_w))
        return total

    @staticmethod
    def _is_diverging(values: List[float]) -> bool:
        """连续三次加细都下降、且累计下降超过 2 倍时判定为 −∞"""
        a = values[-4:]
        monotone = all(a[i + 1] < a[i] for i in range(3))
        return monotone and a[3] < 0 and abs(a[3]) > 2.0 * max(abs(a[0]), 1e-300)

    def szego_integral(self, gs: GapSet, eq: Optional[EquilibriumData], w: Callable,
                       weight_exponent: float = -0.5, weight_kind: str = 'distance',
                       start_order: int = 16) -> SzegoIntegral:
        """
        ∫_𝔢 dist(x, ℝ∖𝔢)^p log w(x) dx（weight_kind='endpoint' 时权为 |R(x)|^p）

        Args:
            gs: 有限间隙集
            eq: 平衡数据（保留给调用方统一签名）
            w: 权函数，带内部非负
            weight_exponent: -1/2 或 +1/2
            weight_kind: 'distance' 或 'endpoint'

        Returns:
            SzegoIntegral；发散时返回哨兵
        """
        if weight_exponent not in (-0.5, 0.5):
            raise DomainError(f"weight_exponent must be -1/2 or +1/2, got {weight_exponent}")
        if weight_kind not in ('distance', 'endpoint'):
            raise DomainError(f"unknown weight kind '{weight_kind}'")

        values: List[float] = []
        order = start_order
        while 2 * order <= self.max_nodes:
            value = self._szego_sum(gs, w, weight_exponent, weight_kind, order, eq)
            if value == float('-inf'):
                logger.info("Szego integral: weight vanishes at a node, reporting divergence")
                return SzegoIntegral(None, True, 2 * order)
            values.append(value)
            if len(values) >= 2 and abs(values[-1] - values[-2]) <= self.tolerance * max(1.0, abs(values[-1])):
                return SzegoIntegral(values[-1], False, 2 * order)
            if len(values) >= 4 and self._is_diverging(values):
                logger.info(f"Szego integral diverges to -inf (last partial {values[-1]:.3e})")
                return SzegoIntegral(None, True, 2 * order)
            order *= 2
        residual = abs(values[-1] - values[-2]) if len(values) > 1 else float('nan')
        raise AccuracyError("Szego integral did not converge", residual=residual)

    # ------------------------------------------------------------------
    # 特征值泛函
    # ------------------------------------------------------------------

    def eigenvalue_functionals(self, gs: GapSet, eq: EquilibriumData,
                               eigenvalues: Sequence[float]) -> EigenvalueFunctionals:
        """
        Σ dist(E_j,𝔢)^{1/2}、Σ dist(E_j,𝔢)^{3/2} 与 ∏ exp(−G(E_j))

        Args:
            gs: 有限间隙集
            eq: 平衡数据
            eigenvalues: 𝔢 之外的特征值

        Returns:
            EigenvalueFunctionals
        """
        half_sum, three_half_sum, log_product = 0.0, 0.0, 0.0
        for i, energy in enumerate(eigenvalues):
            energy = float(energy)
            if gs.contains(energy):
                raise DomainError(f"eigenvalue {i} ({energy}) lies in the essential spectrum", index=i)
            dist = gs.dist_to_set(energy)
            half_sum += dist ** 0.5
            three_half_sum += dist ** 1.5
            log_product -= eq.green_real(energy)
        return EigenvalueFunctionals(half_sum, three_half_sum, float(np.exp(log_product)))


# 全局计算器实例
gapset_calculator = GapSetCalculator()
equilibrium = gapset_calculator.equilibrium
szego_integral = gapset_calculator.szego_integral
eigenvalue_functionals = gapset_calculator.eigenvalue_functionals
band_log_weight = gapset_calculator.band_log_weight
