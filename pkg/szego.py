"""
Szegő 理论模块
Szegő 类判定、u(0;J)、Jost 函数与 Jost 解、MH 表示、Szegő 渐近，以及 Jacobi 矩阵的特征标与环面匹配
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
import warnings
warnings.filterwarnings('ignore')

from covering import (BlaschkeEvaluator, Character, CoveringMap, OrthocircleGroup,
                      blaschke_character, fit_circles)
from gapset import (EquilibriumData, GapSet, band_log_weight, equilibrium, eigenvalue_functionals,
                    szego_integral)
from jacobi import (JacobiOperator, SpectralMeasure, m_boundary_value, m_poles, m_value, m_zeros,
                    operator_m_function, spectral_measure)
from quadrature import adaptive_integrate, band_rule
from torus import TorusPoint, torus_calculator
from utils import (DomainError, PoleError, ResolutionError, ValidationError, logger,
                   phase_distance)


def _clip_to_bands(gs: GapSet, x: np.ndarray) -> np.ndarray:
    """把落在带端点上的节点推回带内部"""
    x = np.array(x, dtype=float, copy=True)
    for alpha, beta in gs.bands:
        margin = 1e-13 * (beta - alpha)
        inside = (x >= alpha) & (x <= beta)
        x[inside] = np.clip(x[inside], alpha + margin, beta - margin)
    return x


def character_distance(first: Character, second: Character) -> float:
    """各生成元上相位距离的最大值"""
    return float(max((phase_distance(u, v) for u, v in zip(first.values, second.values)), default=0.0))


@dataclass(frozen=True, eq=False)
class JostData:
    """
    Jost 函数所需的数据

    preimages 为各特征值 E_j 在 𝔽̄ 中的原像 p_j；u0 为 u(0;J)。
    """
    operator: JacobiOperator
    gapset: GapSet
    eq: EquilibriumData
    cover: CoveringMap
    measure: SpectralMeasure
    eigenvalues: Tuple[float, ...]
    preimages: Tuple[complex, ...]
    u0: float
    _factors: List = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._factors.extend(BlaschkeEvaluator(self.cover.group, p, self.cover.blaschke.L)
                             for p in self.preimages)

    @property
    def group(self) -> OrthocircleGroup:
        return self.cover.group

    def log_ratio(self, x) -> np.ndarray:
        """log(ρ_𝔢(x) / w(x))"""
        x = _clip_to_bands(self.gapset, x)
        return np.log(self.eq.density(x) / np.asarray(self.measure.density(x), dtype=float))

    def blaschke_part(self, z: complex) -> complex:
        result = 1.0 + 0j
        for factor in self._factors:
            result *= factor(z)
        return complex(result)

    def __call__(self, z: complex) -> complex:
        return jost_function(self, z)


@dataclass(frozen=True, eq=False)
class DiskMFunction:
    """M(z) = -m(x(z))，及其在 𝔽̄ 中的零点（不含 0）与极点"""
    operator: JacobiOperator
    cover: CoveringMap
    zeros: Tuple[complex, ...]
    poles: Tuple[complex, ...]

    def __call__(self, z: complex) -> complex:
        x = self.cover.forward(complex(z))
        return complex(-m_value(operator_m_function(self.operator), x))

    def boundary_log_modulus(self, x) -> np.ndarray:
        """log(a_1 |M|) 在 ∂𝔻 上的值，|M(ζ)| = |m(x(ζ) + i0)|"""
        x = _clip_to_bands(self.cover.gapset, x)
        a1 = self.operator.a(1)
        return np.array([np.log(a1 * abs(m_boundary_value(self.operator, float(t)))) for t in x])


class SzegoCalculator:
    """Szegő 计算器：Jost 函数、渐近比值与特征标"""

    def __init__(self):
        self.tolerance = 1e-10            # 边界积分的相对容差
        self.horizon = 50                 # 乘积比值序列的默认长度
        self.identity_tolerance = 1e-6    # 特征标恒等式的相位容差
        self.match_tolerance = 1e-4       # 环面匹配的相位容差
        self.resolution = 1e-6            # 行走样本特征标的最小间距
        self.probes = (0.11 + 0.05j, -0.08 + 0.13j, 0.04 - 0.12j)
        self.quad_order = 64              # 缺省平衡数据的求积阶数
        self._groups: Dict = {}
        self._jost: Dict = {}

    # ------------------------------------------------------------------
    # Szegő 类
    # ------------------------------------------------------------------

    def szego_class_report(self, J: JacobiOperator, gs: Optional[GapSet] = None,
                           eq: Optional[EquilibriumData] = None, horizon: Optional[int] = None,
                           measure: Optional[SpectralMeasure] = None) -> Dict:
        """
        Szegő 类判定：本质谱、特征值和、Szegő 积分与乘积比值

        Args:
            J: 有限秩头部加周期尾部的算子
            gs: 目标集合，缺省为 J 的本质谱
            eq: 平衡数据
            horizon: 乘积比值序列长度
            measure: 替代 J 的谱测度（用于检查给定权函数）

        Returns:
            报告字典
        """
        gs = gs or J.essential_spectrum()
        eq = eq or equilibrium(gs, self.quad_order)
        horizon = horizon or self.horizon
        essential = J.essential_spectrum()
        ess_spec_ok = (len(essential.endpoints) == len(gs.endpoints)
                       and bool(np.allclose(essential.endpoints, gs.endpoints, atol=1e-8)))
        mu = measure or spectral_measure(J)
        eigenvalues = [E for E, _ in mu.points]
        functionals = eigenvalue_functionals(gs, eq, eigenvalues)
        if mu.density is None:
            integral_value, diverged = None, True
        else:
            integral = szego_integral(gs, eq, mu.density, -0.5)
            integral_value, diverged = integral.value, integral.diverged
        a, _ = J.coefficients(horizon)
        ratios = np.exp(np.cumsum(np.log(a)) - np.arange(1, horizon + 1) * np.log(eq.capacity))
        limsup = float(ratios[horizon // 2:].max())
        report = {
            'ess_spec_ok': ess_spec_ok,
            'eigenvalues': eigenvalues,
            'half_sum': functionals.half_sum,
            'szego_integral': integral_value,
            'szego_diverged': diverged,
            'product_ratios': ratios,
            'product_ratio_limsup': limsup,
        }
        report['is_szego'] = bool(ess_spec_ok and np.isfinite(functionals.half_sum)
                                  and not diverged and limsup > 0)
        logger.info(f"Szego class report: is_szego={report['is_szego']}, "
                    f"{len(eigenvalues)} eigenvalues outside the set")
        return report

    def stripping_closure(self, J: JacobiOperator, gs: Optional[GapSet] = None,
                          eq: Optional[EquilibriumData] = None, n_max: int = 3) -> List[Dict]:
        """J^{(n)}（n = 1..n_max）的 Szegő 报告"""
        gs = gs or J.essential_spectrum()
        eq = eq or equilibrium(gs, self.quad_order)
        reports = []
        for n in range(1, n_max + 1):
            report = self.szego_class_report(J.strip(n), gs, eq)
            report['n'] = n
            reports.append(report)
        return reports

    # ------------------------------------------------------------------
    # u(0;J) 与 Jost 函数
    # ------------------------------------------------------------------

    def jost_u0(self, gs: GapSet, eq: EquilibriumData, measure: SpectralMeasure) -> float:
        """
        u(0;J) = ∏ exp(-G(E_j)) · exp(-½ ∫ log(w/ρ_𝔢) dρ_𝔢)

        Args:
            gs: 有限间隙集
            eq: 平衡数据
            measure: 谱测度

        Returns:
            正实数
        """
        if measure.density is None or szego_integral(gs, eq, measure.density, -0.5).diverged:
            raise DomainError("the Szego integral diverges, u(0;J) is not defined")
        eigenvalues = [E for E, _ in measure.points]
        product = eigenvalue_functionals(gs, eq, eigenvalues).green_product
        ends = np.asarray(gs.endpoints, dtype=float)
        log_integral = 0.0
        for j, (alpha, beta) in enumerate(gs.bands):
            others = np.delete(ends, [2 * j, 2 * j + 1])

            def rule(n: int, alpha=alpha, beta=beta, others=others) -> float:
                nodes = band_rule(alpha, beta, n)
                log_w = band_log_weight(measure.density, alpha, beta, nodes)
                if log_w is None:
                    raise DomainError(f"the weight vanishes on [{alpha}, {beta}]")
                rest = (np.abs(np.prod(nodes.x[:, None] - others[None, :], axis=1)) if len(others)
                        else np.ones_like(nodes.x))
                # ρ_𝔢 dx = |P| / (π √rest) dθ，√((x-α)(β-x)) 用精确的 d_lo·d_hi
                scale = np.abs(eq.gap_polynomial(nodes.x)) / (np.pi * np.sqrt(rest))
                log_rho = np.log(scale) - 0.5 * np.log(nodes.d_lo * nodes.d_hi)
                return float(np.sum(nodes.weights * scale * (log_w - log_rho)))

            log_integral += adaptive_integrate(rule, 32, self.tolerance, label=f"u0 integral band {j}")[0]
        return float(product * np.exp(-0.5 * log_integral))

    def group_for(self, gs: GapSet, eq: EquilibriumData) -> OrthocircleGroup:
        """集合对应的 Fuchsian 群（按平衡数据缓存拟合结果）"""
        if gs.ell == 0:
            return OrthocircleGroup(())
        key = id(eq)
        if key not in self._groups:
            self._groups[key] = (eq, fit_circles(gs, eq))
        return self._groups[key][1]

    def jost_data(self, J: JacobiOperator, gs: Optional[GapSet] = None,
                  eq: Optional[EquilibriumData] = None, G: Optional[OrthocircleGroup] = None,
                  L: Optional[int] = None) -> JostData:
        """
        构造 JostData（谱测度、特征值原像与 u(0;J)）

        Args:
            J: Jacobi 算子
            gs: 有限间隙集，缺省为 J 的本质谱
            eq: 平衡数据
            G: Fuchsian 群，缺省时拟合
            L: Blaschke 截断字长

        Returns:
            JostData
        """
        gs = gs or J.essential_spectrum()
        eq = eq or equilibrium(gs, self.quad_order)
        G = G if G is not None else self.group_for(gs, eq)
        key = (J, id(eq), id(G), L)
        if key not in self._jost:
            cover = CoveringMap(G, gs, eq, L)
            mu = spectral_measure(J)
            eigenvalues = tuple(E for E, _ in mu.points)
            preimages = tuple(cover.inverse(E) for E in eigenvalues)
            u0 = self.jost_u0(gs, eq, mu)
            self._jost[key] = JostData(J, gs, eq, cover, mu, eigenvalues, preimages, u0)
        return self._jost[key]

    def jost_function(self, JD: JostData, z: complex) -> complex:
        """
        u(z;J) = ∏ B(z, p_j) · exp((1/4π) ∫ (ζ+z)/(ζ-z) log(ρ_𝔢/w)(x(ζ)) dθ)

        Args:
            JD: Jost 数据
            z: 圆盘内的点

        Returns:
            u(z;J)
        """
        z = complex(z)
        outer = JD.cover.poisson_integral(JD.log_ratio, z, tol=self.tolerance, key=('log_ratio', id(JD)))
        return complex(JD.blaschke_part(z) * np.exp(0.5 * outer))

    def jost_solution(self, J: JacobiOperator, gs: GapSet, eq: EquilibriumData, n: int, z: complex,
                      G: Optional[OrthocircleGroup] = None) -> complex:
        """u_n(z;J) = a_n^{-1} B(z)^n u(z;J^{(n)})，a_0 = 1"""
        if n < 0:
            raise DomainError(f"index {n} must be >= 0", index=n)
        JD = self.jost_data(J.strip(n), gs, eq, G)
        a_n = 1.0 if n == 0 else J.a(n)
        return complex(JD.cover.blaschke(complex(z)) ** n * self.jost_function(JD, z) / a_n)

    def second_solution_wronskian(self, J: JacobiOperator, gs: GapSet, eq: EquilibriumData,
                                  z: complex, N: int = 12, G: Optional[OrthocircleGroup] = None) -> Dict:
        """
        Jost 解的差分方程残差，以及与第二解（v_0 = 0, v_1 = 1）的朗斯基行列式

        Returns:
            {'recurrence_residual', 'wronskian', 'wronskian_variation', 'growth_rate', 'expected_rate'}
        """
        z = complex(z)
        u = np.array([self.jost_solution(J, gs, eq, n, z, G) for n in range(N + 2)])
        cover = self.jost_data(J, gs, eq, G).cover
        x = cover.forward(z)
        a = np.array([1.0] + [J.a(n) for n in range(1, N + 2)])
        b = np.array([0.0] + [J.b(n) for n in range(1, N + 2)])
        residual = max(abs(a[n - 1] * u[n - 1] + b[n] * u[n] + a[n] * u[n + 1] - x * u[n])
                       for n in range(1, N + 1))
        v = np.zeros(N + 2, dtype=complex)
        v[1] = 1.0
        for n in range(1, N + 1):
            v[n + 1] = ((x - b[n]) * v[n] - a[n - 1] * v[n - 1]) / a[n]
        wronskian = np.array([a[n] * (u[n] * v[n + 1] - u[n + 1] * v[n]) for n in range(N + 1)])
        # 每隔一个周期取样，拟合斜率不受周期内振荡影响
        tail = np.arange(N + 1, N // 2 - 1, -J.tail.period)[::-1]
        growth = float(np.polyfit(tail, np.log(np.abs(v[tail])), 1)[0])
        return {
            'recurrence_residual': float(residual),
            'wronskian': wronskian,
            'wronskian_variation': float(np.max(np.abs(wronskian - wronskian[0])) / abs(wronskian[0])),
            'growth_rate': growth,
            'expected_rate': float(-np.log(abs(cover.blaschke(z)))),
        }

    def jost_identity_check(self, J: JacobiOperator, gs: GapSet, eq: EquilibriumData, z: complex,
                            n_max: int = 3, G: Optional[OrthocircleGroup] = None) -> pd.DataFrame:
        """a_{n+1} M_n 的三种算法：闭式 m、Jost 函数之比、Jost 解之比"""
        z = complex(z)
        cover = self.jost_data(J, gs, eq, G).cover
        x = cover.forward(z)
        B = cover.blaschke(z)
        rows = []
        for n in range(n_max + 1):
            direct = -J.a(n + 1) * m_value(operator_m_function(J.strip(n)), x)
            current = self.jost_function(self.jost_data(J.strip(n), gs, eq, G), z)
            following = self.jost_function(self.jost_data(J.strip(n + 1), gs, eq, G), z)
            via_jost = B * following / current
            a_n = 1.0 if n == 0 else J.a(n)
            via_solution = (J.a(n + 1) / a_n) * (self.jost_solution(J, gs, eq, n + 1, z, G)
                                                 / self.jost_solution(J, gs, eq, n, z, G))
            rows.append({'n': n, 'direct': direct, 'via_jost': via_jost, 'via_solution': via_solution,
                         'residual': max(abs(direct - via_jost), abs(direct - via_solution))})
        return pd.DataFrame(rows)

    # ------------------------------------------------------------------
    # MH 表示
    # ------------------------------------------------------------------

    def disk_m_function(self, J: JacobiOperator, cover: CoveringMap) -> DiskMFunction:
        """M 与其在 𝔽̄ 中的零点、极点（由 m 的实零点与实极点的原像给出）"""
        zeros = tuple(cover.inverse(E) for E in m_zeros(J))
        poles = tuple(cover.inverse(E) for E in m_poles(J))
        return DiskMFunction(J, cover, zeros, poles)

    def mh_representation_check(self, DM: DiskMFunction, JD: JostData, R: float = 1.0,
                                z: complex = 0.2 + 0.1j) -> Dict:
        """
        a_1 M(z) = B(z) B_∞(z) exp((1/2π) ∫ (ζ+z)/(ζ-z) log|a_1 M(ζ)| dθ)

        Args:
            DM: 圆盘上的 M 函数
            JD: 同一算子的 Jost 数据（用于 a_{n+1} M_n 的交叉检查）
            R: 只计入 |·| < R 的零点与极点
            z: 探针

        Returns:
            {'lhs', 'rhs', 'B_inf', 'residual', 'identity_residuals'}
        """
        z = complex(z)
        cover = DM.cover
        G, L = cover.group, cover.blaschke.L
        try:
            lhs = DM.operator.a(1) * DM(z)
        except PoleError as e:
            raise DomainError(f"M has a pole at the probe z = {z}") from e
        zeros = [w for w in DM.zeros if abs(w) < R]
        poles = [p for p in DM.poles if abs(p) < R]
        if len(zeros) < len(DM.zeros) or len(poles) < len(DM.poles):
            logger.warning(f"radius {R} leaves out {len(DM.zeros) - len(zeros)} zeros and "
                           f"{len(DM.poles) - len(poles)} poles of M")
        b_inf = 1.0 + 0j
        for w in zeros:
            b_inf *= BlaschkeEvaluator(G, w, L)(z)
        for p in poles:
            b_inf /= BlaschkeEvaluator(G, p, L)(z)
        outer = np.exp(cover.poisson_integral(DM.boundary_log_modulus, z, tol=self.tolerance,
                                              key=('log_modulus', id(DM))))
        rhs = cover.blaschke(z) * b_inf * outer
        identity = self.jost_identity_check(JD.operator, JD.gapset, JD.eq, z, n_max=1, G=G)
        result = {'lhs': complex(lhs), 'rhs': complex(rhs), 'B_inf': complex(b_inf),
                  'residual': float(abs(lhs - rhs)),
                  'identity_residuals': identity['residual'].tolist()}
        logger.info(f"MH representation at z={z}: |lhs - rhs| = {result['residual']:.2e}")
        return result

    def log_moment_profile(self, DM: DiskMFunction, radii: Sequence[float] = (0.9, 0.99, 0.999),
                           p: float = 2.0, n: int = 2048) -> pd.DataFrame:
        """∫ |log|M(re^{iθ})||^p dθ/2π 随 r 的变化"""
        theta = 2.0 * np.pi * np.arange(n) / n
        rows = []
        for r in radii:
            values = np.array([abs(np.log(abs(DM(r * np.exp(1j * t))))) ** p for t in theta])
            rows.append({'radius': r, 'moment': float(values.mean())})
        return pd.DataFrame(rows)

    # ------------------------------------------------------------------
    # 渐近
    # ------------------------------------------------------------------

    def asymptotic_ratio(self, J: JacobiOperator, T_inf: Optional[TorusPoint] = None,
                         horizon: int = 30, eq: Optional[EquilibriumData] = None) -> Dict:
        """
        (a_1…a_n)/(a_1^∞…a_n^∞) 与预测值 u(0;J_∞)/u(0;J)

        Args:
            J: 有限头部加周期尾部的算子
            T_inf: 极限环面点，缺省为 J 的尾部
            horizon: 序列长度
            eq: 极限集合的平衡数据，端点不符时按 quad_order 重新计算

        Returns:
            {'ratio_sequence', 'predicted', 'u0', 'u0_limit', 'deviation', 'settled_from'}
        """
        if horizon <= J.head_length:
            raise ValidationError(f"horizon {horizon} must exceed the head length {J.head_length}",
                                  index=horizon)
        T_inf = T_inf or J.tail
        limit = JacobiOperator.periodic(T_inf)
        start = J.head_length + 1
        for n in range(start, start + 2 * T_inf.period):
            if abs(J.a(n) - limit.a(n)) > 1e-14 or abs(J.b(n) - limit.b(n)) > 1e-14:
                raise ValidationError(f"J does not follow the limit point beyond its head (n = {n})", index=n)
        a, _ = J.coefficients(horizon)
        a_inf, _ = limit.coefficients(horizon)
        ratios = pd.Series(np.cumprod(a / a_inf), index=np.arange(1, horizon + 1), name='ratio')
        gs = T_inf.bands()
        if (eq is None or len(eq.gapset.endpoints) != len(gs.endpoints)
                or not np.allclose(eq.gapset.endpoints, gs.endpoints, atol=1e-10)):
            eq = equilibrium(gs, self.quad_order)
        u0 = self.jost_u0(gs, eq, spectral_measure(J))
        u0_limit = self.jost_u0(gs, eq, spectral_measure(limit))
        predicted = u0_limit / u0
        settled = ratios.loc[max(J.head_length, 1):]
        deviation = float(np.max(np.abs(settled.to_numpy() - predicted)))
        logger.info(f"Asymptotic ratio: predicted {predicted:.10f}, max deviation {deviation:.2e}")
        return {'ratio_sequence': ratios, 'predicted': float(predicted), 'u0': u0,
                'u0_limit': u0_limit, 'deviation': deviation, 'settled_from': max(J.head_length, 1)}

    @staticmethod
    def _scaled_polynomials(J: JacobiOperator, x: complex, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
        """p_n(x) 的规范化值与对数尺度，n = 0..horizon"""
        values = np.zeros(horizon + 1, dtype=complex)
        scales = np.zeros(horizon + 1)
        previous, current, log_scale = 0j, 1.0 + 0j, 0.0
        for n in range(horizon + 1):
            values[n], scales[n] = current, log_scale
            back = J.a(n) * previous if n >= 1 else 0.0
            previous, current = current, ((x - J.b(n + 1)) * current - back) / J.a(n + 1)
            size = max(abs(previous), abs(current))
            if size > 1e100 or 0 < size < 1e-100:
                previous, current = previous / size, current / size
                log_scale += np.log(size)
        return values, scales

    def pn_ratio(self, J: JacobiOperator, J_inf: JacobiOperator, x: complex, horizon: int = 60,
                 n0: Optional[int] = None) -> pd.Series:
        """
        p_n(x, dμ) / p_n(x, dμ_∞)，对数尺度递推

        Returns:
            以 n 为索引的 Series；attrs['tail_variation'] = max_{n ≥ n0} |r_n - r_horizon|
        """
        x = complex(x)
        if x.imag == 0 and J_inf.essential_spectrum().contains(x.real):
            logger.warning(f"x = {x.real} lies in the set; the ratio is not expected to converge")
        p, p_scale = self._scaled_polynomials(J, x, horizon)
        q, q_scale = self._scaled_polynomials(J_inf, x, horizon)
        ratios = p / q * np.exp(p_scale - q_scale)
        series = pd.Series(ratios[1:], index=np.arange(1, horizon + 1), name='ratio')
        n0 = n0 or horizon // 2
        series.attrs['n0'] = n0
        series.attrs['tail_variation'] = float(np.max(np.abs(series.loc[n0:] - series.iloc[-1])))
        return series

    # ------------------------------------------------------------------
    # 特征标
    # ------------------------------------------------------------------

    def character_of_J(self, JD: JostData, probes: Optional[Sequence[complex]] = None) -> Character:
        """
        C_J(γ_j^+) = u(γ_j^+ z; J) / u(z; J)，在探针上取相位平均

        Returns:
            Character
        """
        G = JD.group
        if G.ell == 0:
            return Character(())
        probes = probes or self.probes
        values = []
        for j in range(G.ell):
            gamma = G.generators[2 * j]
            phases = []
            for z in probes:
                base = self.jost_function(JD, z)
                if abs(base) < 1e-10:
                    z = 1.1 * z + 0.01j
                    base = self.jost_function(JD, z)
                ratio = self.jost_function(JD, gamma(z)) / base
                phases.append(ratio / abs(ratio))
            mean = np.mean(phases)
            values.append(complex(mean / abs(mean)))
        return Character(tuple(values))

    def stripping_character_check(self, J: JacobiOperator, gs: GapSet, eq: EquilibriumData,
                                  n_values: Sequence[int] = (1, 2),
                                  G: Optional[OrthocircleGroup] = None) -> Dict[int, float]:
        """C_{J^{(n)}} C_0^n 与 C_J 的相位距离"""
        JD = self.jost_data(J, gs, eq, G)
        base = self.character_of_J(JD)
        c0 = blaschke_character(JD.group, 0j, JD.cover.blaschke.L)
        result = {}
        for n in n_values:
            stripped = self.character_of_J(self.jost_data(J.strip(n), gs, eq, JD.group))
            shifted = Character(tuple(c * c0.values[j] ** n for j, c in enumerate(stripped.values)))
            result[n] = character_distance(shifted, base)
            if result[n] > self.identity_tolerance:
                logger.warning(f"character stripping identity off by {result[n]:.2e} at n = {n}")
        return result

    def match_torus_character(self, C: Character, walk: Sequence[TorusPoint], G: OrthocircleGroup,
                              gs: GapSet, eq: EquilibriumData, refine: bool = True) -> TorusPoint:
        """
        在环面行走样本中寻找特征标为 C 的点

        Args:
            C: 目标特征标
            walk: 环面采样
            G: Fuchsian 群
            gs: 有限间隙集
            eq: 平衡数据
            refine: 是否在相邻样本之间细化

        Returns:
            TorusPoint
        """
        walk = list(walk)
        if not walk:
            raise ValidationError("torus walk is empty", index=0)
        characters = self.walk_characters(walk, G, gs, eq)
        distances = [character_distance(C, c) for c in characters]
        best = int(np.argmin(distances))
        logger.info(f"Character match: sample {best} at phase distance {distances[best]:.2e}")
        if distances[best] < self.match_tolerance or not refine or len(walk) < 2:
            return walk[best]

        target = walk[0].band_edges()
        candidate, value = walk[best], distances[best]
        for other in (best - 1, (best + 1) % len(walk)):
            if other < 0 or other == best:
                continue
            start, end = walk[best].params, walk[other].params

            def project(t: float) -> TorusPoint:
                vector, residual = torus_calculator.project_to_torus(start + t * (end - start), target)
                return TorusPoint.from_vector(vector, residual=residual)

            def objective(t: float) -> float:
                point = project(t)
                if min(point.a) <= 0:
                    return np.inf
                JD = self.jost_data(JacobiOperator.periodic(point), gs, eq, G)
                return character_distance(C, self.character_of_J(JD))

            result = minimize_scalar(objective, bounds=(0.0, 1.0), method='bounded',
                                     options={'xatol': 1e-6, 'maxiter': 30})
            if result.fun < value:
                candidate, value = project(float(result.x)), float(result.fun)
        if value > self.match_tolerance:
            logger.warning(f"character match stopped at phase distance {value:.2e}; densify the walk")
        return candidate

    def walk_characters(self, walk: Sequence[TorusPoint], G: OrthocircleGroup, gs: GapSet,
                        eq: EquilibriumData) -> List[Character]:
        """行走样本的特征标；两个样本不可区分时报错"""
        characters = [self.character_of_J(self.jost_data(JacobiOperator.periodic(T), gs, eq, G))
                      for T in walk]
        for i in range(len(characters)):
            for j in range(i + 1, len(characters)):
                if character_distance(characters[i], characters[j]) < self.resolution:
                    raise ResolutionError(f"walk samples {i} and {j} have the same character")
        return characters


# 全局计算器实例
szego_calculator = SzegoCalculator()
szego_class_report = szego_calculator.szego_class_report
jost_u0 = szego_calculator.jost_u0
jost_data = szego_calculator.jost_data
jost_function = szego_calculator.jost_function
jost_solution = szego_calculator.jost_solution
mh_representation_check = szego_calculator.mh_representation_check
asymptotic_ratio = szego_calculator.asymptotic_ratio
pn_ratio = szego_calculator.pn_ratio
character_of_J = szego_calculator.character_of_J
match_torus_character = szego_calculator.match_torus_character
second_solution_wronskian = szego_calculator.second_solution_wronskian
stripping_closure = szego_calculator.stripping_closure
jost_identity_check = szego_calculator.jost_identity_check
