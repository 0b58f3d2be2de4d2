"""
覆盖映射模块
正交圆生成元、字枚举、Burnside/Beardon 和、Blaschke 乘积及其特征标、ℛ_m 的测度衰减、
覆盖映射 x(z) 的数值构造，以及边界上的推前恒等式

约定：上半平面的圆按角度递增编号 i = 0..ℓ-1，第 i 个圆对应第 ℓ-1-i 个间隙；
生成元 g = 2j 为 γ_j^+，g = 2j+1 为 γ_j^-，g ^ 1 为其逆；
字 (g_1, ..., g_k) 表示 γ_{g_1} ∘ ... ∘ γ_{g_k}。
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq, least_squares, minimize_scalar
import warnings
warnings.filterwarnings('ignore')

from gapset import EquilibriumData, GapSet
from quadrature import adaptive_integrate, band_rule, graded_interval_rule, interval_rule
from utils import (AccuracyError, ConvergenceError, DomainError, FitFailure, GeometryError,
                   WordLimitError, logger)


# 字长截断的默认值
DEFAULT_WORD_LENGTH = {0: 0, 1: 10, 2: 7}
WORD_CAP = 500000


def default_word_length(ell: int) -> int:
    return DEFAULT_WORD_LENGTH.get(ell, 5)


@dataclass(frozen=True)
class MobiusMap:
    """单位圆盘自同构 z ↦ (az + b)/(b̄z + ā)，|a|² - |b|² = 1"""
    a: complex
    b: complex

    @classmethod
    def identity(cls) -> 'MobiusMap':
        return cls(1.0 + 0j, 0j)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        result = (self.a * z + self.b) / (np.conj(self.b) * z + np.conj(self.a))
        return complex(result) if result.ndim == 0 else result

    def compose(self, other: 'MobiusMap') -> 'MobiusMap':
        """self ∘ other"""
        return MobiusMap(self.a * other.a + self.b * np.conj(other.b),
                         self.a * other.b + self.b * np.conj(other.a))

    def inverse(self) -> 'MobiusMap':
        return MobiusMap(np.conj(self.a), -self.b)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        result = 1.0 / (np.conj(self.b) * z + np.conj(self.a)) ** 2
        return complex(result) if result.ndim == 0 else result

    @property
    def determinant(self) -> float:
        return float(abs(self.a) ** 2 - abs(self.b) ** 2)

    def preserves_disk(self, samples: int = 16, tol: float = 1e-10) -> bool:
        """单位圆映到单位圆、圆盘内点映到圆盘内"""
        theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
        on_circle = np.abs(np.abs(self(np.exp(1j * theta))) - 1.0) < tol
        inside = np.abs(self(0.5 * np.exp(1j * theta))) < 1.0
        return bool(np.all(on_circle) and np.all(inside))


def orthocircle(theta1: float, theta2: float) -> Tuple[complex, float]:
    """过 e^{iθ1}、e^{iθ2} 且与单位圆正交的圆：(圆心, 半径)"""
    phi, delta = 0.5 * (theta1 + theta2), 0.5 * (theta2 - theta1)
    return np.exp(1j * phi) / np.cos(delta), float(np.tan(delta))


def _circle_through(points: np.ndarray) -> Tuple[complex, float]:
    """三点外接圆"""
    z1, z2, z3 = points
    w = (z3 - z1) / (z2 - z1)
    if abs(w.imag) < 1e-300:
        raise GeometryError("image circle degenerated to a line")
    center = (z2 - z1) * (w - abs(w) ** 2) / (2j * w.imag) + z1
    return complex(center), float(abs(z1 - center))


def first_overlap(arcs: Sequence[Tuple[float, float]], tol: float = 1e-12) -> Optional[float]:
    """
    按起点排序的 (起点角, 弧长) 列表中第一处重叠的角度，无重叠时返回 None

    起点在 [0, 2π) 内；最后一段越过 2π 的部分与第一段比较。
    """
    for (s0, l0), (s1, _) in zip(arcs, arcs[1:]):
        if s0 + l0 > s1 + tol:
            return float(s1)
    if len(arcs) > 1:
        s_last, l_last = arcs[-1]
        if s_last + l_last - 2.0 * np.pi > arcs[0][0] + tol:
            return float(arcs[0][0])
    return None


@dataclass(frozen=True, eq=False)
class OrthocircleGroup:
    """
    由 ℓ 对正交圆生成的 Fuchsian 群

    angles[i] = (θ_{i,1}, θ_{i,2})，0 < θ_{i,1} < θ_{i,2} < π，按角度递增。
    """
    angles: Tuple[Tuple[float, float], ...]
    word_cap: int = WORD_CAP
    _cache: Dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        previous = 0.0
        for i, (t1, t2) in enumerate(self.angles):
            if not (previous < t1 < t2 < np.pi):
                raise GeometryError(f"circle {i} angles ({t1}, {t2}) are not ordered and disjoint")
            previous = t2

    @property
    def ell(self) -> int:
        return len(self.angles)

    @property
    def circles(self) -> List[Tuple[complex, float]]:
        """上半平面各圆的 (圆心, 半径)"""
        return [orthocircle(t1, t2) for t1, t2 in self.angles]

    @property
    def generators(self) -> List[MobiusMap]:
        if 'generators' not in self._cache:
            maps = []
            for center, radius in self.circles:
                plus = MobiusMap(1j * center / radius, -1j / radius)
                maps.extend([plus, plus.inverse()])
            self._cache['generators'] = maps
        return self._cache['generators']

    def disk(self, g: int) -> Tuple[complex, float]:
        """生成元 g 的像所在的圆盘：偶数为 D_j^+，奇数为共轭圆盘 D_j^-"""
        center, radius = self.circles[g // 2]
        return (center if g % 2 == 0 else np.conj(center)), radius

    def disk_arc(self, g: int) -> Tuple[float, float]:
        """圆盘 D_g 与单位圆相交的弧（逆时针）"""
        t1, t2 = self.angles[g // 2]
        return (t1, t2) if g % 2 == 0 else (-t2, -t1)

    def disk_index(self, z: complex) -> Optional[int]:
        """z 严格落在哪个圆盘内（生成元编号），都不在时返回 None"""
        for g in range(2 * self.ell):
            center, radius = self.disk(g)
            if abs(z - center) < radius * (1.0 - 1e-13):
                return g
        return None

    def in_fundamental(self, z: complex) -> bool:
        return abs(z) <= 1.0 and self.disk_index(z) is None

    def reduce_to_fundamental(self, z: complex, max_steps: int = 2000) -> Tuple[complex, Tuple[int, ...]]:
        """
        用生成元把 z 拉回 𝔽̄

        Returns:
            (z_F, word)，满足 z = γ_word(z_F)
        """
        z = complex(z)
        word = []
        for _ in range(max_steps):
            g = self.disk_index(z)
            if g is None:
                return z, tuple(word)
            z = self.generators[g ^ 1](z)
            word.append(g)
        raise GeometryError(f"reduction did not reach the fundamental domain in {max_steps} steps")

    # ------------------------------------------------------------------
    # 字枚举
    # ------------------------------------------------------------------

    def words(self, L: int) -> Tuple[List[Tuple[int, ...]], np.ndarray, np.ndarray]:
        """
        长度 ≤ L 的既约字（广度优先，按前缀复用乘积）

        Returns:
            (字列表, a 系数数组, b 系数数组)
        """
        if L < 0:
            raise DomainError(f"word length {L} must be >= 0", index=L)
        key = ('words', L)
        if key in self._cache:
            return self._cache[key]
        identity = MobiusMap.identity()
        labels: List[Tuple[int, ...]] = [()]
        maps: List[MobiusMap] = [identity]
        level = [((), identity)]
        n = 2 * self.ell
        for k in range(1, L + 1):
            expected = n * (n - 1) ** (k - 1)
            if len(labels) + expected > self.word_cap:
                raise WordLimitError(f"{len(labels) + expected} words exceed the cap {self.word_cap}")
            new_level = []
            for word, gamma in level:
                for g in range(n):
                    if word and g == word[-1] ^ 1:
                        continue
                    new_level.append((word + (g,), gamma.compose(self.generators[g])))
            if len(new_level) != expected:
                raise GeometryError(f"enumerated {len(new_level)} words of length {k}, expected {expected}")
            labels.extend(w for w, _ in new_level)
            maps.extend(m for _, m in new_level)
            level = new_level
        result = (labels, np.array([m.a for m in maps], dtype=complex),
                  np.array([m.b for m in maps], dtype=complex))
        self._cache[key] = result
        return result

    def orbit(self, w: complex, L: int) -> np.ndarray:
        """{γ(w) : |γ| ≤ L}"""
        _, a, b = self.words(L)
        return (a * w + b) / (np.conj(b) * w + np.conj(a))

    def orbit_derivatives(self, z, L: int) -> np.ndarray:
        """|γ'(z)|，每行对应一个字"""
        _, a, b = self.words(L)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return 1.0 / np.abs(np.conj(b)[:, None] * z[None, :] + np.conj(a)[:, None]) ** 2

    def word_lengths(self, L: int) -> np.ndarray:
        labels, _, _ = self.words(L)
        return np.array([len(w) for w in labels])

    def level_disks(self, m: int) -> List[Tuple[Tuple[int, ...], complex, float]]:
        """第 m 层像圆盘 γ_{g_1..g_{m-1}}(D_{g_m})"""
        if m < 1:
            raise DomainError(f"level {m} must be >= 1", index=m)
        labels, a, b = self.words(m - 1)
        result = []
        tau = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
        for word, ai, bi in zip(labels, a, b):
            if len(word) != m - 1:
                continue
            gamma = MobiusMap(ai, bi)
            for g in range(2 * self.ell):
                if word and g == word[-1] ^ 1:
                    continue
                center, radius = self.disk(g)
                image = gamma(center + radius * np.exp(1j * tau))
                c, r = _circle_through(image)
                result.append((word + (g,), c, r))
        return result

    def level_arcs(self, m: int) -> List[Tuple[Tuple[int, ...], float, float]]:
        """
        第 m 层圆盘在单位圆上截出的弧（起点角, 弧长）

        弧长取 ∫|γ'(e^{iθ})|dθ，深层弧也保持相对精度。
        """
        if m < 1:
            raise DomainError(f"level {m} must be >= 1", index=m)
        labels, a, b = self.words(m - 1)
        arcs = []
        for word, ai, bi in zip(labels, a, b):
            if len(word) != m - 1:
                continue
            gamma = MobiusMap(ai, bi)
            for g in range(2 * self.ell):
                if word and g == word[-1] ^ 1:
                    continue
                t1, t2 = self.disk_arc(g)
                start = np.angle(gamma(np.exp(1j * t1)))
                nodes, weights = interval_rule(t1, t2, 32)
                length = np.sum(weights * np.abs(gamma.derivative(np.exp(1j * nodes))))
                arcs.append((word + (g,), float(np.mod(start, 2.0 * np.pi)), float(length)))
        return arcs


@dataclass(frozen=True)
class Character:
    """Γ 的酉特征标，values[j] = C(γ_j^+)"""
    values: Tuple[complex, ...]

    def __call__(self, word: Sequence[int]) -> complex:
        result = 1.0 + 0j
        for g in word:
            value = self.values[g // 2]
            result *= value if g % 2 == 0 else np.conj(value)
        return complex(result)

    def max_modulus_error(self) -> float:
        return float(max((abs(abs(v) - 1.0) for v in self.values), default=0.0))


class BlaschkeValue(NamedTuple):
    """截断 Blaschke 乘积的值及尾部估计"""
    value: complex
    tail_bound: float


def blaschke_factor(z: complex, w: complex) -> complex:
    """b(z, w) = -(w̄/|w|)(z - w)/(1 - w̄z)，b(z, 0) = z"""
    if w == 0:
        return complex(z)
    return complex(-(np.conj(w) / abs(w)) * (z - w) / (1.0 - np.conj(w) * z))


class BlaschkeEvaluator:
    """轨道 {γ(w)} 上的截断 Blaschke 乘积"""

    def __init__(self, group: OrthocircleGroup, w: complex = 0j, L: Optional[int] = None):
        self.group = group
        self.w = complex(w)
        self.L = default_word_length(group.ell) if L is None else L
        self.zeros = group.orbit(self.w, self.L)
        self._nonzero = self.zeros[np.abs(self.zeros) > 0]
        self._zero_count = len(self.zeros) - len(self._nonzero)
        self._phase = -np.conj(self._nonzero) / np.abs(self._nonzero)
        self.tail_sum = self._tail_sum()

    def _tail_sum(self) -> float:
        """长度 > L 的 Σ(1 - |γ(w)|)，由最后几层的几何比外推"""
        if self.group.ell == 0 or self.L < 2:
            return 0.0
        lengths = self.group.word_lengths(self.L)
        increments = np.array([np.sum(1.0 - np.abs(self.zeros[lengths == k])) for k in range(1, self.L + 1)])
        ratio = min(increments[-1] / increments[-2], 0.999)
        return float(increments[-1] * ratio / (1.0 - ratio))

    def __call__(self, z):
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        factors = self._phase[None, :] * (z_arr[:, None] - self._nonzero[None, :]) \
            / (1.0 - np.conj(self._nonzero)[None, :] * z_arr[:, None])
        result = z_arr ** self._zero_count * np.prod(factors, axis=1)
        return complex(result[0]) if np.ndim(z) == 0 else result

    def log_derivative(self, z: complex) -> complex:
        """B'/B = Σ [1/(z - w) + w̄/(1 - w̄z)]"""
        z = complex(z)
        value = self._zero_count / z if self._zero_count else 0j
        value += np.sum(1.0 / (z - self._nonzero) + np.conj(self._nonzero) / (1.0 - np.conj(self._nonzero) * z))
        return complex(value)

    def tail_bound(self, z: complex) -> float:
        """|log|B_L(z)| - log|B(z)|| 的上界估计"""
        z = complex(z)
        return float(2.0 * self.tail_sum * (1.0 + abs(z)) / max(1.0 - abs(z), 1e-300))

    def derivative_at_zero(self) -> float:
        """B'(0) = ∏_{γ ≠ id} |γ(0)|（w = 0 时）"""
        return float(np.prod(np.abs(self._nonzero)))


class CoveringMap:
    """
    覆盖映射 x: 𝔻 → (ℂ ∖ 𝔢) ∪ {∞}

    上半 𝔽 映到下半平面：exp(-𝒢₋(x(z))) = B(z)。
    """

    def __init__(self, group: OrthocircleGroup, gs: GapSet, eq: EquilibriumData,
                 L: Optional[int] = None):
        if group.ell != gs.ell:
            raise GeometryError(f"group has {group.ell} circles but the set has {gs.ell} gaps")
        self.group = group
        self.gapset = gs
        self.eq = eq
        self.blaschke = BlaschkeEvaluator(group, 0j, L)
        self.scale = max(gs.diameter, 1.0)
        self.newton_tol = 1e-13
        self.max_newton = 60
        self._tables: Dict = {}

    # ------------------------------------------------------------------
    # 正向映射
    # ------------------------------------------------------------------

    def _joukowski(self, z: complex) -> complex:
        alpha, beta = self.gapset.hull
        return 0.5 * (alpha + beta) + 0.25 * (beta - alpha) * (z + 1.0 / z)

    def _newton_x(self, target: complex, x: complex) -> complex:
        """在闭下半平面解 exp(-𝒢₋(x)) = target"""
        def residual(x):
            g = np.exp(-self.eq.green_lower(x))
            return g - target, g

        value, g = residual(x)
        for _ in range(self.max_newton):
            if abs(value) <= self.newton_tol * max(abs(target), 1e-300) * 10:
                return x
            step = value / (-self.eq.green_derivative_lower(x) * g)
            t = 1.0
            for _ in range(30):
                trial = x - t * step
                if trial.imag > 0:
                    trial = complex(trial.real, 0.0)
                trial_value, trial_g = residual(trial)
                if abs(trial_value) < abs(value):
                    break
                t *= 0.5
            else:
                break
            if abs(trial - x) <= 1e-15 * max(abs(x), 1.0):
                return trial
            x, value, g = trial, trial_value, trial_g
        if abs(value) <= 1e-9 * max(abs(target), 1e-300):
            return x
        raise ConvergenceError(f"Newton for x(z) did not converge (|F| = {abs(value):.2e})",
                               iterations=self.max_newton)

    def _forward_upper(self, z: complex) -> complex:
        """上半 𝔽 中的点：沿射线从 0 附近延拓"""
        radius, phi = abs(z), np.angle(z)
        start = min(radius, 0.05)
        steps = np.concatenate([[start], np.arange(start + 0.02, radius, 0.02), [radius]])
        x = None
        for r in np.unique(steps):
            point = r * np.exp(1j * phi)
            target = self.blaschke(point)
            if x is None:
                x = self.eq.capacity / target
                if x.imag > 0:
                    x = complex(x.real, 0.0)
            x = self._newton_x(target, x)
        return x

    def _forward_real(self, z: float) -> float:
        """实轴上的点映到外部实轴"""
        level = -np.log(abs(self.blaschke(complex(z))))
        alpha, beta = self.gapset.hull
        if z > 0:
            anchor, direction = beta, 1.0
        else:
            anchor, direction = alpha, -1.0
        span = self.scale
        while self.eq.green_real(anchor + direction * span) < level:
            span *= 2.0
        root = brentq(lambda t: self.eq.green_real(anchor + direction * t) - level, 0.0, span,
                      xtol=1e-14, rtol=1e-15)
        return float(anchor + direction * root)

    def forward(self, z: complex) -> complex:
        """
        x(z)

        Args:
            z: 单位圆盘内、不在 0 的轨道上的点

        Returns:
            x(z)
        """
        z = complex(z)
        if abs(z) >= 1.0:
            raise DomainError(f"|z| = {abs(z)} is not inside the unit disk")
        if self.group.ell == 0:
            if z == 0:
                raise DomainError("x(0) = ∞")
            return complex(self._joukowski(z))
        zf, _ = self.group.reduce_to_fundamental(z)
        if abs(zf) < 1e-300:
            raise DomainError(f"z = {z} lies on the orbit of 0")
        if abs(zf.imag) <= 1e-15:
            return complex(self._forward_real(zf.real))
        if zf.imag < 0:
            return complex(np.conj(self._forward_upper(np.conj(zf))))
        return complex(self._forward_upper(zf))

    def derivative(self, z: complex) -> complex:
        """x'(z) = -(B'/B)(z) / 𝒢'(x(z))"""
        x = self.forward(z)
        log_derivative = self.blaschke.log_derivative(complex(z))
        green_derivative = (self.eq.green_derivative_upper(x) if x.imag > 0
                            else self.eq.green_derivative_lower(x))
        return complex(-log_derivative / green_derivative)

    # ------------------------------------------------------------------
    # 逆映射
    # ------------------------------------------------------------------

    def _newton_z(self, target: complex, z: complex) -> complex:
        value = self.blaschke(z) - target
        for _ in range(self.max_newton):
            if abs(value) <= self.newton_tol * max(abs(target), 1e-300) * 10:
                return z
            b = self.blaschke(z)
            step = value / (b * self.blaschke.log_derivative(z))
            t = 1.0
            for _ in range(30):
                trial = z - t * step
                if abs(trial) < 1.0:
                    trial_value = self.blaschke(trial) - target
                    if abs(trial_value) < abs(value):
                        break
                t *= 0.5
            else:
                break
            z, value = trial, trial_value
        if abs(value) <= 1e-9 * max(abs(target), 1e-300):
            return z
        raise ConvergenceError("Newton for the inverse cover map did not converge",
                               iterations=self.max_newton)

    def inverse(self, x: complex) -> complex:
        """
        𝔽̄ 中满足 x(z) = x 的唯一点

        Args:
            x: 𝔢 之外的点

        Returns:
            z
        """
        x = complex(x)
        if x.imag == 0 and self.gapset.contains(x.real):
            raise DomainError(f"x = {x.real} lies in the set")
        alpha, beta = self.gapset.hull
        if self.group.ell == 0:
            w = (x - 0.5 * (alpha + beta)) / (0.25 * (beta - alpha))
            root = np.sqrt(w * w - 4.0 + 0j)
            candidates = [(w - root) / 2.0, (w + root) / 2.0]
            return complex(min(candidates, key=abs))
        if x.imag > 0:
            return complex(np.conj(self.inverse(np.conj(x))))
        if x.imag == 0 and (x.real > beta or x.real < alpha):
            level = np.exp(-self.eq.green_real(x.real))
            if x.real > beta:
                return complex(brentq(lambda t: self.blaschke(complex(t)).real - level,
                                      0.0, 1.0 - 1e-15, xtol=1e-16))
            return complex(brentq(lambda t: self.blaschke(complex(t)).real + level,
                                  -1.0 + 1e-15, 0.0, xtol=1e-16))
        # 从 x - iY 沿竖直线下降到 x
        height = 10.0 * (self.scale + abs(x))
        floor = max(abs(x.imag), 1e-3 * self.scale)
        heights = list(np.geomspace(height, floor, 40))
        if abs(x.imag) < floor:
            heights.append(abs(x.imag))
        derivative_zero = self.blaschke.derivative_at_zero()
        z = None
        for y in heights:
            point = complex(x.real, -y)
            target = np.exp(-self.eq.green_lower(point))
            if z is None:
                z = self.eq.capacity / (derivative_zero * point)
            z = self._newton_z(target, z)
        zf, _ = self.group.reduce_to_fundamental(z)
        return complex(zf)

    # ------------------------------------------------------------------
    # 边界值
    # ------------------------------------------------------------------

    def boundary_arg(self, phi) -> np.ndarray:
        """𝔽̄ ∩ 上半单位圆上的 arg B(e^{iφ})，取值 [0, π]"""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        args = np.angle(self.blaschke(np.exp(1j * phi)))
        args = np.where(args < -0.5 * np.pi, args + 2.0 * np.pi, args)
        return np.clip(args, 0.0, np.pi)

    def _mass_table(self, band: int) -> Tuple[np.ndarray, np.ndarray]:
        """带内 θ ↦ x = m + h cosθ 左侧平衡质量的粗表，用作 Newton 初值"""
        key = ('mass_table', band)
        if key not in self._tables:
            thetas = np.linspace(0.0, np.pi, 33)
            self._tables[key] = (thetas, np.array([self.eq.band_partial_mass(band, t) for t in thetas]))
        return self._tables[key]

    def boundary_x(self, args) -> np.ndarray:
        """
        arg B ∈ [0, π] 对应的边界点：ρ_𝔢((x, ∞)) = arg B / π

        在带内对 θ 做 Newton，d(左侧质量)/dθ = -|P(x)| / (π √|R 除去本带端点|) 处处光滑。
        """
        args = np.atleast_1d(np.asarray(args, dtype=float))
        if self.gapset.ell == 0:
            alpha, beta = self.gapset.hull
            return 0.5 * (alpha + beta) + 0.5 * (beta - alpha) * np.cos(np.clip(args, 0.0, np.pi))
        masses = np.asarray(self.eq.band_masses)
        cumulative = np.concatenate([[0.0], np.cumsum(masses)])
        ends = np.asarray(self.gapset.endpoints, dtype=float)
        result = np.empty_like(args)
        for i, arg in enumerate(args):
            u = 1.0 - float(np.clip(arg, 0.0, np.pi)) / np.pi
            j = int(np.clip(np.searchsorted(cumulative, u, side='right') - 1, 0, len(masses) - 1))
            alpha, beta = self.gapset.bands[j]
            target = u - cumulative[j]
            if target <= 0:
                result[i] = alpha
                continue
            if target >= masses[j]:
                result[i] = beta
                continue
            m, h = 0.5 * (alpha + beta), 0.5 * (beta - alpha)
            others = np.delete(ends, [2 * j, 2 * j + 1])
            thetas, table = self._mass_table(j)
            theta = float(np.interp(target, table[::-1], thetas[::-1]))
            for _ in range(20):
                x = m + h * np.cos(theta)
                rest = np.sqrt(abs(np.prod(x - others))) if len(others) else 1.0
                slope = -abs(self.eq.gap_polynomial(x)) / (np.pi * rest)
                step = (self.eq.band_partial_mass(j, theta) - target) / slope
                theta = float(np.clip(theta - step, 0.0, np.pi))
                if abs(step) < 1e-15:
                    break
            result[i] = m + h * np.cos(theta)
        return result

    def boundary_value(self, phi: float, method: str = 'exact', max_depth: int = 60) -> Optional[float]:
        """
        x 在单位圆上的边界值

        Args:
            phi: 角度
            method: exact 由 arg B 与平衡测度分位数给出；radial 由径向 Richardson 外推
            max_depth: 约化步数上限，超过时视为落在 ℛ_m 中并返回 None

        Returns:
            𝔢 中的实数
        """
        z = np.exp(1j * float(phi))
        try:
            zf, _ = self.group.reduce_to_fundamental(z, max_steps=max_depth)
        except GeometryError:
            return None
        angle = float(np.angle(zf))
        if method == 'radial':
            hs = np.array([1e-3, 5e-4, 2.5e-4])
            values = np.array([self.forward((1.0 - h) * np.exp(1j * abs(angle))).real for h in hs])
            return float(np.polyval(np.polyfit(hs, values, 2), 0.0))
        return float(self.boundary_x(self.boundary_arg(abs(angle)))[0])

    def poisson_integral(self, f: Callable, z: complex, depth: Optional[int] = None,
                         tol: float = 1e-10, key=None) -> complex:
        """
        (1/2π) ∫ (ζ + z)/(ζ - z) f(x(ζ)) dθ

        单位圆分块为 γ(𝔽̄ ∩ ∂𝔻)（|γ| ≤ depth），块上换元回 𝔽̄ 的弧；
        弧端点对应带端点，f 在那里允许对数奇性，故用两端分级的规则。

        Args:
            f: 𝔢 上的实函数（向量化）
            z: 圆盘内的点
            depth: 字长上限，缺省为 Blaschke 截断长度
            tol: 相对容差
            key: 非空时按 (key, 阶数) 缓存 f 在节点上的值

        Returns:
            积分值
        """
        z = complex(z)
        depth = self.blaschke.L if depth is None else depth
        _, a, b = self.group.words(depth)
        arcs = self.upper_arcs()
        local: Dict = {}

        def values_on(n: int):
            store = self._tables if key is not None else local
            cache_key = ('poisson', key, n)
            if cache_key not in store:
                per_arc = []
                for lo, hi in arcs:
                    nodes, weights, _ = graded_interval_rule(lo, hi, n)
                    x = self.boundary_x(self.boundary_arg(nodes))
                    per_arc.append((nodes, weights * np.asarray(f(x), dtype=float)))
                store[cache_key] = per_arc
            return store[cache_key]

        def rule(n: int) -> complex:
            total = 0j
            for nodes, weighted in values_on(n):
                # 上弧与其共轭的下弧上 x 取相同的边界值
                for zeta in (np.exp(1j * nodes), np.exp(-1j * nodes)):
                    denominator = np.conj(b)[:, None] * zeta[None, :] + np.conj(a)[:, None]
                    image = (a[:, None] * zeta[None, :] + b[:, None]) / denominator
                    kernel = (image + z) / (image - z) / np.abs(denominator) ** 2
                    total += np.sum(kernel * weighted[None, :])
            return complex(total / (2.0 * np.pi))

        value, order = adaptive_integrate(rule, 16, tol, max_nodes=2 ** 10, label="boundary Poisson integral")
        logger.debug(f"Poisson integral at z={z:.4f} used {order} nodes per half arc")
        return complex(value)

    def upper_arcs(self) -> List[Tuple[float, float]]:
        """𝔽̄ ∩ 上半单位圆的弧（按角度递增），第 k 段对应第 ℓ-k 条带"""
        edges = [0.0]
        for t1, t2 in self.group.angles:
            edges.extend([t1, t2])
        edges.append(np.pi)
        return [(edges[2 * k], edges[2 * k + 1]) for k in range(self.group.ell + 1)]

    def automorphy_residual(self, probes: int = 5) -> float:
        """
        Σ|x(γ_j^+ ζ̄) - x(ζ̄)|²，ζ 取在 C_j^+ 的内弧上，此时 γ_j^+ ζ̄ = ζ，该量等于 4(Im x(ζ))²

        圆偏离拟合值时 exp(-𝒢₋(x)) = B(ζ) 在闭下半平面可能无解，此时残差为 inf。
        """
        total = 0.0
        for center, radius in self.group.circles:
            delta = np.arcsin(radius / abs(center))
            half = 0.5 * np.pi - delta
            phi = np.angle(center)
            for tau in phi + np.pi + np.linspace(-0.8 * half, 0.8 * half, probes):
                zeta = center + radius * np.exp(1j * tau)
                try:
                    x = self._forward_upper(zeta)
                except (ConvergenceError, AccuracyError) as e:
                    logger.warning(f"Automorphy probe at {zeta:.4f} has no lower half-plane solution: {e}")
                    return float('inf')
                total += 4.0 * x.imag ** 2
        return float(total)


class CoveringCalculator:
    """覆盖映射计算器：拟合正交圆、Burnside 和、ℛ_m 测度与推前检查"""

    def __init__(self):
        self.fit_tolerance = 1e-8     # 自同构残差的上限
        self.ray_points = 200         # 沿射线展开辐角的点数
        self.max_fit_evaluations = 400

    # ------------------------------------------------------------------
    # 字与和
    # ------------------------------------------------------------------

    def enumerate_words(self, G: OrthocircleGroup, L: int) -> List[Tuple[Tuple[int, ...], MobiusMap]]:
        """长度 ≤ L 的既约字及其 Möbius 映射"""
        labels, a, b = G.words(L)
        return [(w, MobiusMap(ai, bi)) for w, ai, bi in zip(labels, a, b)]

    def burnside_sum(self, G: OrthocircleGroup, z: complex = 0j, t: float = 1.0, L: int = 8) -> pd.DataFrame:
        """
        按字长累计的 Σ|γ'(z)|^t 与 Σ(1-|γ(z)|)^t

        Args:
            G: 群
            z: 圆盘内的点
            t: 指数 (0, 1]
            L: 最大字长

        Returns:
            DataFrame（attrs['decay_rate'] 为拟合的几何衰减比）
        """
        if abs(z) >= 1.0:
            raise DomainError("z must lie in the unit disk")
        L = L if G.ell > 0 else 0
        lengths = G.word_lengths(L)
        derivatives = G.orbit_derivatives(z, L)[:, 0] ** t
        distances = (1.0 - np.abs(G.orbit(complex(z), L))) ** t
        rows = []
        for k in range(L + 1):
            mask = lengths == k
            rows.append({'length': k, 'count': int(mask.sum()),
                         'increment': float(derivatives[mask].sum()),
                         'orbit_increment': float(distances[mask].sum())})
        frame = pd.DataFrame(rows)
        frame['partial_sum'] = frame['increment'].cumsum()
        frame['orbit_partial_sum'] = frame['orbit_increment'].cumsum()
        fit = frame[frame['length'] >= max(1, L - 6)]
        if len(fit) >= 2:
            slope = np.polyfit(fit['length'], np.log(fit['increment']), 1)[0]
            frame.attrs['decay_rate'] = float(np.exp(slope))
        else:
            frame.attrs['decay_rate'] = 0.0
        return frame

    def blaschke(self, G: OrthocircleGroup, z: complex, w: complex = 0j, L: Optional[int] = None,
                 tolerance: float = 1e-10) -> BlaschkeValue:
        """
        截断 Blaschke 乘积 B(z, w)

        Returns:
            BlaschkeValue(值, 尾部界)
        """
        evaluator = BlaschkeEvaluator(G, w, L)
        z = complex(z)
        if np.any(np.abs(evaluator.zeros - z) < 1e-15):
            return BlaschkeValue(0j, 0.0)
        bound = evaluator.tail_bound(z)
        if bound > tolerance:
            logger.warning(f"Blaschke tail bound {bound:.2e} exceeds {tolerance:.0e}; "
                           f"increase the word length beyond {evaluator.L}")
        return BlaschkeValue(evaluator(z), bound)

    def orbit_product_modulus(self, G: OrthocircleGroup, z: complex, L: Optional[int] = None) -> float:
        """∏_{|γ| ≤ L} |γ(z)|"""
        L = default_word_length(G.ell) if L is None else L
        return float(np.prod(np.abs(G.orbit(complex(z), L))))

    def arg_derivative_check(self, G: OrthocircleGroup, phi: float, L: Optional[int] = None,
                             h: float = 1e-6) -> Dict[str, float]:
        """边界弧上 d arg B/dθ（有限差分）与 Σ|γ'(e^{iθ})| 的比较"""
        L = default_word_length(G.ell) if L is None else L
        evaluator = BlaschkeEvaluator(G, 0j, L)
        values = evaluator(np.exp(1j * np.array([phi - h, phi + h])))
        difference = float(np.angle(values[1] / values[0]) / (2.0 * h))
        series = float(G.orbit_derivatives(np.exp(1j * phi), L)[:, 0].sum())
        return {'phi': phi, 'arg_derivative': difference, 'derivative_sum': series,
                'positive': bool(difference > 0)}

    def rm_measure(self, G: OrthocircleGroup, m: int) -> float:
        """
        |ℛ_m|：单位圆上落在第 m 层像圆盘内的弧长（按 dθ/2π 归一）

        Args:
            G: 群
            m: 层数 ≥ 1

        Returns:
            测度
        """
        if m < 1:
            raise DomainError(f"level {m} must be >= 1", index=m)
        if G.ell == 0:
            return 0.0
        arcs = sorted((start, length) for _, start, length in G.level_arcs(m))
        overlap = first_overlap(arcs)
        if overlap is not None:
            raise GeometryError(f"level-{m} arcs overlap at angle {overlap:.6f}")
        return float(sum(length for _, length in arcs) / (2.0 * np.pi))

    def circle_geometry(self, G: OrthocircleGroup, level: int = 1) -> pd.DataFrame:
        """各层像圆（圆心、半径、弧端点）"""
        rows = []
        for m in range(1, level + 1):
            arcs = {w: (s, l) for w, s, l in G.level_arcs(m)}
            for word, center, radius in G.level_disks(m):
                start, length = arcs[word]
                rows.append({'level': m, 'word': ''.join(str(g) for g in word),
                             'center_re': center.real, 'center_im': center.imag, 'radius': radius,
                             'arc_start': start, 'arc_end': start + length})
        return pd.DataFrame(rows)

    # ------------------------------------------------------------------
    # 拟合
    # ------------------------------------------------------------------

    def _circle_targets(self, gs: GapSet, eq: EquilibriumData) -> Tuple[np.ndarray, np.ndarray]:
        ell = gs.ell
        masses = np.asarray(eq.band_masses)
        depths = eq.gap_critical_values
        args = np.array([np.pi * masses[ell - i:].sum() for i in range(ell)])
        return args, np.array([depths[ell - 1 - i] for i in range(ell)])

    def _initial_angles(self, args: np.ndarray, depths: np.ndarray) -> List[Tuple[float, float]]:
        """φ 取目标辐角，δ 取 π/2 - 2arctan(e^{-G(c)})，必要时收缩以保持不相交"""
        deltas = 0.5 * np.pi - 2.0 * np.arctan(np.exp(-depths))
        for i, phi in enumerate(args):
            room = [0.9 * phi, 0.9 * (np.pi - phi)]
            if i > 0:
                room.append(0.45 * (phi - args[i - 1]))
            if i < len(args) - 1:
                room.append(0.45 * (args[i + 1] - phi))
            deltas[i] = min(deltas[i], min(room))
        return [(phi - d, phi + d) for phi, d in zip(args, deltas)]

    def _circle_residual(self, G: OrthocircleGroup, evaluator: BlaschkeEvaluator,
                         args: np.ndarray, depths: np.ndarray) -> np.ndarray:
        residuals = []
        for i, (center, radius) in enumerate(G.circles):
            phi = np.angle(center)
            delta = 0.5 * (G.angles[i][1] - G.angles[i][0])
            inner = (1.0 - np.sin(delta)) / np.cos(delta)
            ray = np.linspace(1e-3 * inner, inner, self.ray_points) * np.exp(1j * phi)
            phases = np.unwrap(np.angle(evaluator(ray)))
            # 射线起点 arg B ≈ φ
            phases += phi - phases[0] + np.angle(evaluator(ray[0]) / ray[0])
            residuals.append(phases[-1] - args[i])
            half = 0.5 * np.pi - delta
            result = minimize_scalar(
                lambda tau: np.log(abs(evaluator(center + radius * np.exp(1j * tau)))),
                bounds=(phi + np.pi - half, phi + np.pi + half), method='bounded',
                options={'xatol': 1e-12})
            residuals.append(-result.fun - depths[i])
        return np.asarray(residuals)

    def fit_circles(self, gs: GapSet, eq: EquilibriumData,
                    init: Optional[Sequence[Tuple[float, float]]] = None,
                    L: Optional[int] = None) -> OrthocircleGroup:
        """
        拟合正交圆，使覆盖映射满足自同构

        Args:
            gs: 有限间隙集
            eq: 平衡数据
            init: 初始角度对；None 时由调和测度与间隙深度给出
            L: Blaschke 截断字长

        Returns:
            OrthocircleGroup
        """
        if gs.ell == 0:
            return OrthocircleGroup(())
        args, depths = self._circle_targets(gs, eq)
        start = list(init) if init is not None else self._initial_angles(args, depths)
        phi0 = np.array([0.5 * (t1 + t2) for t1, t2 in start])
        delta0 = np.array([0.5 * (t2 - t1) for t1, t2 in start])
        history: List[float] = []
        ell = gs.ell

        def unpack(params):
            phis, deltas = params[:ell], np.exp(params[ell:])
            return tuple((float(p - d), float(p + d)) for p, d in zip(phis, deltas))

        def residual(params):
            try:
                group = OrthocircleGroup(unpack(params))
                evaluator = BlaschkeEvaluator(group, 0j, L)
                values = self._circle_residual(group, evaluator, args, depths)
            except GeometryError:
                values = np.full(2 * ell, 10.0)
            history.append(float(np.linalg.norm(values)))
            return values

        lower = np.concatenate([np.full(ell, 1e-6), np.full(ell, -30.0)])
        upper = np.concatenate([np.full(ell, np.pi - 1e-6), np.full(ell, np.log(0.5 * np.pi - 1e-9))])
        x0 = np.clip(np.concatenate([phi0, np.log(delta0)]), lower + 1e-12, upper - 1e-12)
        result = least_squares(residual, x0, method='trf', bounds=(lower, upper),
                               xtol=1e-15, ftol=1e-15, gtol=1e-15,
                               max_nfev=self.max_fit_evaluations)
        group = OrthocircleGroup(unpack(result.x))
        automorphy = CoveringMap(group, gs, eq, L).automorphy_residual()
        logger.info(f"Circle fit: residual {np.linalg.norm(result.fun):.2e}, automorphy {automorphy:.2e}")
        if automorphy > self.fit_tolerance:
            logger.error(f"Circle fit stagnated; automorphy residual {automorphy:.2e}")
            raise FitFailure(f"automorphy residual {automorphy:.2e} above {self.fit_tolerance:.0e}",
                             history=history)
        return group

    # ------------------------------------------------------------------
    # 推前与特征标
    # ------------------------------------------------------------------

    def _arc_integral(self, cover: CoveringMap, arc: Tuple[float, float], f: Callable,
                      m: int, tol: float) -> float:
        """∫_arc f(x(e^{iφ})) Σ_{|γ| ≤ m-1}|γ'(e^{iφ})| dφ"""
        lo, hi = arc

        def rule(n: int) -> float:
            nodes, weights = interval_rule(lo, hi, n)
            values = cover.boundary_x(cover.boundary_arg(nodes))
            if cover.group.ell:
                jacobian = cover.group.orbit_derivatives(np.exp(1j * nodes), m - 1).sum(axis=0)
            else:
                jacobian = np.ones_like(nodes)
            return float(np.sum(weights * np.asarray(f(values), dtype=float) * jacobian))

        value, order = adaptive_integrate(rule, 16, tol, max_nodes=2 ** 9, label="boundary arc")
        logger.debug(f"Boundary arc ({lo:.4f}, {hi:.4f}) integrated with {order} nodes")
        return float(value)

    def pushforward_check(self, G: OrthocircleGroup, gs: GapSet, eq: EquilibriumData, f: Callable,
                          m: Optional[int] = None, tol: float = 1e-10) -> Dict[str, float]:
        """
        ∫_{∂𝔻} f(x(e^{iθ})) dθ/2π 与 ∫_𝔢 f dρ_𝔢 的比较

        单位圆分解为 γ(𝔽̄ ∩ ∂𝔻)（|γ| ≤ m-1）与 ℛ_m，后者的测度单独报告。

        Returns:
            {'lhs', 'rhs', 'excluded', 'm'}
        """
        cover = CoveringMap(G, gs, eq)
        m = m if m is not None else (1 if G.ell == 0 else default_word_length(G.ell))
        lhs = 0.0
        for arc in cover.upper_arcs():
            # 上下两段弧给出相同的 x
            lhs += 2.0 * self._arc_integral(cover, arc, f, m, tol)
        lhs /= 2.0 * np.pi
        rhs = 0.0
        for j, (alpha, beta) in enumerate(gs.bands):
            others = np.delete(np.asarray(gs.endpoints, dtype=float), [2 * j, 2 * j + 1])

            def rule(n: int, alpha=alpha, beta=beta, others=others) -> float:
                nodes = band_rule(alpha, beta, n)
                rest = np.abs(np.prod(nodes.x[:, None] - others[None, :], axis=1)) if len(others) else 1.0
                weight = np.abs(eq.gap_polynomial(nodes.x)) / (np.pi * np.sqrt(rest))
                return float(np.sum(nodes.weights * weight * np.asarray(f(nodes.x), dtype=float)))

            rhs += adaptive_integrate(rule, 16, tol, label=f"equilibrium integral band {j}")[0]
        excluded = self.rm_measure(G, m)
        return {'lhs': float(lhs), 'rhs': float(rhs), 'excluded': excluded, 'm': m}

    def boundary_band_masses(self, G: OrthocircleGroup, gs: GapSet, eq: EquilibriumData,
                             m: Optional[int] = None) -> np.ndarray:
        """各条带对应边界弧的测度（经推前）"""
        cover = CoveringMap(G, gs, eq)
        m = m if m is not None else (1 if G.ell == 0 else default_word_length(G.ell))
        arcs = cover.upper_arcs()
        masses = np.zeros(gs.ell + 1)
        for k, arc in enumerate(arcs):
            masses[gs.ell - k] = 2.0 * self._arc_integral(cover, arc, np.ones_like, m, 1e-10) / (2.0 * np.pi)
        return masses

    def blaschke_character(self, G: OrthocircleGroup, w: complex = 0j, L: Optional[int] = None,
                           probes: Sequence[complex] = (0.21 + 0.05j, -0.17 + 0.11j, 0.05 - 0.23j)) -> Character:
        """
        C_w(γ_j^+) = B(γ_j^+ z, w)/B(z, w)，在探针上取相位平均

        Returns:
            Character
        """
        if G.ell == 0:
            return Character(())
        evaluator = BlaschkeEvaluator(G, w, L)
        values = []
        for j in range(G.ell):
            gamma = G.generators[2 * j]
            phases = []
            for z in probes:
                base = evaluator(z)
                if abs(base) < 1e-12:
                    z = z * 1.1 + 0.01j
                    base = evaluator(z)
                ratio = evaluator(gamma(z)) / base
                phases.append(ratio / abs(ratio))
            mean = np.mean(phases)
            values.append(complex(mean / abs(mean)))
        return Character(tuple(values))


# 全局计算器实例
covering_calculator = CoveringCalculator()
enumerate_words = covering_calculator.enumerate_words
burnside_sum = covering_calculator.burnside_sum
blaschke = covering_calculator.blaschke
rm_measure = covering_calculator.rm_measure
fit_circles = covering_calculator.fit_circles
pushforward_check = covering_calculator.pushforward_check
blaschke_character = covering_calculator.blaschke_character
orbit_product_modulus = covering_calculator.orbit_product_modulus
arg_derivative_check = covering_calculator.arg_derivative_check
circle_geometry = covering_calculator.circle_geometry
boundary_band_masses = covering_calculator.boundary_band_masses


def blaschke_derivative_at_zero(G: OrthocircleGroup, L: Optional[int] = None) -> float:
    """B'(0) > 0，即 lim z x(z) 的规范化常数 C_𝔢 / B'(0) 中的分母"""
    return BlaschkeEvaluator(G, 0j, L).derivative_at_zero()


def automorphy_residual(G: OrthocircleGroup, gs: GapSet, eq: EquilibriumData,
                        probes: int = 5) -> float:
    return CoveringMap(G, gs, eq).automorphy_residual(probes)


def boundary_arcs(G: OrthocircleGroup, gs: GapSet, eq: EquilibriumData, n: int = 32) -> pd.DataFrame:
    """
    𝔽̄ ∩ ∂𝔻 上半部分各弧的 Gauss 节点与 x 的边界值

    Args:
        G: 群
        gs: 有限间隙集
        eq: 平衡数据
        n: 每段弧的节点数

    Returns:
        DataFrame（arc, band, phi, weight, x）
    """
    cover = CoveringMap(G, gs, eq)
    frames = []
    for k, (lo, hi) in enumerate(cover.upper_arcs()):
        nodes, weights = interval_rule(lo, hi, n)
        frames.append(pd.DataFrame({'arc': k, 'band': gs.ell - k, 'phi': nodes, 'weight': weights,
                                    'x': cover.boundary_x(cover.boundary_arg(nodes))}))
    return pd.concat(frames, ignore_index=True)


def cover_map(G: OrthocircleGroup, gs: GapSet, eq: EquilibriumData, z: complex,
              inverse: bool = False) -> complex:
    """
    覆盖映射：正向 z ↦ x(z)，inverse=True 时 x ↦ 𝔽̄ 中的原像

    Args:
        G: 群
        gs: 有限间隙集
        eq: 平衡数据
        z: 求值点
        inverse: 是否求逆

    Returns:
        复数
    """
    cover = CoveringMap(G, gs, eq)
    return cover.inverse(z) if inverse else cover.forward(z)
