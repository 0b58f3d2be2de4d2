"""
测试 Szegő 理论模块
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from functools import lru_cache

import numpy as np

from covering import OrthocircleGroup, fit_circles
from gapset import make_gapset, equilibrium
from jacobi import JacobiOperator, SpectralMeasure, spectral_measure
from szego import (szego_calculator, szego_class_report, jost_u0, jost_data, jost_function,
                   jost_solution, mh_representation_check, asymptotic_ratio, pn_ratio,
                   character_of_J, match_torus_character, second_solution_wronskian,
                   stripping_closure, jost_identity_check, character_distance)
from torus import TorusPoint, fit_periodic, torus_walk
from utils import DomainError, ValidationError

FREE = JacobiOperator.free()
BUMPED = FREE.with_head([2.0])
PERIOD_TWO = TorusPoint((1.5, 0.5), (0.0, 0.0))
INTERVAL = make_gapset([-2.0, 2.0])
SYMMETRIC = make_gapset([-2.0, -1.0, 1.0, 2.0])
TRIVIAL = OrthocircleGroup(())


@lru_cache(maxsize=None)
def interval_eq():
    return equilibrium(INTERVAL, 64)


@lru_cache(maxsize=None)
def symmetric_setup():
    """对称两带集合的平衡数据、拟合的群与周期二环面行走"""
    eq = equilibrium(SYMMETRIC, 64)
    G = fit_circles(SYMMETRIC, eq)
    T0 = fit_periodic(SYMMETRIC, 2, eq=eq)
    return eq, G, T0


def test_u0_values():
    """u(0;J)：自由为 √2，平衡测度为 1，a_1=2 为 √2/2"""
    print("🧪 测试 u(0;J)...")
    eq = interval_eq()
    assert abs(jost_u0(INTERVAL, eq, spectral_measure(FREE)) - np.sqrt(2.0)) < 1e-8
    assert abs(jost_u0(INTERVAL, eq, SpectralMeasure(INTERVAL, eq.density)) - 1.0) < 1e-8
    assert abs(jost_u0(INTERVAL, eq, spectral_measure(BUMPED)) - np.sqrt(2.0) / 2.0) < 1e-7

    vanishing = SpectralMeasure(INTERVAL, lambda x: np.exp(-1.0 / np.maximum(2.0 - np.abs(x), 1e-300)))
    try:
        jost_u0(INTERVAL, eq, vanishing)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error for a non-Szegő weight")
    print("✅ u(0;J) 通过")


def test_jost_function_closed_forms():
    """自由与 a_1=2 的 Jost 函数闭式"""
    print("🧪 测试 Jost 函数闭式...")
    eq = interval_eq()
    free = jost_data(FREE, INTERVAL, eq, TRIVIAL)
    bumped = jost_data(BUMPED, INTERVAL, eq, TRIVIAL)
    for z in (0.0, 0.3, 0.5j):
        expected = np.sqrt(2.0) / (1.0 - z * z)
        assert abs(jost_function(free, z) - expected) < 1e-8
        expected = np.sqrt(2.0) * (1.0 - 3.0 * z * z) / (2.0 * (1.0 - z * z))
        assert abs(jost_function(bumped, z) - expected) < 1e-7
    assert abs(free(0.0) - free.u0) < 1e-8
    print("✅ Jost 函数闭式通过")


def test_jost_solution_and_wronskian():
    """自由 Jost 解 u_{n+1}/u_n = z，差分方程残差与常数朗斯基行列式"""
    print("🧪 测试 Jost 解...")
    eq = interval_eq()
    z = 0.4
    values = [jost_solution(FREE, INTERVAL, eq, n, z, TRIVIAL) for n in range(6)]
    for n in range(5):
        assert abs(values[n + 1] / values[n] - z) < 1e-10

    report = second_solution_wronskian(FREE, INTERVAL, eq, z, N=20, G=TRIVIAL)
    assert report['recurrence_residual'] < 1e-8
    assert report['wronskian_variation'] < 1e-8
    assert abs(report['growth_rate'] - report['expected_rate']) < 1e-3

    report = second_solution_wronskian(BUMPED, INTERVAL, eq, 0.3 + 0.2j, N=12, G=TRIVIAL)
    assert report['recurrence_residual'] < 1e-7
    assert report['wronskian_variation'] < 1e-7

    try:
        jost_solution(FREE, INTERVAL, eq, -1, z, TRIVIAL)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error for a negative index")
    print("✅ Jost 解通过")


def test_jost_identity():
    """a_{n+1} M_n 的三种算法一致"""
    print("🧪 测试 Jost 恒等式...")
    eq = interval_eq()
    frame = jost_identity_check(FREE, INTERVAL, eq, 0.3 + 0.1j, n_max=2, G=TRIVIAL)
    assert len(frame) == 3
    assert (frame['residual'] < 1e-8).all()
    assert np.allclose(frame['direct'].to_numpy(), 0.3 + 0.1j, atol=1e-10)
    frame = jost_identity_check(BUMPED, INTERVAL, eq, 0.3 + 0.1j, n_max=1, G=TRIVIAL)
    assert (frame['residual'] < 1e-7).all()
    print("✅ Jost 恒等式通过")


def test_period_two_jost():
    """周期二尾部加 a_1 扰动：差分方程、朗斯基行列式、衰减率与 a_{n+1} M_n 恒等式"""
    print("🧪 测试周期二 Jost 解...")
    eq, G, _ = symmetric_setup()
    J = JacobiOperator.periodic(PERIOD_TWO).with_head([2.0])
    z = 0.3 + 0.1j
    report = second_solution_wronskian(J, SYMMETRIC, eq, z, N=20, G=G)
    assert report['recurrence_residual'] < 1e-8
    assert report['wronskian_variation'] < 1e-7
    assert abs(report['growth_rate'] / report['expected_rate'] - 1.0) < 1e-2

    frame = jost_identity_check(J, SYMMETRIC, eq, z, n_max=2, G=G)
    assert len(frame) == 3
    assert (frame['residual'] < 1e-5).all()
    print("✅ 周期二 Jost 解通过")


def test_mh_representation():
    """MH 表示：自由精确，a_1=2 含两个极点的 Blaschke 乘积"""
    print("🧪 测试 MH 表示...")
    eq = interval_eq()
    free = jost_data(FREE, INTERVAL, eq, TRIVIAL)
    DM = szego_calculator.disk_m_function(FREE, free.cover)
    assert DM.zeros == () and DM.poles == ()
    result = mh_representation_check(DM, free)
    assert result['residual'] < 1e-8
    assert abs(result['lhs'] - (0.2 + 0.1j)) < 1e-10
    # 自由情形 |M(z)| = |z|，对数矩为 (log r)^2
    profile = szego_calculator.log_moment_profile(DM, radii=(0.5, 0.9), n=64)
    assert list(profile.columns) == ['radius', 'moment']
    for r, moment in zip(profile['radius'], profile['moment']):
        assert abs(moment - np.log(r) ** 2) < 1e-8

    bumped = jost_data(BUMPED, INTERVAL, eq, TRIVIAL)
    DM = szego_calculator.disk_m_function(BUMPED, bumped.cover)
    assert len(DM.poles) == 2
    z = 0.2 + 0.1j
    result = mh_representation_check(DM, bumped, z=z)
    assert abs(result['B_inf'] - (3.0 - z * z) / (1.0 - 3.0 * z * z)) < 1e-8
    assert result['residual'] < 1e-6
    assert max(result['identity_residuals']) < 1e-7
    # 所有极点在 |·| < 0.6 内，R 继续趋于 1 时 B_∞ 不再变化
    previous = None
    for R in (0.9, 0.99, 0.999, 0.9999):
        current = mh_representation_check(DM, bumped, R=R, z=z)['B_inf']
        if previous is not None:
            assert abs(current - previous) < 1e-6
        previous = current
    assert abs(previous - result['B_inf']) < 1e-12
    print("✅ MH 表示通过")


def test_asymptotic_ratio():
    """乘积比值的极限与 u(0) 之比"""
    print("🧪 测试 Szegő 渐近...")
    result = asymptotic_ratio(BUMPED, horizon=20)
    assert abs(result['predicted'] - 2.0) < 1e-7
    assert result['deviation'] < 1e-7
    assert (result['ratio_sequence'] == 2.0).all()

    result = asymptotic_ratio(FREE, horizon=10)
    assert abs(result['predicted'] - 1.0) < 1e-8

    J = JacobiOperator.periodic(PERIOD_TWO).with_head([2.0])
    result = asymptotic_ratio(J, horizon=20)
    assert abs(result['ratio_sequence'].iloc[-1] - 4.0 / 3.0) < 1e-14
    assert abs(result['predicted'] - 4.0 / 3.0) < 1e-6

    try:
        asymptotic_ratio(BUMPED, T_inf=PERIOD_TWO)
    except ValidationError:
        pass
    else:
        raise AssertionError("expected a validation error for a mismatched tail")
    print("✅ Szegő 渐近通过")


def test_pn_ratio():
    """p_n 之比：相同算子为 1，谱外收敛，谱内不收敛"""
    print("🧪 测试 p_n 比值...")
    series = pn_ratio(FREE, FREE, 3.0, horizon=40)
    assert np.allclose(series.to_numpy(), 1.0)

    series = pn_ratio(BUMPED, FREE, 3.0, horizon=60)
    assert series.attrs['tail_variation'] < 1e-6
    assert series.attrs['n0'] == 30

    series = pn_ratio(BUMPED, FREE, 0.5, horizon=60)
    assert series.attrs['tail_variation'] > 1e-3

    # 对数尺度防止溢出
    series = pn_ratio(BUMPED, FREE, 40.0, horizon=400)
    assert np.isfinite(series.to_numpy()).all()
    print("✅ p_n 比值通过")


def test_szego_class_report():
    """Szegő 类判定"""
    print("🧪 测试 Szegő 类判定...")
    report = szego_class_report(FREE, INTERVAL, interval_eq(), horizon=20)
    assert report['is_szego'] and report['ess_spec_ok']
    assert np.allclose(report['product_ratios'], 1.0, atol=1e-10)
    assert report['eigenvalues'] == []

    report = szego_class_report(BUMPED, INTERVAL, interval_eq(), horizon=20)
    assert report['is_szego'] and len(report['eigenvalues']) == 2
    assert abs(report['product_ratio_limsup'] - 2.0) < 1e-10

    vanishing = SpectralMeasure(INTERVAL, lambda x: np.exp(-1.0 / np.maximum(2.0 - np.abs(x), 1e-300)))
    report = szego_class_report(FREE, INTERVAL, interval_eq(), measure=vanishing)
    assert report['szego_diverged'] and not report['is_szego']

    periodic = JacobiOperator.periodic(PERIOD_TWO)
    report = szego_class_report(periodic, horizon=20)
    ratios = report['product_ratios']
    assert np.allclose(ratios[2:], ratios[:-2], atol=1e-8)
    assert report['is_szego']

    reports = stripping_closure(BUMPED, INTERVAL, interval_eq(), n_max=2)
    assert [r['n'] for r in reports] == [1, 2]
    assert all(r['is_szego'] for r in reports)
    print("✅ Szegő 类判定通过")


def test_characters():
    """特征标：ℓ=0 平凡；换探针稳定；剥离恒等式；沿行走单调；匹配"""
    print("🧪 测试特征标...")
    eq = interval_eq()
    assert character_of_J(jost_data(BUMPED, INTERVAL, eq, TRIVIAL)).values == ()

    eq, G, T0 = symmetric_setup()
    J = JacobiOperator.periodic(T0).with_head([1.2])
    JD = jost_data(J, SYMMETRIC, eq, G)
    base = character_of_J(JD)
    assert base.max_modulus_error() < 1e-10
    other = character_of_J(JD, probes=(0.05 + 0.02j, -0.12 - 0.07j))
    assert character_distance(base, other) < 1e-6

    checks = szego_calculator.stripping_character_check(J, SYMMETRIC, eq, (1, 2), G=G)
    assert all(value < 1e-5 for value in checks.values())

    walk = torus_walk(T0, 8)
    characters = szego_calculator.walk_characters(walk, G, SYMMETRIC, eq)
    phases = np.unwrap([np.angle(c.values[0]) for c in characters])
    steps = np.diff(phases)
    assert (steps > 0).all() or (steps < 0).all()

    assert match_torus_character(characters[3], walk, G, SYMMETRIC, eq) == walk[3]

    tail = walk[5]
    head = JacobiOperator.periodic(tail).with_head([1.3 * tail.a[0]])
    C = character_of_J(jost_data(head, SYMMETRIC, eq, G))
    matched = match_torus_character(C, walk, G, SYMMETRIC, eq)
    assert np.allclose(matched.params, tail.params, atol=1e-3)
    print("✅ 特征标通过")


def main():
    """运行所有测试"""
    print("🚀 开始测试 Szegő 理论模块...")
    print("=" * 50)
    tests = [test_u0_values, test_jost_function_closed_forms, test_jost_solution_and_wronskian,
             test_period_two_jost,
             test_jost_identity, test_mh_representation, test_asymptotic_ratio, test_pn_ratio,
             test_szego_class_report, test_characters]
    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except AssertionError as e:
            print(f"❌ {test.__name__} 失败: {e}")
    print("=" * 50)
    print(f"📊 测试结果: {passed}/{len(tests)} 通过")
    return passed == len(tests)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
