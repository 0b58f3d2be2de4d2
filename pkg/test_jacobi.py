"""
测试 Jacobi 矩阵模块
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from gapset import make_gapset, equilibrium
from jacobi import (JacobiOperator, SpectralMeasure, orthonormal_eval, truncated_spectrum,
                    m_value, strip, operator_m_function, measure_m_function, herglotz_check,
                    eigenvalues_outside, spectral_measure, condition_report)
from torus import TorusPoint, torus_walk
from utils import DomainError, ValidationError

FREE = JacobiOperator.free()
BUMPED = FREE.with_head([2.0])
PERIOD_TWO = TorusPoint((1.5, 0.5), (0.0, 0.0))


def test_operator_accessors():
    """头部覆盖、剥离与校验"""
    print("🧪 测试算子访问...")
    J = JacobiOperator.periodic(PERIOD_TWO).with_head([2.0, 0.7], [0.3])
    assert J.a(1) == 2.0 and J.a(2) == 0.7 and J.a(3) == 1.5 and J.a(4) == 0.5
    assert J.b(1) == 0.3 and J.b(2) == 0.0
    assert J.head_length == 2
    stripped = J.strip(1)
    assert stripped.a(1) == 0.7 and stripped.a(2) == 1.5 and stripped.b(1) == 0.0
    assert J.strip(3).head_length == 0 and J.strip(3).a(1) == 0.5
    try:
        FREE.with_head([1.0, -0.5])
    except ValidationError as e:
        assert e.index == 2
    else:
        raise AssertionError("expected a validation error")
    print("✅ 算子访问通过")


def test_orthonormal_eval():
    """正交多项式递推"""
    print("🧪 测试正交多项式...")
    assert orthonormal_eval(FREE, 2, 0.0) == -1.0
    assert orthonormal_eval(BUMPED, 0, 0.7 + 0.2j) == 1.0
    assert [orthonormal_eval(FREE, n, 2.0) for n in range(4)] == [1.0, 2.0, 3.0, 4.0]
    try:
        orthonormal_eval(FREE, -1, 0.0)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error")
    print("✅ 正交多项式通过")


def test_truncated_spectrum():
    """截断谱：Chebyshev 节点、标量情形、反正弦律、权重和"""
    print("🧪 测试截断谱...")
    frame = truncated_spectrum(FREE, 3)
    assert np.allclose(frame['eigenvalue'], [-np.sqrt(2.0), 0.0, np.sqrt(2.0)], atol=1e-13)
    frame = truncated_spectrum(BUMPED.with_head([2.0], [0.4]), 1)
    assert frame['eigenvalue'].tolist() == [0.4] and frame['weight'].tolist() == [1.0]

    N = 200
    frame = truncated_spectrum(FREE, N)
    assert abs(frame['weight'].sum() - 1.0) < 1e-12
    eq = equilibrium(make_gapset([-2.0, 2.0]), 64)
    values = np.sort(frame['eigenvalue'].to_numpy())
    sup = max(max(abs(k / N - eq.cdf(v)), abs((k - 1) / N - eq.cdf(v)))
              for k, v in enumerate(values, start=1))
    assert sup < 1e-2
    print("✅ 截断谱通过")


def test_gauss_exactness():
    """N=5 的截断对 9 次以内多项式精确"""
    print("🧪 测试 Gauss 求积精确性...")
    J = FREE.with_head([2.0, 0.7], [0.3, -0.1])
    frame = truncated_spectrum(J, 5)
    big = J.truncation(30)
    power = np.eye(30)
    for degree in range(9):
        moment = power[0, 0]
        quadrature = float(np.sum(frame['weight'] * frame['eigenvalue'] ** degree))
        assert abs(quadrature - moment) < 1e-10 * max(1.0, abs(moment))
        power = power @ big
    assert (frame['weight'] > 0).all()
    print("✅ Gauss 求积精确性通过")


def test_m_value_examples():
    """m 函数的三个例子与谱内的域错误"""
    print("🧪 测试 m 函数求值...")
    point_mass = measure_m_function(SpectralMeasure(None, None, ((0.0, 1.0),)))
    assert abs(m_value(point_mass, 2.0) - (-0.5)) < 1e-15
    assert abs(m_value(operator_m_function(FREE), 2.5) - (-0.5)) < 1e-14
    assert abs(m_value(operator_m_function(BUMPED), 2.5) - (-2.0)) < 1e-12
    try:
        m_value(operator_m_function(FREE), 0.5)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error inside the spectrum")
    print("✅ m 函数求值通过")


def test_strip():
    """剥离：自由自相似、反向一步、正反互逆"""
    print("🧪 测试系数剥离...")
    free_m = operator_m_function(FREE)
    stripped = strip(free_m, 1.0, 0.0, 'forward')
    assert abs(m_value(stripped, 2.5) - m_value(free_m, 2.5)) < 1e-14
    assert abs(1.0 / m_value(free_m, 2.5) - (-2.0)) < 1e-14

    reverse = strip(free_m, 2.0, 0.0, 'reverse')
    assert abs(m_value(reverse, 2.5) - (-2.0)) < 1e-12

    rng = np.random.default_rng(7)
    roundtrip = strip(strip(free_m, 1.3, -0.4, 'reverse'), 1.3, -0.4, 'forward')
    for x in rng.normal(size=5) + 1j * rng.uniform(0.1, 2.0, 5):
        assert abs(m_value(roundtrip, x) - m_value(free_m, x)) < 1e-12
    try:
        strip(free_m, 0.0, 0.0)
    except ValidationError:
        pass
    else:
        raise AssertionError("expected a validation error")
    print("✅ 系数剥离通过")


def test_herglotz_and_consistency():
    """Herglotz 性质；反向剥离与截断求积一致；测度积分与闭式一致"""
    print("🧪 测试 Herglotz 与一致性...")
    J = JacobiOperator.periodic(PERIOD_TWO).with_head([2.0, 0.8], [0.3])
    M = operator_m_function(J)
    assert herglotz_check(M)['passed']
    assert herglotz_check(operator_m_function(FREE))['passed']

    frame = truncated_spectrum(J, 400)
    for x in (0.3 + 0.5j, -1.7 + 0.8j, 2.5 + 0.5j):
        quadrature = np.sum(frame['weight'] / (frame['eigenvalue'] - x))
        assert abs(quadrature - m_value(M, x)) < 1e-6

    mu = spectral_measure(BUMPED)
    assert abs(mu.total_mass() - 1.0) < 1e-8
    from_measure = measure_m_function(mu)
    for x in (0.4 + 0.6j, 3.0):
        assert abs(m_value(from_measure, x) - m_value(operator_m_function(BUMPED), x)) < 1e-8
    print("✅ Herglotz 与一致性通过")


def test_eigenvalues_outside():
    """𝔢 外的特征值：自由、a_1=2、周期二的两个环面点"""
    print("🧪 测试 𝔢 外特征值...")
    assert eigenvalues_outside(FREE) == []
    values = eigenvalues_outside(BUMPED)
    assert np.allclose(values, [-4.0 / np.sqrt(3.0), 4.0 / np.sqrt(3.0)], atol=1e-8)
    values = eigenvalues_outside(BUMPED, size=101)
    assert np.allclose(values, [-4.0 / np.sqrt(3.0), 4.0 / np.sqrt(3.0)], atol=1e-8)
    assert eigenvalues_outside(JacobiOperator.periodic(PERIOD_TWO)) == []
    values = eigenvalues_outside(JacobiOperator.periodic(PERIOD_TWO.shift(1)))
    assert len(values) == 1 and abs(values[0]) < 1e-8
    print("✅ 𝔢 外特征值通过")


def test_spectral_measure_point_weights():
    """a_1=2 的点质量：对称且与截断权重一致"""
    print("🧪 测试点质量...")
    mu = spectral_measure(BUMPED)
    assert len(mu.points) == 2
    (E1, w1), (E2, w2) = mu.points
    assert abs(w1 - w2) < 1e-8 and w1 > 0
    frame = truncated_spectrum(BUMPED, 200)
    top = frame.iloc[frame['eigenvalue'].idxmax()]
    assert abs(top['eigenvalue'] - E2) < 1e-10
    assert abs(top['weight'] - w2) < 1e-7
    print("✅ 点质量通过")


def test_condition_report():
    """条件报告：自距离为零、单覆盖、d_1 与空采样"""
    print("🧪 测试条件报告...")
    report = condition_report(FREE, horizon=20)
    assert report['free_sum'] == 0 and report['deviation_sum'] == 0 and report['dm_square_sum'] == 0

    report = condition_report(BUMPED, TorusPoint.free(), horizon=20)
    assert abs(report['deviation_sum'] - 1.0) < 1e-15
    assert abs(report['free_sum'] - 1.0) < 1e-15
    assert abs(report['d_1'] - 1.0) < 1e-15
    assert len(report['profile']) == 20

    walk = torus_walk(PERIOD_TWO, 12)
    J = JacobiOperator.periodic(walk[5])
    report = condition_report(J, walk[0], horizon=6, torus_sample=walk)
    assert report['dm_square_sum'] < 1e-16
    assert report['deviation_sum'] > 0

    try:
        condition_report(FREE, horizon=5, torus_sample=[])
    except ValidationError:
        pass
    else:
        raise AssertionError("expected a validation error for an empty sample")
    print("✅ 条件报告通过")


def main():
    """运行所有测试"""
    print("🚀 开始测试 Jacobi 矩阵模块...")
    print("=" * 50)
    tests = [test_operator_accessors, test_orthonormal_eval, test_truncated_spectrum,
             test_gauss_exactness, test_m_value_examples, test_strip,
             test_herglotz_and_consistency, test_eigenvalues_outside,
             test_spectral_measure_point_weights, test_condition_report]
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
