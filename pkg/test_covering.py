"""
测试覆盖映射模块
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from functools import lru_cache

import numpy as np

from gapset import make_gapset, equilibrium
from covering import (MobiusMap, OrthocircleGroup, CoveringMap, blaschke_factor, enumerate_words,
                      burnside_sum, blaschke, rm_measure, fit_circles, cover_map, pushforward_check,
                      blaschke_character, orbit_product_modulus, arg_derivative_check,
                      circle_geometry, boundary_band_masses, automorphy_residual,
                      blaschke_derivative_at_zero, first_overlap, BlaschkeEvaluator)
from utils import DomainError, GeometryError, WordLimitError

FREE = make_gapset([-2.0, 2.0])
SYMMETRIC = make_gapset([-2.0, -1.0, 1.0, 2.0])
TRIVIAL = OrthocircleGroup(())
ONE_CIRCLE = OrthocircleGroup(((np.pi / 3.0, 2.0 * np.pi / 3.0),))
TWO_CIRCLES = OrthocircleGroup(((0.4, 0.8), (1.6, 2.2)))


@lru_cache(maxsize=None)
def symmetric_fit():
    """对称两带集合的拟合群（各测试共用）"""
    eq = equilibrium(SYMMETRIC, 64)
    return fit_circles(SYMMETRIC, eq), eq


def test_mobius_maps():
    """复合、求逆、导数与圆盘保持"""
    print("🧪 测试 Möbius 映射...")
    for g in TWO_CIRCLES.generators:
        assert abs(g.determinant - 1.0) < 1e-12
        assert g.preserves_disk()
        product = g.compose(g.inverse())
        assert abs(product(0.3 + 0.1j) - (0.3 + 0.1j)) < 1e-13
    g = TWO_CIRCLES.generators[0]
    h = 1e-6
    z = 0.2 - 0.3j
    numeric = (g(z + h) - g(z - h)) / (2.0 * h)
    assert abs(numeric - g.derivative(z)) < 1e-8
    # γ^+ 把 C^- 映成 C^+，即 ζ ↦ ζ̄
    center, radius = TWO_CIRCLES.circles[0]
    zeta = np.conj(center) + radius * np.exp(1j * 2.0)
    assert abs(g(zeta) - np.conj(zeta)) < 1e-12
    print("✅ Möbius 映射通过")


def test_word_counts():
    """各长度的既约字个数"""
    print("🧪 测试字枚举...")
    lengths = TWO_CIRCLES.word_lengths(3)
    assert int(np.sum(lengths == 3)) == 36
    assert len(enumerate_words(TWO_CIRCLES, 3)) == 1 + 4 + 12 + 36
    lengths = ONE_CIRCLE.word_lengths(6)
    assert all(int(np.sum(lengths == k)) == 2 for k in range(1, 7))
    words = enumerate_words(TRIVIAL, 4)
    assert len(words) == 1 and words[0][0] == ()
    labels = [w for w, _ in enumerate_words(TWO_CIRCLES, 3)]
    assert all(w[i + 1] != w[i] ^ 1 for w in labels for i in range(len(w) - 1))
    try:
        OrthocircleGroup(TWO_CIRCLES.angles, word_cap=50).words(3)
    except WordLimitError:
        pass
    else:
        raise AssertionError("expected the word cap to trigger")
    try:
        OrthocircleGroup(((0.4, 1.0), (0.9, 2.0)))
    except GeometryError:
        pass
    else:
        raise AssertionError("expected intersecting circles to be rejected")
    print("✅ 字枚举通过")


def test_reduce_and_geometry():
    """约化到基本域；各层像圆"""
    print("🧪 测试约化与像圆...")
    zf = 0.1 + 0.2j
    assert TWO_CIRCLES.in_fundamental(zf)
    word = (0, 2, 1)
    gamma = MobiusMap.identity()
    for g in word:
        gamma = gamma.compose(TWO_CIRCLES.generators[g])
    point, found = TWO_CIRCLES.reduce_to_fundamental(gamma(zf))
    # γ(zf) 的舍入误差经 γ^{-1} 放大，|(γ^{-1})'| ≤ (|a| + |b|)²，每步再引入 O(eps)
    bound = 16 * (len(word) + 1) * np.finfo(float).eps * (abs(gamma.a) + abs(gamma.b)) ** 2
    assert found == word and abs(point - zf) < bound

    frame = circle_geometry(TWO_CIRCLES, level=2)
    assert len(frame) == 4 + 12
    level_one = frame[frame['level'] == 1]
    for _, row in level_one.iterrows():
        center = complex(row['center_re'], row['center_im'])
        # 正交圆：|c|² = 1 + r²
        assert abs(abs(center) ** 2 - 1.0 - row['radius'] ** 2) < 1e-10
    level_two = frame[frame['level'] == 2]
    for _, row in level_two.iterrows():
        center = complex(row['center_re'], row['center_im'])
        assert abs(abs(center) ** 2 - 1.0 - row['radius'] ** 2) < 1e-8
    print("✅ 约化与像圆通过")


def test_blaschke_basics():
    """b(z, w) 的代数性质、ℓ=0 的 B(z) = z、截断单调"""
    print("🧪 测试 Blaschke 乘积...")
    assert abs(blaschke_factor(0.5, 0.5)) == 0.0
    assert blaschke_factor(0.3 + 0.1j, 0) == 0.3 + 0.1j
    for theta in np.linspace(0.0, 6.0, 7):
        assert abs(abs(blaschke_factor(np.exp(1j * theta), 0.4 - 0.3j)) - 1.0) < 1e-14
    assert abs(blaschke(TRIVIAL, 0.5).value - 0.5) < 1e-15

    z = 0.35 + 0.2j
    moduli = [abs(blaschke(TWO_CIRCLES, z, L=L, tolerance=1.0).value) for L in range(1, 5)]
    assert all(b < a for a, b in zip(moduli, moduli[1:]))
    orbit_point = TWO_CIRCLES.generators[1](0.0)
    assert blaschke(TWO_CIRCLES, orbit_point, L=3, tolerance=1.0).value == 0
    assert blaschke_derivative_at_zero(ONE_CIRCLE) > 0

    for z in (0.2 + 0.1j, -0.4 + 0.3j, 0.05 - 0.6j):
        direct = orbit_product_modulus(ONE_CIRCLE, z, L=6)
        assert abs(direct - abs(blaschke(ONE_CIRCLE, z, L=6, tolerance=1.0).value)) < 1e-12
    print("✅ Blaschke 乘积通过")


def test_burnside_sum():
    """Burnside 和：恒等情形与几何衰减"""
    print("🧪 测试 Burnside 和...")
    frame = burnside_sum(TRIVIAL, 0.3j, t=0.5, L=5)
    assert len(frame) == 1 and abs(frame['partial_sum'].iloc[-1] - 1.0) < 1e-15

    frame = burnside_sum(ONE_CIRCLE, 0j, t=1.0, L=10)
    increments = frame['increment'].to_numpy()[1:]
    assert (increments > 0).all()
    ratios = increments[4:] / increments[3:-1]
    assert (ratios < 1.0).all()
    assert 0 < frame.attrs['decay_rate'] < 1.0
    assert (frame['orbit_increment'].to_numpy()[1:] > 0).all()
    try:
        burnside_sum(ONE_CIRCLE, 1.2)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error outside the disk")
    print("✅ Burnside 和通过")


def test_rm_measure():
    """ℛ_m 的测度：ℓ=0 为零，单调且对数线性衰减"""
    print("🧪 测试 ℛ_m 测度...")
    assert rm_measure(TRIVIAL, 3) == 0.0
    assert abs(rm_measure(ONE_CIRCLE, 1) - 1.0 / 3.0) < 1e-14
    values = np.array([rm_measure(ONE_CIRCLE, m) for m in range(1, 9)])
    assert (np.diff(values) < 0).all()
    m = np.arange(1, 9)
    slope, intercept = np.polyfit(m, np.log(values), 1)
    fitted = slope * m + intercept
    r_squared = 1.0 - np.sum((np.log(values) - fitted) ** 2) / np.sum((np.log(values) - np.log(values).mean()) ** 2)
    assert slope < 0 and r_squared > 0.99
    # 越过 2π 的最后一段与第一段比较
    assert first_overlap([(0.5, 0.2), (3.0, 1.0), (6.0, 0.2)]) is None
    assert abs(first_overlap([(0.1, 0.2), (3.0, 1.0), (6.0, 0.5)]) - 0.1) < 1e-15
    assert abs(first_overlap([(0.1, 0.5), (0.4, 0.1)]) - 0.4) < 1e-15
    try:
        rm_measure(ONE_CIRCLE, 0)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error for m = 0")
    print("✅ ℛ_m 测度通过")


def test_joukowski_case():
    """ℓ=0：x(z) = z + 1/z"""
    print("🧪 测试 Joukowski 情形...")
    eq = equilibrium(FREE, 64)
    assert abs(cover_map(TRIVIAL, FREE, eq, 0.5) - 2.5) < 1e-14
    assert abs(cover_map(TRIVIAL, FREE, eq, 2.5, inverse=True) - 0.5) < 1e-14
    assert abs(abs(blaschke(TRIVIAL, 0.5).value) - np.exp(-eq.green_real(2.5))) < 1e-12
    cover = CoveringMap(TRIVIAL, FREE, eq)
    assert abs(cover.derivative(0.5) - (-3.0)) < 1e-12
    assert abs(cover.boundary_value(np.pi / 3.0) - 1.0) < 1e-10
    try:
        cover_map(TRIVIAL, FREE, eq, 1.0, inverse=True)
    except DomainError:
        pass
    else:
        raise AssertionError("expected a domain error inside the set")
    print("✅ Joukowski 情形通过")


def test_fit_symmetric():
    """对称集合的拟合：关于 π/2 对称、自同构、局部可辨识"""
    print("🧪 测试正交圆拟合...")
    G, eq = symmetric_fit()
    (t1, t2), = G.angles
    assert abs(t1 + t2 - np.pi) < 1e-6
    residual = automorphy_residual(G, SYMMETRIC, eq)
    assert residual < 1e-8
    perturbed = OrthocircleGroup(((t1 + 1e-3, t2 + 1e-3),))
    assert automorphy_residual(perturbed, SYMMETRIC, eq) >= 10.0 * max(residual, 1e-14)
    # 偏离较大的圆：下半平面无解时残差为 inf，而不是抛出异常
    shrunk = OrthocircleGroup(((t1 + 0.05, t2 - 0.05),))
    assert automorphy_residual(shrunk, SYMMETRIC, eq) > 1e-6
    masses = boundary_band_masses(G, SYMMETRIC, eq)
    assert np.allclose(masses, eq.band_masses, atol=1e-4)
    print("✅ 正交圆拟合通过")


def test_cover_map_symmetric():
    """拟合群上的覆盖映射：往返、|B| 与 Green 函数、局部单叶、自同构"""
    print("🧪 测试覆盖映射...")
    G, eq = symmetric_fit()
    cover = CoveringMap(G, SYMMETRIC, eq)
    points = [0.3 - 0.5j, -0.3 - 0.5j, 1.5 + 0.2j, -1.5 - 0.01j, 3.0 + 1.0j, -2.5 + 0.1j,
              0.1 - 2.0j, 1.2 - 0.05j, -1.8 + 0.3j, 2.2 - 0.001j, 5.0 - 3.0j, -4.0 + 0.5j,
              0.7j, 1.0 - 1.0j, 2.5, -2.5, 3.5, 0.5, -0.7, 0.9]
    for x in points:
        z = cover.inverse(x)
        assert G.in_fundamental(z)
        assert abs(cover.forward(z) - x) < 1e-8 * max(1.0, abs(x))

    rng = np.random.default_rng(3)
    for z in 0.8 * np.sqrt(rng.uniform(0.01, 1.0, 10)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 10)):
        x = cover.forward(z)
        assert abs(np.log(abs(cover.blaschke(z))) + eq.green_real(x)) < 1e-6
        assert abs(cover.derivative(z)) > 0
        for g in G.generators:
            assert abs(cover.forward(g(z)) - x) < 1e-6 * max(1.0, abs(x))
    print("✅ 覆盖映射通过")


def test_blaschke_green_by_length():
    """|B| 与 exp(-G(x)) 的最大误差随字长 6→10 单调下降"""
    print("🧪 测试字长截断误差...")
    G, eq = symmetric_fit()
    cover = CoveringMap(G, SYMMETRIC, eq, 10)
    rng = np.random.default_rng(11)
    points = 0.8 * np.sqrt(rng.uniform(0.01, 1.0, 8)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    xs = [cover.forward(z) for z in points]
    errors = []
    for length in range(6, 11):
        shorter = CoveringMap(G, SYMMETRIC, eq, length) if length != 10 else cover
        errors.append(max(abs(abs(shorter.blaschke(z)) - np.exp(-eq.green_real(x)))
                          for z, x in zip(points, xs)))
    # 到达 Newton 精度后不再要求严格下降
    for previous, current in zip(errors, errors[1:]):
        assert current <= previous or current < 1e-10, errors
    assert errors[-1] < 1e-4
    print("✅ 字长截断误差通过")


def test_pushforward():
    """推前恒等式：归一化、ℓ=0 的二阶矩、对称集合的一阶矩"""
    print("🧪 测试推前恒等式...")
    eq = equilibrium(FREE, 64)
    result = pushforward_check(TRIVIAL, FREE, eq, np.ones_like)
    assert abs(result['lhs'] - 1.0) < 1e-10 and abs(result['rhs'] - 1.0) < 1e-10
    result = pushforward_check(TRIVIAL, FREE, eq, lambda x: x ** 2)
    assert abs(result['lhs'] - 2.0) < 1e-9 and abs(result['rhs'] - 2.0) < 1e-9
    assert result['excluded'] == 0.0

    G, eq = symmetric_fit()
    result = pushforward_check(G, SYMMETRIC, eq, np.ones_like)
    assert abs(result['lhs'] - 1.0) < 1e-6 and abs(result['rhs'] - 1.0) < 1e-10
    assert 0 < result['excluded'] < 1e-6
    assert abs(result['lhs'] + result['excluded'] - 1.0) < 1e-6
    result = pushforward_check(G, SYMMETRIC, eq, lambda x: x)
    assert abs(result['lhs']) < 1e-6 and abs(result['rhs']) < 1e-10
    print("✅ 推前恒等式通过")


def test_boundary_derivative():
    """边界弧上 d arg B/dθ 为正且等于 Σ|γ'|"""
    print("🧪 测试边界辐角导数...")
    for phi in (0.3, 1.5, 2.8):
        check = arg_derivative_check(ONE_CIRCLE, phi, L=6)
        assert check['positive']
        assert abs(check['arg_derivative'] - check['derivative_sum']) < 1e-5 * check['derivative_sum']
    print("✅ 边界辐角导数通过")


def test_characters():
    """特征标：单位模、恒等字、截断加细下稳定、B 的自同构因子"""
    print("🧪 测试特征标...")
    assert blaschke_character(TRIVIAL).values == ()
    G, _ = symmetric_fit()
    C = blaschke_character(G, 0.2 + 0.1j)
    rng = np.random.default_rng(11)
    for _ in range(10):
        word = tuple(int(g) for g in rng.integers(0, 2, size=4))
        assert abs(abs(C(word)) - 1.0) < 1e-8
        other = tuple(int(g) for g in rng.integers(0, 2, size=3))
        assert abs(C(word + other) - C(word) * C(other)) < 1e-12
    assert abs(C((0, 1)) - 1.0) < 1e-14

    coarse = blaschke_character(G, 0j, L=8)
    fine = blaschke_character(G, 0j, L=10)
    assert abs(coarse.values[0] - fine.values[0]) < 1e-6
    evaluator = BlaschkeEvaluator(G, 0j, 10)
    z = -0.1 + 0.35j
    ratio = evaluator(G.generators[0](z)) / evaluator(z)
    assert abs(ratio - fine.values[0]) < 1e-6
    print("✅ 特征标通过")


def main():
    """运行所有测试"""
    print("🚀 开始测试覆盖映射模块...")
    print("=" * 50)
    tests = [test_mobius_maps, test_word_counts, test_reduce_and_geometry, test_blaschke_basics,
             test_burnside_sum, test_rm_measure, test_joukowski_case, test_fit_symmetric,
             test_cover_map_symmetric, test_blaschke_green_by_length, test_pushforward,
             test_boundary_derivative, test_characters]
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
