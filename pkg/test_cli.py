"""
测试配置、报告与命令行
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import json
import tempfile

from cli import EXIT_CONFIG, EXIT_OK, EXIT_THEOREM, main as cli_main
from experiment_config import ExperimentConfig, load_config
from utils import ConfigError

HERE = os.path.dirname(os.path.abspath(__file__))


def write_config(directory: str, data: dict, name: str = 'config.json') -> str:
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle)
    return path


def read_report(directory: str, name: str) -> dict:
    with open(os.path.join(directory, f"{name}_report.json"), encoding='utf-8') as handle:
        return json.load(handle)


def test_config_roundtrip():
    """配置往返不变；哈希与输出目录无关"""
    print("🧪 测试配置往返...")
    config = load_config(os.path.join(HERE, 'configs', 'sumrule_period_two.json'))
    again = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again == config
    assert again.config_hash() == config.config_hash()
    moved = ExperimentConfig.from_dict({**config.to_dict(), 'output_dir': '/tmp/elsewhere'})
    assert moved.config_hash() == config.config_hash()
    changed = ExperimentConfig.from_dict({**config.to_dict(), 'name': 'other'})
    assert changed.config_hash() != config.config_hash()
    assert config.tolerance('mh_representation') == 1e-5
    assert config.tolerance('sum_rule') == 1e-6
    print("✅ 配置往返通过")


def test_config_validation():
    """非法配置：端点、类型、未知字段、取值范围"""
    print("🧪 测试配置校验...")
    bad = [
        {'kind': 'equilibrium', 'endpoints': [2.0, -2.0]},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 0.0, 2.0]},
        {'kind': 'nonsense', 'endpoints': [-2.0, 2.0]},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'colour': 'blue'},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'numerics': {'quad_order': 2}},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'numerics': {'quad_order': 8}},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'operator': {'head_a': [1.0, -1.0]}},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'operator': {'tail': 'periodic'}},
        {'kind': 'equilibrium', 'endpoints': [-2.0, 2.0], 'tolerances': {'sum_rule': 0.0}},
        {'kind': 'sum_rule', 'endpoints': [-2.0, 2.0], 'operator': {'head_a': [2.0] * 5},
         'numerics': {'horizon': 5}},
        {'endpoints': [-2.0, 2.0]},
    ]
    for data in bad:
        try:
            ExperimentConfig.from_dict(data)
        except ConfigError:
            continue
        raise AssertionError(f"expected a config error for {data}")
    try:
        ExperimentConfig.from_dict({'kind': 'equilibrium', 'endpoints': [-2.0, 0.0, 1.0, 0.5]})
    except ConfigError as e:
        assert e.index == 3
    else:
        raise AssertionError("expected a config error")
    print("✅ 配置校验通过")


def test_malformed_config_exit():
    """非法端点：退出码 2 且不写报告"""
    print("🧪 测试配置错误退出码...")
    with tempfile.TemporaryDirectory() as tmp:
        path = write_config(tmp, {'name': 'broken', 'kind': 'equilibrium', 'endpoints': [1.0, 0.0]})
        out = os.path.join(tmp, 'out')
        assert cli_main(['equilibrium', '--config', path, '--output-dir', out]) == EXIT_CONFIG
        assert not os.path.exists(out)

        path = write_config(tmp, {'name': 'mismatch', 'kind': 'equilibrium', 'endpoints': [-2.0, 2.0]})
        assert cli_main(['sumrule', '--config', path, '--output-dir', out]) == EXIT_CONFIG
        assert cli_main(['equilibrium', '--config', os.path.join(tmp, 'missing.json')]) == EXIT_CONFIG

        with open(os.path.join(tmp, 'garbage.json'), 'w') as handle:
            handle.write("{not json")
        assert cli_main(['equilibrium', '--config', os.path.join(tmp, 'garbage.json')]) == EXIT_CONFIG
    print("✅ 配置错误退出码通过")


def test_equilibrium_run():
    """[-2,2] 的平衡实验：容量 1，报告含哈希与容差，CSV 可复现"""
    print("🧪 测试平衡实验...")
    with tempfile.TemporaryDirectory() as tmp:
        config = os.path.join(HERE, 'configs', 'equilibrium_interval.json')
        first, second = os.path.join(tmp, 'a'), os.path.join(tmp, 'b')
        assert cli_main(['equilibrium', '--config', config, '--output-dir', first]) == EXIT_OK
        assert cli_main(['equilibrium', '--config', config, '--output-dir', second]) == EXIT_OK

        report = read_report(first, 'equilibrium_interval')
        assert report['status'] == 'passed' and report['exit_code'] == 0
        assert abs(report['results']['capacity'] - 1.0) < 1e-10
        assert report['config_hash'] == load_config(config).config_hash()
        assert report['tolerances']['capacity'] == 1e-10
        assert all(check['passed'] for check in report['checks'])

        for table in ('density', 'green'):
            name = f"equilibrium_interval_{table}.csv"
            with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                assert a.read() == b.read()
    print("✅ 平衡实验通过")


def test_sum_rule_run():
    """a_1=2 的求和规则：比值 2 对预测值 2"""
    print("🧪 测试求和规则实验...")
    with tempfile.TemporaryDirectory() as tmp:
        config = os.path.join(HERE, 'configs', 'sumrule_bumped.json')
        assert cli_main(['sumrule', '--config', config, '--output-dir', tmp]) == EXIT_OK
        report = read_report(tmp, 'sumrule_bumped')
        assert abs(report['results']['predicted'] - 2.0) < 1e-6
        checks = {c['check']: c for c in report['checks']}
        assert checks['sum_rule']['passed'] and checks['jost_recurrence']['passed']
        assert os.path.exists(os.path.join(tmp, 'sumrule_bumped_ratio_sequence.csv'))
    print("✅ 求和规则实验通过")


def test_theorem_failure_exit():
    """过严的容差：定理检查失败，退出码 4，仍写出报告"""
    print("🧪 测试定理检查失败退出码...")
    with tempfile.TemporaryDirectory() as tmp:
        path = write_config(tmp, {
            'name': 'strict', 'kind': 'asymptotics', 'endpoints': [-2.0, 2.0],
            'operator': {'head_a': [2.0]}, 'numerics': {'horizon': 30},
            'tolerances': {'sum_rule': 1e-300},
        })
        out = os.path.join(tmp, 'out')
        assert cli_main(['asymptotics', '--config', path, '--output-dir', out]) == EXIT_THEOREM
        report = read_report(out, 'strict')
        assert report['status'] == 'theorem_failure'
        assert any(not c['passed'] for c in report['checks'])
    print("✅ 定理检查失败退出码通过")


def test_info_and_batch():
    """info 不写文件；batch 返回最差退出码"""
    print("🧪 测试 info 与 batch...")
    assert cli_main(['info', '--endpoints', '-2', '-1', '1', '2']) == EXIT_OK
    assert cli_main(['info', '--endpoints', '2', '1']) == EXIT_CONFIG
    with tempfile.TemporaryDirectory() as tmp:
        broken = write_config(tmp, {'kind': 'equilibrium', 'endpoints': [0.0]}, 'broken.json')
        good = os.path.join(HERE, 'configs', 'equilibrium_interval.json')
        assert cli_main(['batch', good, '--output-dir', tmp]) == EXIT_OK
        assert cli_main(['batch', good, broken, '--output-dir', tmp]) == EXIT_CONFIG
    print("✅ info 与 batch 通过")


def main():
    """运行所有测试"""
    print("🚀 开始测试命令行...")
    print("=" * 50)
    tests = [test_config_roundtrip, test_config_validation, test_malformed_config_exit,
             test_equilibrium_run, test_sum_rule_run, test_theorem_failure_exit, test_info_and_batch]
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
