"""
命令行入口
按配置构造间隙集与算子，运行各实验流程，写出 JSON 报告与 CSV 数据表
"""

import argparse
import os
import sys
import time
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from covering import (CoveringMap, OrthocircleGroup, automorphy_residual, boundary_arcs, burnside_sum,
                      circle_geometry, default_word_length, pushforward_check, rm_measure)
from experiment_config import SUBCOMMANDS, ExperimentConfig, load_config
from gapset import GapSet, equilibrium, make_gapset, szego_integral
from jacobi import JacobiOperator, condition_report, eigenvalues_outside, spectral_measure
from report_writer import ReportWriter, build_report
from szego import (asymptotic_ratio, character_distance, character_of_J, jost_data,
                   jost_identity_check, match_torus_character, mh_representation_check, pn_ratio,
                   second_solution_wronskian, stripping_closure, szego_calculator, szego_class_report)
from torus import TorusPoint, fit_periodic, torus_walk
from utils import (ConfigError, ConvergenceError, DomainError, FiniteGapError, PoleError,
                   create_check, describe_error, format_number, logger, retry_numerical,
                   set_log_level)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCURACY = 3
EXIT_THEOREM = 4


def flag_check(name: str, passed: bool, category: str = 'theorem') -> Dict[str, Any]:
    """布尔型检查记录"""
    return {'check': name, 'value': bool(passed), 'reference': True, 'error': 0.0 if passed else 1.0,
            'tolerance': 0.0, 'passed': bool(passed), 'category': category}


class ExperimentRunner:
    """单个实验：构造对象、运行、收集结果与检查"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.results: Dict[str, Any] = {}
        self.checks: List[Dict[str, Any]] = []
        self.tables: Dict[str, pd.DataFrame] = {}
        self.rng = np.random.default_rng(config.numerics.seed)
        self._gs: Optional[GapSet] = None
        self._eq = None
        self._group: Optional[OrthocircleGroup] = None

    # ------------------------------------------------------------------
    # 构造
    # ------------------------------------------------------------------

    @property
    def gs(self) -> GapSet:
        if self._gs is None:
            self._gs = make_gapset(self.config.endpoints)
        return self._gs

    @property
    def eq(self):
        if self._eq is None:
            self._eq = equilibrium(self.gs, self.config.numerics.quad_order)
        return self._eq

    @property
    def word_length(self) -> int:
        L = self.config.numerics.word_length
        return default_word_length(self.gs.ell) if L is None else L

    @property
    def group(self) -> OrthocircleGroup:
        if self._group is None:
            self._group = szego_calculator.group_for(self.gs, self.eq)
            self.results['circle_angles'] = [list(pair) for pair in self._group.angles]
        return self._group

    def build_operator(self) -> JacobiOperator:
        """
        由配置构造算子：周期尾部给定参数或按周期拟合，再叠加头部

        Returns:
            JacobiOperator
        """
        op = self.config.operator
        if op.tail == 'free':
            tail = TorusPoint.free()
        elif op.period_a:
            tail = TorusPoint(tuple(op.period_a), tuple(op.period_b or [0.0] * len(op.period_a)))
        else:
            tail = fit_periodic(self.gs, op.period, eq=self.eq, seed=self.config.numerics.seed)
            self.results['fitted_tail'] = {'a': list(tail.a), 'b': list(tail.b), 'residual': tail.residual}
            self.check('tail_fit_residual', tail.residual, 0.0, 1e-10)
        J = JacobiOperator.periodic(tail)
        head_a, head_b = list(op.head_a), list(op.head_b)
        if op.head_profile == 'geometric':
            count = max(op.profile_length, len(head_a))
            head_a = [head_a[n - 1] if n <= len(head_a) else
                      tail.a_at(n) * (1.0 + op.profile_amplitude * op.profile_ratio ** n)
                      for n in range(1, count + 1)]
        if head_a or head_b:
            J = J.with_head(head_a, head_b or None)
        essential = J.essential_spectrum()
        if len(essential.endpoints) != len(self.gs.endpoints) or \
                not np.allclose(essential.endpoints, self.gs.endpoints, atol=1e-8):
            logger.warning(f"operator tail bands {essential.endpoints} differ from the configured set")
        return J

    # ------------------------------------------------------------------
    # 检查
    # ------------------------------------------------------------------

    def check(self, name: str, value: float, reference: float, tolerance: float,
              category: str = 'accuracy') -> bool:
        record = create_check(name, float(value), float(reference), float(tolerance))
        record['category'] = category
        self.checks.append(record)
        if not record['passed']:
            logger.warning(f"check '{name}' failed: error {format_number(record['error'], 3, True)} "
                           f"> {format_number(tolerance, 3, True)}")
        return record['passed']

    def flag(self, name: str, passed: bool, category: str = 'theorem') -> bool:
        self.checks.append(flag_check(name, passed, category))
        if not passed:
            logger.warning(f"check '{name}' failed")
        return bool(passed)

    def disk_probes(self, count: int, radius: float = 0.6) -> List[complex]:
        """𝔽 内的确定性随机探针"""
        probes: List[complex] = []
        attempts = 0
        while len(probes) < count and attempts < 1000 * count:
            attempts += 1
            r = radius * np.sqrt(self.rng.uniform(0.05, 1.0))
            z = complex(r * np.exp(1j * self.rng.uniform(0.0, 2.0 * np.pi)))
            if abs(z.imag) > 1e-3 and self.group.in_fundamental(z):
                probes.append(z)
        return probes

    def word_count_checks(self, G: OrthocircleGroup, L: int):
        if G.ell == 0:
            return
        lengths = G.word_lengths(min(L, 4))
        for k in range(1, min(L, 4) + 1):
            expected = 2 * G.ell * (2 * G.ell - 1) ** (k - 1)
            self.check(f'word_count_{k}', int((lengths == k).sum()), expected, 0.0, 'theorem')

    # ------------------------------------------------------------------
    # 各实验
    # ------------------------------------------------------------------

    def run_equilibrium(self):
        gs, eq = self.gs, self.eq
        self.results.update({
            'ell': gs.ell,
            'capacity': eq.capacity,
            'band_masses': list(eq.band_masses),
            'gap_critical_points': eq.gap_critical_points,
            'gap_critical_values': eq.gap_critical_values,
        })
        tol = self.config.tolerance
        self.check('band_mass_sum', sum(eq.band_masses), 1.0, tol('band_mass_sum'))
        if gs.ell == 0:
            alpha, beta = gs.endpoints
            half = 0.5 * (beta - alpha)
            self.check('capacity', eq.capacity, 0.5 * half, tol('capacity'))
            self.check('density_at_center', float(eq.density(np.array([alpha + half]))[0]),
                       1.0 / (np.pi * half), tol('closed_form'))
            self.check('green_outside', eq.green_real(beta + 0.25 * half), np.log(2.0), tol('closed_form'))

        rows = []
        for j, (alpha, beta) in enumerate(gs.bands):
            for x in np.linspace(alpha, beta, 66)[1:-1]:
                rows.append({'band': j, 'x': x, 'density': float(eq.density(np.array([x]))[0]),
                             'cdf': eq.cdf(x)})
        self.tables['density'] = pd.DataFrame(rows)
        lo, hi = gs.hull
        grid = np.linspace(lo - 0.25 * gs.diameter, hi + 0.25 * gs.diameter, 201)
        self.tables['green'] = pd.DataFrame({'x': grid, 'green': [eq.green_real(x) for x in grid]})

    def run_covering_fit(self):
        gs, eq, L = self.gs, self.eq, self.word_length
        tol = self.config.tolerance
        G = self.group
        cover = CoveringMap(G, gs, eq, L)
        self.results['word_length'] = L
        if G.ell > 0:
            residual = automorphy_residual(G, gs, eq)
            self.results['automorphy_residual'] = residual
            self.check('automorphy', residual, 0.0, tol('automorphy'))
            self.tables['circles'] = circle_geometry(G, level=2)
        self.word_count_checks(G, L)

        probes = self.disk_probes(self.config.numerics.probes)
        rows = []
        for i, z in enumerate(probes):
            x = cover.forward(z)
            back = cover.inverse(x)
            rows.append({'probe': i, 'z': z, 'x': x, 'roundtrip_error': abs(back - z)})
        frame = pd.DataFrame(rows)
        self.tables['probes'] = frame
        self.check('roundtrip', float(frame['roundtrip_error'].max()), 0.0, 1e-8)

        levels = []
        for length in range(max(1, L - 4), L + 1) if G.ell > 0 else [0]:
            shorter = CoveringMap(G, gs, eq, length) if length != L else cover
            errors = [abs(abs(shorter.blaschke(z)) - np.exp(-eq.green_real(x)))
                      for z, x in zip(frame['z'], frame['x'])]
            levels.append({'word_length': length, 'max_error': float(max(errors))})
        levels = pd.DataFrame(levels)
        self.tables['blaschke_green'] = levels
        self.results['blaschke_green_error'] = float(levels['max_error'].iloc[-1])
        self.check('blaschke_green', levels['max_error'].iloc[-1], 0.0, tol('blaschke_green'), 'theorem')

        pushed = []
        for power in range(4):
            result = pushforward_check(G, gs, eq, lambda x, power=power: np.asarray(x) ** power)
            pushed.append({'power': power, **result})
            self.check(f'pushforward_x{power}', result['lhs'], result['rhs'], tol('pushforward'), 'theorem')
        self.tables['pushforward'] = pd.DataFrame(pushed)
        self.tables['boundary'] = boundary_arcs(G, gs, eq)

    def run_szego_report(self):
        gs, eq = self.gs, self.eq
        num = self.config.numerics
        J = self.build_operator()
        report = szego_class_report(J, gs, eq, horizon=num.horizon)
        ratios = report.pop('product_ratios')
        self.tables['product_ratios'] = pd.DataFrame({'n': np.arange(1, len(ratios) + 1), 'ratio': ratios})
        self.results.update(report)
        detected = eigenvalues_outside(J, gs, size=num.truncation_size)
        self.results['truncation_eigenvalues'] = detected
        self.check('eigenvalue_detection', len(detected), len(report['eigenvalues']), 0.5)
        upper = szego_integral(gs, eq, spectral_measure(J).density, 0.5)
        self.results['half_power_szego_integral'] = upper.value
        self.results['half_power_szego_diverged'] = upper.diverged

        conditions = condition_report(J, horizon=num.horizon, epsilon=num.epsilon)
        self.tables['condition_profile'] = conditions.pop('profile')
        self.results['conditions'] = conditions

        self.flag('essential_spectrum', report['ess_spec_ok'])
        self.flag('szego_class', report['is_szego'])
        closure = stripping_closure(J, gs, eq, n_max=3)
        self.results['stripping_closure'] = [{'n': r['n'], 'is_szego': r['is_szego']} for r in closure]
        self.flag('stripping_closure', all(r['is_szego'] == report['is_szego'] for r in closure))

    def _probe_with_retry(self, z: complex, compute: Callable[[complex], Any]) -> Any:
        """探针落在极点或迭代失败时沿小圆移动后重试"""
        return retry_numerical(lambda attempt: compute(z * np.exp(0.37j * attempt) * (1.0 + 0.05 * attempt)),
                               retry_on=(PoleError, ConvergenceError, DomainError))

    def run_sum_rule(self):
        gs, eq = self.gs, self.eq
        num = self.config.numerics
        tol = self.config.tolerance
        J = self.build_operator()
        G = self.group
        asym = asymptotic_ratio(J, horizon=num.horizon, eq=self.eq)
        sequence = asym.pop('ratio_sequence')
        self.tables['ratio_sequence'] = pd.DataFrame({'n': sequence.index, 'ratio': sequence.to_numpy(),
                                                      'predicted': asym['predicted']})
        self.results.update(asym)
        self.check('sum_rule', float(sequence.iloc[-1]), asym['predicted'], tol('sum_rule'), 'theorem')

        z = 0.3 + 0.1j
        wronskian = self._probe_with_retry(z, lambda p: second_solution_wronskian(J, gs, eq, p, N=20, G=G))
        self.tables['wronskian'] = pd.DataFrame({'n': np.arange(len(wronskian['wronskian'])),
                                                 'wronskian': wronskian.pop('wronskian')})
        self.results['jost_solution'] = wronskian
        self.check('jost_recurrence', wronskian['recurrence_residual'], 0.0, tol('jost_recurrence'), 'theorem')
        self.check('wronskian_constant', wronskian['wronskian_variation'], 0.0, tol('jost_recurrence'), 'theorem')
        self.check('growth_rate', wronskian['growth_rate'] / wronskian['expected_rate'], 1.0,
                   tol('decay_rate'), 'theorem')

        identity = self._probe_with_retry(z, lambda p: jost_identity_check(J, gs, eq, p, n_max=2, G=G))
        self.tables['jost_identity'] = identity
        self.check('jost_identity', float(identity['residual'].max()), 0.0, tol('jost_identity'), 'theorem')

        JD = jost_data(J, gs, eq, G)
        DM = szego_calculator.disk_m_function(J, JD.cover)
        rows = []
        for i, probe in enumerate(self.disk_probes(num.probes, radius=0.5)):
            result = self._probe_with_retry(probe, lambda p: mh_representation_check(DM, JD, z=p))
            rows.append({'probe': i, 'lhs': result['lhs'], 'rhs': result['rhs'], 'residual': result['residual']})
        mh = pd.DataFrame(rows)
        self.tables['mh_representation'] = mh
        if len(mh):
            self.check('mh_representation', float(mh['residual'].max()), 0.0, tol('mh_representation'), 'theorem')

    def run_asymptotics(self):
        gs = self.gs
        num = self.config.numerics
        tol = self.config.tolerance
        J = self.build_operator()
        limit = JacobiOperator.periodic(J.tail)
        trend_only = self.config.operator.head_profile == 'geometric'
        self.results['trend_only'] = trend_only

        asym = asymptotic_ratio(J, horizon=num.horizon, eq=self.eq)
        sequence = asym.pop('ratio_sequence')
        self.results.update(asym)
        frame = pd.DataFrame({'n': sequence.index, 'ratio': sequence.to_numpy()})

        lo, hi = gs.hull
        points = {'right': hi + 0.25 * gs.diameter, 'left': lo - 0.25 * gs.diameter}
        for k, (g0, g1) in enumerate(gs.gaps):
            points[f'gap{k}'] = 0.5 * (g0 + g1)
        variations = {}
        for label, x in points.items():
            series = pn_ratio(J, limit, x, horizon=num.horizon)
            frame[f'pn_ratio_{label}'] = series.to_numpy().real
            variations[label] = series.attrs['tail_variation']
        self.tables['asymptotics'] = frame
        self.results['pn_tail_variation'] = variations

        if not trend_only:
            self.check('sum_rule', float(sequence.iloc[-1]), asym['predicted'], tol('sum_rule'), 'theorem')
            for label in ('left', 'right'):
                self.check(f'pn_ratio_{label}', variations[label], 0.0, tol('sum_rule'), 'theorem')

    def run_character_match(self):
        gs, eq = self.gs, self.eq
        num = self.config.numerics
        tol = self.config.tolerance
        J = self.build_operator()
        G = self.group
        JD = jost_data(J, gs, eq, G)
        C = character_of_J(JD)
        self.results['character'] = list(C.values)
        if G.ell == 0:
            self.flag('trivial_character', C.values == ())
            return

        stripping = szego_calculator.stripping_character_check(J, gs, eq, (1, 2), G=G)
        self.results['stripping'] = stripping
        for n, value in stripping.items():
            self.check(f'character_stripping_{n}', value, 0.0, tol('character_stripping'), 'theorem')

        walk = torus_walk(J.tail, num.walk_steps)
        characters = szego_calculator.walk_characters(walk, G, gs, eq)
        rows = []
        for k, (T, c) in enumerate(zip(walk, characters)):
            row = {'sample': k}
            row.update({f'phase_{j}': float(np.angle(v)) for j, v in enumerate(c.values)})
            row.update({f'a_{n + 1}': v for n, v in enumerate(T.a)})
            row.update({f'b_{n + 1}': v for n, v in enumerate(T.b)})
            rows.append(row)
        self.tables['walk'] = pd.DataFrame(rows)

        k = len(walk) // 3
        self_match = match_torus_character(characters[k], walk, G, gs, eq)
        self.check('self_match', float(np.max(np.abs(self_match.params - walk[k].params))), 0.0,
                   tol('self_match'), 'theorem')

        matched = match_torus_character(C, walk, G, gs, eq)
        matched_character = character_of_J(jost_data(JacobiOperator.periodic(matched), gs, eq, G))
        self.results['matched'] = {'a': list(matched.a), 'b': list(matched.b)}
        self.results['tail_parameter_error'] = float(np.max(np.abs(matched.params - J.tail.params)))
        self.check('character_match', character_distance(C, matched_character), 0.0,
                   tol('character_match'), 'theorem')

    def run_beardon_decay(self):
        tol = self.config.tolerance
        G, L = self.group, self.word_length
        self.word_count_checks(G, L)
        frame = burnside_sum(G, 0j, 1.0, L)
        self.tables['burnside'] = frame
        self.results['burnside_partial_sum'] = float(frame['partial_sum'].iloc[-1])
        self.results['decay_rate'] = frame.attrs['decay_rate']
        if G.ell == 0:
            return
        levels = np.arange(1, max(L, 3) + 1)
        measures = np.array([rm_measure(G, int(m)) for m in levels])
        self.tables['rm_measure'] = pd.DataFrame({'m': levels, 'measure': measures})
        slope, intercept = np.polyfit(levels, np.log(measures), 1)
        fitted = slope * levels + intercept
        logs = np.log(measures)
        r2 = 1.0 - np.sum((logs - fitted) ** 2) / max(np.sum((logs - logs.mean()) ** 2), 1e-300)
        self.results.update({'rm_slope': float(slope), 'rm_r2': float(r2)})
        self.flag('rm_decay', slope < 0)
        self.flag('rm_linear_fit', r2 >= tol('rm_fit_r2'))
        self.tables['circles'] = circle_geometry(G, level=min(L, 3))

    # ------------------------------------------------------------------
    # 运行
    # ------------------------------------------------------------------

    def run(self) -> int:
        """
        运行实验并写出报告与表格；中途失败时写出已得到的部分结果

        Returns:
            退出码
        """
        start = time.perf_counter()
        runner = getattr(self, f"run_{self.config.kind}")
        error = None
        logger.info(f"Running {self.config.kind} experiment '{self.config.name}'")
        try:
            runner()
        except ConfigError:
            raise
        except FiniteGapError as e:
            error = describe_error(e)
            logger.error(f"{self.config.kind} experiment failed: {type(e).__name__}: {e}")
        failed = [c for c in self.checks if not c['passed']]
        if error is not None or any(c['category'] == 'accuracy' for c in failed):
            status, code = 'accuracy_failure', EXIT_ACCURACY
        elif failed:
            status, code = 'theorem_failure', EXIT_THEOREM
        else:
            status, code = 'passed', EXIT_OK

        writer = ReportWriter(self.config.output_dir, self.config.name)
        for name, frame in self.tables.items():
            writer.write_table(name, frame)
        report = build_report(self.config, status, code, self.results, self.checks,
                              time.perf_counter() - start, error)
        writer.write_report(report)
        logger.info(f"Experiment '{self.config.name}' finished with status {status}")
        return code


def run(config: ExperimentConfig) -> int:
    return ExperimentRunner(config).run()


def _load(path: str, expected_kind: Optional[str], args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(path)
    if expected_kind is not None and config.kind != expected_kind:
        raise ConfigError(f"config kind '{config.kind}' does not match subcommand (expects '{expected_kind}')")
    overrides = {}
    if getattr(args, 'output_dir', None):
        overrides['output_dir'] = args.output_dir
    if getattr(args, 'seed', None) is not None:
        overrides['numerics'] = replace(config.numerics, seed=args.seed)
    return replace(config, **overrides).validate() if overrides else config


def command_info(args: argparse.Namespace) -> int:
    """打印间隙集的基本信息，不写文件"""
    if args.config:
        endpoints = load_config(args.config).endpoints
    elif args.endpoints:
        endpoints = args.endpoints
    else:
        raise ConfigError("info needs --config or --endpoints")
    try:
        gs = make_gapset(endpoints)
    except FiniteGapError as e:
        raise ConfigError(str(e), index=getattr(e, 'index', None)) from e
    eq = equilibrium(gs, 64)
    print(f"ℓ = {gs.ell}")
    print(f"bands: {[(format_number(a), format_number(b)) for a, b in gs.bands]}")
    print(f"capacity: {format_number(eq.capacity, 12)}")
    print(f"harmonic measures: {[format_number(m, 10) for m in eq.band_masses]}")
    print(f"default word length: {default_word_length(gs.ell)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Finite-gap Jacobi matrix experiments.")
    parser.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    info = sub.add_parser('info', help="summarize a finite gap set")
    info.add_argument('--config')
    info.add_argument('--endpoints', type=float, nargs='+')

    for command in SUBCOMMANDS:
        p = sub.add_parser(command, help=f"run a {SUBCOMMANDS[command]} experiment")
        p.add_argument('--config', required=True)
        p.add_argument('--output-dir', dest='output_dir',
                       default=os.environ.get('FINITEGAP_OUTPUT_DIR'))
        p.add_argument('--seed', type=int)

    batch = sub.add_parser('batch', help="run several configs in order")
    batch.add_argument('configs', nargs='+')
    batch.add_argument('--output-dir', dest='output_dir',
                       default=os.environ.get('FINITEGAP_OUTPUT_DIR'))
    batch.add_argument('--seed', type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_log_level('DEBUG')
    try:
        if args.command == 'info':
            return command_info(args)
        if args.command == 'batch':
            codes = []
            for path in args.configs:
                try:
                    codes.append(run(_load(path, None, args)))
                except ConfigError as e:
                    logger.error(f"{path}: {e}")
                    print(describe_error(e, f"配置文件：{path}"), file=sys.stderr)
                    codes.append(EXIT_CONFIG)
            return max(codes)
        return run(_load(args.config, SUBCOMMANDS[args.command], args))
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        print(describe_error(e), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
