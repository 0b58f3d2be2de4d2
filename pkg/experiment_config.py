"""
实验配置模块
JSON 配置文件的读取、校验、序列化与哈希
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from utils import ConfigError, ValidationError, logger, validate_endpoints

KINDS = ('equilibrium', 'covering_fit', 'szego_report', 'sum_rule', 'asymptotics',
         'character_match', 'beardon_decay')

# 子命令与实验类型的对应
SUBCOMMANDS = {
    'equilibrium': 'equilibrium',
    'cover': 'covering_fit',
    'szego': 'szego_report',
    'sumrule': 'sum_rule',
    'asymptotics': 'asymptotics',
    'character': 'character_match',
    'beardon': 'beardon_decay',
}

DEFAULT_TOLERANCES = {
    'capacity': 1e-10,
    'band_mass_sum': 1e-10,
    'closed_form': 1e-10,
    'automorphy': 1e-8,
    'blaschke_green': 1e-4,
    'pushforward': 1e-4,
    'sum_rule': 1e-6,
    'jost_recurrence': 1e-8,
    'jost_identity': 1e-6,
    'decay_rate': 1e-2,
    'mh_representation': 1e-6,
    'character_stripping': 1e-6,
    'character_match': 1e-4,
    'self_match': 1e-10,
    'rm_fit_r2': 0.99,
}


def default_output_dir() -> str:
    return os.environ.get('FINITEGAP_OUTPUT_DIR', 'results')


@dataclass
class OperatorSpec:
    """算子描述：尾部（free / periodic）与头部覆盖"""
    tail: str = 'free'
    period: Optional[int] = None
    period_a: List[float] = field(default_factory=list)
    period_b: List[float] = field(default_factory=list)
    head_a: List[float] = field(default_factory=list)
    head_b: List[float] = field(default_factory=list)
    head_profile: Optional[str] = None
    profile_amplitude: float = 0.5
    profile_ratio: float = 0.5
    profile_length: int = 40


@dataclass
class NumericsConfig:
    """数值旋钮"""
    quad_order: int = 64
    word_length: Optional[int] = None
    horizon: int = 30
    truncation_size: Optional[int] = None
    walk_steps: int = 16
    epsilon: float = 0.1
    seed: int = 0
    probes: int = 5


@dataclass
class ExperimentConfig:
    """一次实验的完整配置"""
    kind: str
    endpoints: List[float]
    name: str = 'experiment'
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_dir: str = field(default_factory=default_output_dir)

    def tolerance(self, name: str) -> float:
        """生效的容差：配置覆盖默认值"""
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def effective_tolerances(self) -> Dict[str, float]:
        merged = dict(DEFAULT_TOLERANCES)
        merged.update({k: float(v) for k, v in self.tolerances.items()})
        return merged

    def validate(self) -> 'ExperimentConfig':
        """
        检查所有取值范围

        Returns:
            self

        Raises:
            ConfigError: 任一字段非法
        """
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind '{self.kind}'")
        try:
            validate_endpoints(self.endpoints)
        except ValidationError as e:
            raise ConfigError(f"endpoints: {e}", index=e.index) from e

        op = self.operator
        if op.tail not in ('free', 'periodic'):
            raise ConfigError(f"operator.tail must be 'free' or 'periodic', got '{op.tail}'")
        if op.tail == 'periodic':
            if op.period_a:
                if len(op.period_b) not in (0, len(op.period_a)):
                    raise ConfigError("operator.period_b must match operator.period_a in length")
                if min(op.period_a) <= 0:
                    raise ConfigError("operator.period_a must be positive")
            elif not op.period or op.period < 1:
                raise ConfigError("a periodic tail needs operator.period_a or operator.period >= 1")
        for i, a in enumerate(op.head_a):
            if a <= 0:
                raise ConfigError(f"operator.head_a[{i}] = {a} must be positive", index=i)
        if op.head_profile not in (None, 'geometric'):
            raise ConfigError(f"unknown head_profile '{op.head_profile}'")
        if op.head_profile == 'geometric':
            if not 0 < op.profile_ratio < 1:
                raise ConfigError("operator.profile_ratio must lie in (0, 1)")
            if op.profile_length < 1 or abs(op.profile_amplitude) >= 1:
                raise ConfigError("operator.profile_length must be >= 1 and |profile_amplitude| < 1")

        num = self.numerics
        if not 16 <= num.quad_order <= 4096:
            raise ConfigError(f"numerics.quad_order = {num.quad_order} must lie in [16, 4096]")
        if num.word_length is not None and not 0 <= num.word_length <= 14:
            raise ConfigError(f"numerics.word_length = {num.word_length} must lie in [0, 14]")
        if not 1 <= num.horizon <= 5000:
            raise ConfigError(f"numerics.horizon = {num.horizon} must lie in [1, 5000]")
        if num.truncation_size is not None and num.truncation_size < 1:
            raise ConfigError("numerics.truncation_size must be >= 1")
        if not 2 <= num.walk_steps <= 512:
            raise ConfigError(f"numerics.walk_steps = {num.walk_steps} must lie in [2, 512]")
        if not 0 < num.epsilon < 1:
            raise ConfigError("numerics.epsilon must lie in (0, 1)")
        if not 1 <= num.probes <= 100:
            raise ConfigError("numerics.probes must lie in [1, 100]")
        head = max(len(op.head_a), len(op.head_b),
                   op.profile_length if op.head_profile == 'geometric' else 0)
        if self.kind in ('sum_rule', 'asymptotics') and num.horizon <= head:
            raise ConfigError(f"numerics.horizon = {num.horizon} must exceed the head length {head}")

        for name, value in self.tolerances.items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance '{name}'")
            if not float(value) > 0:
                raise ConfigError(f"tolerance '{name}' must be positive")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """
        从字典构造配置（未知字段报错）

        Args:
            data: JSON 解析得到的字典

        Returns:
            校验后的 ExperimentConfig
        """
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        data = dict(data)
        operator = _build_section(OperatorSpec, data.pop('operator', {}), 'operator')
        numerics = _build_section(NumericsConfig, data.pop('numerics', {}), 'numerics')
        known = {f.name for f in fields(cls)} - {'operator', 'numerics'}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for required in ('kind', 'endpoints'):
            if required not in data:
                raise ConfigError(f"missing config field '{required}'")
        try:
            endpoints = [float(x) for x in data.pop('endpoints')]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"endpoints must be a list of numbers: {e}") from e
        config = cls(endpoints=endpoints, operator=operator, numerics=numerics, **data)
        return config.validate()

    def config_hash(self) -> str:
        """规范 JSON（不含输出目录）的 sha256"""
        payload = self.to_dict()
        payload.pop('output_dir')
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=False)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _build_section(cls, data: Any, label: str):
    if not isinstance(data, dict):
        raise ConfigError(f"'{label}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown fields in '{label}': {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid '{label}' section: {e}") from e


def load_config(path: str) -> ExperimentConfig:
    """
    读取并校验 JSON 配置文件

    Args:
        path: 文件路径

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: 文件不存在、不是合法 JSON 或字段非法
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    config = ExperimentConfig.from_dict(data)
    logger.info(f"Loaded {config.kind} config '{config.name}' from {path}")
    return config
