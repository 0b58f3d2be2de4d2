"""
报告输出模块
实验报告（JSON）与数据表（CSV）的写出
"""

import json
import os
import platform
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

from utils import logger, to_serializable


class ReportWriter:
    """把一次实验的报告与表格写到输出目录"""

    def __init__(self, output_dir: str, name: str):
        self.output_dir = output_dir
        self.name = name
        self.written: List[str] = []

    def _path(self, suffix: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, f"{self.name}_{suffix}")

    def write_table(self, table: str, frame: pd.DataFrame) -> str:
        """
        写出 CSV 表格（复数列拆成实部与虚部，浮点固定为 17 位有效数字）

        Args:
            table: 表名
            frame: 数据

        Returns:
            文件路径
        """
        frame = frame.copy()
        for column in list(frame.columns):
            if np.iscomplexobj(frame[column].to_numpy()):
                values = frame.pop(column).to_numpy()
                frame[f"{column}_re"] = values.real
                frame[f"{column}_im"] = values.imag
        path = self._path(f"{table}.csv")
        frame.to_csv(path, index=False, float_format='%.17g')
        self.written.append(path)
        logger.debug(f"Wrote table {path} ({len(frame)} rows)")
        return path

    def write_report(self, report: Dict[str, Any]) -> str:
        path = self._path("report.json")
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(to_serializable(report), handle, indent=2, sort_keys=True, ensure_ascii=False)
        self.written.append(path)
        logger.info(f"Report written to {path}")
        return path


def build_report(config, status: str, exit_code: int, results: Dict[str, Any],
                 checks: List[Dict[str, Any]], runtime: float, error: Optional[str] = None) -> Dict[str, Any]:
    """
    组装报告：结果、检查、配置哈希与全部生效容差

    Args:
        config: ExperimentConfig
        status: 'passed' / 'accuracy_failure' / 'theorem_failure'
        exit_code: 退出码
        results: 计算得到的泛函与残差
        checks: 检查记录
        runtime: 运行时间（秒）
        error: 中途失败时的错误描述

    Returns:
        报告字典
    """
    return {
        'name': config.name,
        'kind': config.kind,
        'status': status,
        'exit_code': exit_code,
        'error': error,
        'config': config.to_dict(),
        'config_hash': config.config_hash(),
        'tolerances': config.effective_tolerances(),
        'results': results,
        'checks': checks,
        'runtime_seconds': runtime,
        'environment': {
            'python': platform.python_version(),
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'pandas': pd.__version__,
        },
        'generated_at': datetime.now().isoformat(timespec='seconds'),
    }
