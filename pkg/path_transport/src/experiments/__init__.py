"""
Запуск экспериментов по YAML-конфигурации и отчеты CSV
"""

from .config import (EXPERIMENT_KINDS, ExperimentConfig, RuntimeSettings, build_model, curvature_constant,
                     load_experiment_config, load_settings, parse_experiment_config)
from .diagnostics import CouplingReport, Example11Report, coupling_report, example11_sweep, exponential_moment
from .report import COLUMNS, ReportRow, all_passed, rows_to_frame, write_report
from .runner import ExperimentRunner, run_experiment

__all__ = [
    'EXPERIMENT_KINDS', 'ExperimentConfig', 'RuntimeSettings', 'build_model', 'curvature_constant',
    'load_experiment_config', 'load_settings', 'parse_experiment_config',
    'CouplingReport', 'Example11Report', 'coupling_report', 'example11_sweep',
    'exponential_moment', 'COLUMNS', 'ReportRow', 'all_passed', 'rows_to_frame', 'write_report',
    'ExperimentRunner', 'run_experiment',
]
