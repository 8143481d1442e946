"""
Схема конфигурации эксперимента и сборка модели по конфигурации
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..conformal import ConformalModel, build_factor
from ..errors import ConfigError
from ..geometry import (EuclideanModel, HyperbolicModel, ManifoldModel, SphereModel, StereographicSphere,
                        build_envelope, expression_potential, ou_potential, power_potential)
from ..stochastic import EnsembleSpec
from ..utils import DEFAULT_LOG_FORMAT, load_config

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    'talagrand', 'talagrand-marginal', 'freepath', 'lsi', 'ibp', 'energy-bound', 'coupling',
    'example11', 'conformal-check', 'laplacian-comparison', 'ai-ellipticity',
)

ExperimentKind = Literal[
    'talagrand', 'talagrand-marginal', 'freepath', 'lsi', 'ibp', 'energy-bound', 'coupling',
    'example11', 'conformal-check', 'laplacian-comparison', 'ai-ellipticity',
]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid')


class DriftConfig(StrictModel):
    kind: Literal['zero', 'ou', 'power', 'expression'] = 'zero'
    lam: float = 1.0
    delta: float = Field(0.5, gt=0)
    expression: Optional[str] = None

    @model_validator(mode='after')
    def _expression_present(self):
        if self.kind == 'expression' and not self.expression:
            raise ValueError("для kind=expression нужна строка expression")
        return self


class ModelConfig(StrictModel):
    kind: Literal['euclidean', 'hyperbolic', 'sphere', 'sphere-chart', 'conformal'] = 'euclidean'
    dimension: int = Field(2, ge=1)
    curvature: float = Field(1.0, gt=0)
    radius: float = Field(1.0, gt=0)
    drift: DriftConfig = DriftConfig()
    psi: Optional[Dict[str, Any]] = None
    explosion_threshold: float = Field(1e6, gt=0)
    base: Optional['ModelConfig'] = None
    factor: Optional[Dict[str, Any]] = None

    @model_validator(mode='after')
    def _conformal_base(self):
        if self.kind == 'conformal' and self.base is None:
            raise ValueError("конформной модели нужна базовая модель base")
        return self


class EnsembleConfig(StrictModel):
    horizon: float = Field(1.0, gt=0)
    n_steps: int = Field(200, ge=16)
    n_paths: int = Field(512, ge=64)
    seed: int
    adaptive: bool = False
    dt_floor: float = Field(1e-8, gt=0)


class FreepathConfig(StrictModel):
    C0: float = Field(2.0, ge=0)
    initial: Literal['point', 'gaussian'] = 'gaussian'
    scale: float = Field(1.0, gt=0)
    validate_constant: bool = True


class Example11Config(StrictModel):
    deltas: List[float] = [0.5, 2.0]
    lambdas: List[float] = [0.01]
    explosion_threshold: float = Field(0.95, gt=0, le=1)
    stability_tolerance: float = Field(0.1, gt=0)

    @model_validator(mode='after')
    def _positive_deltas(self):
        if any(d <= 0 for d in self.deltas):
            raise ValueError("все δ должны быть положительными")
        return self


class CouplingConfig(StrictModel):
    rho0: List[float] = [0.5, 1.0, 2.0]
    tolerance: float = Field(0.05, ge=0)
    max_abort: float = Field(0.01, ge=0)


class ConditionalMetricConfig(StrictModel):
    anchor: Optional[List[List[float]]] = None
    bandwidth: Optional[float] = Field(None, gt=0)
    K1: Optional[float] = None


class ConformalConfig(StrictModel):
    n_values: List[int] = [2, 4, 8]
    radii: Optional[List[float]] = None
    n_directions: int = Field(8, ge=1)
    n_fields: int = Field(4, ge=1)
    factor: Dict[str, Any] = {'kind': 'gaussian', 'width': 1.0}
    connection_tolerance: float = Field(1e-5, gt=0)
    ricci_tolerance: float = Field(1e-4, gt=0)


class LaplacianConfig(StrictModel):
    radii: List[float] = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0]


class ReportConfig(StrictModel):
    include_timing: bool = False
    gnuplot: bool = True


class ExperimentConfig(StrictModel):
    """Документ эксперимента; неизвестные ключи отклоняются"""

    id: str = 'experiment'
    experiment: Optional[ExperimentKind] = None
    model: ModelConfig = ModelConfig()
    ensemble: EnsembleConfig
    functional: Dict[str, Any] = {'kind': 'constant'}
    functionals: Optional[List[Dict[str, Any]]] = None
    direction: Optional[List[float]] = None
    partition: Optional[List[float]] = None
    metric: Literal['sup', 'partition', 'endpoint'] = 'sup'
    K: Optional[float] = None
    tolerance: Optional[float] = Field(None, ge=0)
    output: Optional[str] = None
    freepath: FreepathConfig = FreepathConfig()
    example11: Example11Config = Example11Config()
    coupling: CouplingConfig = CouplingConfig()
    conditional_metric: ConditionalMetricConfig = ConditionalMetricConfig()
    conformal: ConformalConfig = ConformalConfig()
    laplacian: LaplacianConfig = LaplacianConfig()
    report: ReportConfig = ReportConfig()

    @model_validator(mode='after')
    def _partition_inside_horizon(self):
        if self.partition is not None:
            p = np.asarray(self.partition, dtype=float)
            if p.size == 0 or np.any(np.diff(p) <= 0) or p[0] <= 0 or p[-1] > self.ensemble.horizon:
                raise ValueError("разбиение должно строго возрастать в (0, T]")
        return self

    def ensemble_spec(self) -> EnsembleSpec:
        e = self.ensemble
        return EnsembleSpec(e.horizon, e.n_steps, e.n_paths, e.seed, adaptive=e.adaptive, dt_floor=e.dt_floor)


ModelConfig.model_rebuild()


class LoggingSettings(StrictModel):
    level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'] = 'INFO'
    format: str = DEFAULT_LOG_FORMAT
    file: Optional[str] = None


class PerformanceSettings(StrictModel):
    workers: int = Field(1, ge=1)
    chunk_size: int = Field(256, ge=1)


class OutputSettings(StrictModel):
    reports_path: str = 'reports'


class ToleranceSettings(StrictModel):
    talagrand: float = Field(0.15, ge=0)
    closed_form: float = Field(0.05, ge=0)


class RuntimeSettings(StrictModel):
    """Настройки запуска (config.yaml): логирование, потоки, каталог отчетов, допуски"""

    logging: LoggingSettings = LoggingSettings()
    performance: PerformanceSettings = PerformanceSettings()
    output: OutputSettings = OutputSettings()
    tolerances: ToleranceSettings = ToleranceSettings()


def _field_path(error: ValidationError) -> str:
    first = error.errors()[0]
    return '.'.join(str(part) for part in first['loc'])


def load_settings(path: str = "config.yaml") -> RuntimeSettings:
    """
    Настройки запуска; отсутствующий файл дает значения по умолчанию

    Raises:
        ConfigError: с путем settings.<раздел>.<поле>
    """
    try:
        return RuntimeSettings.model_validate(load_config(path))
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first['msg'], f"settings.{_field_path(exc)}") from exc


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Валидация словаря эксперимента

    Raises:
        ConfigError: с точечным путем к первому ошибочному полю
    """
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first['msg'], _field_path(exc)) from exc


def load_experiment_config(path: str, experiment: Optional[str] = None,
                           seed: Optional[int] = None) -> ExperimentConfig:
    """
    Загрузка YAML эксперимента с переопределениями из командной строки

    Args:
        path: путь к YAML
        experiment: вид из подкоманды; должен совпадать с полем experiment файла
        seed: переопределение главного зерна

    Returns:
        ExperimentConfig
    """
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"Файл эксперимента {path} не найден", "config")
    try:
        with open(file, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Некорректный YAML: {exc}", "config") from exc
    if not isinstance(data, dict):
        raise ConfigError("Документ эксперимента должен быть словарем", "config")

    if experiment is not None:
        declared = data.get('experiment')
        if declared is not None and declared != experiment:
            raise ConfigError(f"Подкоманда {experiment} не совпадает с experiment={declared} в файле",
                              "experiment")
        data['experiment'] = experiment
    if seed is not None:
        data.setdefault('ensemble', {})
        data['ensemble']['seed'] = int(seed)

    config = parse_experiment_config(data)
    if config.experiment is None:
        raise ConfigError("Вид эксперимента не задан ни в файле, ни подкомандой", "experiment")
    logger.info(f"✓ Конфигурация {config.id} ({config.experiment}) загружена из {path}")
    return config


def _build_drift(drift: DriftConfig, dimension: int):
    if drift.kind == 'zero':
        return None
    if drift.kind == 'ou':
        return ou_potential(dimension, drift.lam)
    if drift.kind == 'power':
        return power_potential(dimension, drift.delta)
    return expression_potential(dimension, drift.expression)


def build_model(config: ModelConfig) -> ManifoldModel:
    """Модель многообразия по конфигурации"""
    psi = build_envelope(config.psi) if config.psi is not None else None
    common = dict(psi=psi, explosion_threshold=config.explosion_threshold)
    try:
        if config.kind == 'euclidean':
            return EuclideanModel(config.dimension, drift=_build_drift(config.drift, config.dimension), **common)
        if config.drift.kind != 'zero':
            raise ConfigError(f"Модель {config.kind} поддерживает только нулевой снос", "model.drift.kind")
        if config.kind == 'hyperbolic':
            return HyperbolicModel(config.dimension, curvature=config.curvature, **common)
        if config.kind == 'sphere':
            return SphereModel(config.dimension, radius=config.radius, **common)
        if config.kind == 'sphere-chart':
            return StereographicSphere(config.dimension, radius=config.radius, **common)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "model") from exc
    base = build_model(config.base)
    return ConformalModel(base, build_factor(config.factor, base))


def curvature_constant(config: ExperimentConfig, model: ManifoldModel) -> float:
    """K из конфигурации или нижняя оценка кривизны модели"""
    if config.K is not None:
        return float(config.K)
    K = model.curvature_floor
    if not np.isfinite(K):
        raise ConfigError(f"Для модели {model.model_id} константа K должна быть задана явно", "K")
    return float(K)
