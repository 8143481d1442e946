"""
Запуск эксперимента по конфигурации: диспетчеризация по виду и сбор строк отчета
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from ..conformal import (approx_curvature_bound, build_factor, conformal_connection_diff, conformal_ricci,
                         containment_probe, cutoff_chain, laplacian_comparison, radial_sample,
                         random_vector_fields, ricci_oracle)
from ..damped_gradient import (build_functional, damped_energy_bound, energy_constant,
                               estimate_conditional_metric, ellipticity_floor, ibp_residual, lsi_gap,
                               scatter_valid, smooth_bounded_functional, solve_damped_flow_bundle)
from ..damped_gradient.conditional_metric import conditional_samples
from ..errors import CertificateRefused, ConfigError
from ..geometry import ManifoldModel
from ..stochastic import CameronMartinPath, PathBundle, simulate_ensemble, time_grid
from ..transport import PathMetric, freepath_certificate, talagrand_certificate, validate_initial_constant
from ..transport.certificates import TalagrandReport
from ..utils import Timer
from .config import ExperimentConfig, build_model, curvature_constant
from .diagnostics import coupling_report, example11_sweep
from .report import ReportRow

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    'talagrand': 0.15,
    'closed_form': 0.05,
}

ENERGY_FUNCTIONALS = 10


class ExperimentRunner:
    """
    Исполнитель одного эксперимента

    Пример использования:
        runner = ExperimentRunner(config, workers=4)
        rows = runner.run()
    """

    def __init__(self, config: ExperimentConfig, workers: int = 1, chunk_size: int = 256,
                 tolerances: Optional[Dict[str, float]] = None):
        self.config = config
        self.workers = int(workers)
        self.chunk_size = int(chunk_size)
        self.tolerances = {**DEFAULT_TOLERANCES, **(tolerances or {})}
        self.model: Optional[ManifoldModel] = None
        self.completed: List[ReportRow] = []
        self.handlers: Dict[str, Callable[[], List[ReportRow]]] = {
            'talagrand': self.run_talagrand,
            'talagrand-marginal': self.run_talagrand,
            'freepath': self.run_freepath,
            'lsi': self.run_lsi,
            'ibp': self.run_ibp,
            'energy-bound': self.run_energy_bound,
            'coupling': self.run_coupling,
            'example11': self.run_example11,
            'conformal-check': self.run_conformal_check,
            'laplacian-comparison': self.run_laplacian_comparison,
            'ai-ellipticity': self.run_ai_ellipticity,
        }

    # ------------------------------------------------------------------
    # общие части
    # ------------------------------------------------------------------

    @property
    def kind(self) -> str:
        return self.config.experiment

    def _model(self) -> ManifoldModel:
        if self.model is None:
            self.model = build_model(self.config.model)
        return self.model

    def _row(self, model_id: str, params: Dict[str, object], **values) -> ReportRow:
        """Строка отчета; все созданные строки сохраняются в completed"""
        row = ReportRow(experiment=f"{self.config.id}:{self.kind}", model=model_id,
                        params={'seed': self.config.ensemble.seed, **params}, **values)
        self.completed.append(row)
        return row

    def _functionals(self):
        model = self._model()
        T = self.config.ensemble.horizon
        specs = self.config.functionals or [self.config.functional]
        return [build_functional(spec, T, model.ambient_dimension) for spec in specs]

    def run(self) -> List[ReportRow]:
        """Запуск эксперимента; время каждой строки пишется в wall_time"""
        handler = self.handlers.get(self.kind)
        if handler is None:
            raise ConfigError(f"Неизвестный вид эксперимента: {self.kind}", "experiment")
        with Timer(f"Эксперимент {self.config.id} ({self.kind})") as timer:
            rows = handler()
        for row in rows:
            row.wall_time = timer.elapsed
        n_failed = sum(not row.passed for row in rows)
        if n_failed:
            logger.warning(f"Не пройдено {n_failed} из {len(rows)} проверок")
        else:
            logger.info(f"✓ Все {len(rows)} проверок пройдены")
        return rows

    # ------------------------------------------------------------------
    # транспортные сертификаты
    # ------------------------------------------------------------------

    def _talagrand_row(self, report: TalagrandReport, model_id: str, params: Dict[str, object]) -> ReportRow:
        return self._row(model_id, {**params, 'metric': report.metric, 'solver': report.solver,
                                    'n': report.n, 'lhs_corrected': report.lhs_corrected,
                                    'entropy': report.entropy, 'w1': report.w1,
                                    'w1_below_w2': report.w1_below_w2},
                         lhs=report.lhs, rhs=report.rhs, constant=report.constant, se=report.entropy_se,
                         control=report.control, ratio=report.ratio, passed=report.passed,
                         exclusion_fraction=report.exclusion_fraction)

    def _refused_row(self, model_id: str, params: Dict[str, object], exc: CertificateRefused) -> ReportRow:
        logger.warning(f"Сертификат отклонен: {exc}")
        return self._row(model_id, {**params, 'refused': str(exc)}, passed=False)

    def _metric(self) -> PathMetric:
        if self.kind == 'talagrand-marginal':
            if not self.config.partition:
                raise ConfigError("Для talagrand-marginal нужно разбиение", "partition")
            return PathMetric('partition', self.config.partition)
        if self.config.metric == 'partition':
            return PathMetric('partition', self.config.partition)
        return PathMetric(self.config.metric)

    def run_talagrand(self) -> List[ReportRow]:
        model = self._model()
        K = curvature_constant(self.config, model)
        tolerance = self.config.tolerance if self.config.tolerance is not None else self.tolerances['talagrand']
        rows = []
        for F in self._functionals():
            params = {'K': K, 'F': F.label, **F.params}
            try:
                report = talagrand_certificate(model, F, K, self.config.ensemble_spec(), metric=self._metric(),
                                               tolerance=tolerance, chunk_size=self.chunk_size,
                                               workers=self.workers)
            except CertificateRefused as exc:
                rows.append(self._refused_row(model.model_id, params, exc))
                continue
            rows.append(self._talagrand_row(report, model.model_id, params))
        return rows

    def _initial_sampler(self, model: ManifoldModel):
        settings = self.config.freepath
        if settings.initial == 'point':
            return lambda n, rng: np.broadcast_to(model.origin, (n, model.ambient_dimension)).copy()

        def gaussian(n: int, rng: np.random.Generator) -> np.ndarray:
            origin = np.broadcast_to(model.origin, (n, model.ambient_dimension))
            basis = model.tangent_basis(origin)
            v = np.einsum('bki,bi->bk', basis, settings.scale * rng.standard_normal((n, model.dimension)))
            points, _ = model.exp_and_transport(origin, v, v)
            return points

        return gaussian

    def run_freepath(self) -> List[ReportRow]:
        model = self._model()
        K = curvature_constant(self.config, model)
        settings = self.config.freepath
        C0 = 0.0 if settings.initial == 'point' else settings.C0
        tolerance = self.config.tolerance if self.config.tolerance is not None else self.tolerances['talagrand']
        rows = []
        if settings.initial == 'gaussian' and settings.validate_constant:
            check = validate_initial_constant(C0 / settings.scale ** 2)
            rows.append(self._row('gaussian', {'C0': C0, 'scale': settings.scale, 'check': 'initial_constant'},
                                  lhs=check.worst_ratio, rhs=1.0, ratio=check.worst_ratio, passed=check.passed))
        for F in self._functionals():
            params = {'K': K, 'C0': C0, 'initial': settings.initial, 'F': F.label, **F.params}
            try:
                report = freepath_certificate(model, self._initial_sampler(model), C0, F, K,
                                              self.config.ensemble_spec(), metric=self._metric(),
                                              tolerance=tolerance, chunk_size=self.chunk_size,
                                              workers=self.workers)
            except CertificateRefused as exc:
                rows.append(self._refused_row(model.model_id, params, exc))
                continue
            rows.append(self._talagrand_row(report, model.model_id, params))
        return rows

    # ------------------------------------------------------------------
    # сертификаты затухающего градиента
    # ------------------------------------------------------------------

    def run_lsi(self) -> List[ReportRow]:
        model = self._model()
        rows = []
        for F in self._functionals():
            result = lsi_gap(model, F, self.config.ensemble_spec(), self.chunk_size, self.workers)
            ratio = result.lhs / result.rhs if result.rhs > 0 else float('nan')
            rows.append(self._row(model.model_id, {'F': F.label, 'gap': result.estimate, **F.params},
                                  lhs=result.lhs, rhs=result.rhs, constant=2.0, se=result.se, ratio=ratio,
                                  passed=result.passed, exclusion_fraction=result.exclusion_fraction))
        return rows

    def _direction(self, model: ManifoldModel) -> np.ndarray:
        if self.config.direction is None:
            return np.eye(model.dimension)[0]
        direction = np.asarray(self.config.direction, dtype=float)
        if direction.shape != (model.dimension,):
            raise ConfigError(f"Направление h должно иметь размерность {model.dimension}", "direction")
        return direction

    def run_ibp(self) -> List[ReportRow]:
        model = self._model()
        e = self.config.ensemble
        h = CameronMartinPath.constant_direction(time_grid(e.horizon, e.n_steps), self._direction(model))
        rows = []
        for F in self._functionals():
            result = ibp_residual(model, F, h, self.config.ensemble_spec(), self.chunk_size, self.workers)
            rows.append(self._row(model.model_id, {'F': F.label, 'residual': result.estimate, **F.params},
                                  lhs=result.lhs, rhs=result.rhs, se=result.se, passed=result.passed,
                                  exclusion_fraction=result.exclusion_fraction))
        return rows

    def run_energy_bound(self) -> List[ReportRow]:
        model = self._model()
        K = curvature_constant(self.config, model)
        T = self.config.ensemble.horizon
        if self.config.functionals:
            functionals = self._functionals()
        else:
            functionals = [smooth_bounded_functional(T, model.ambient_dimension, n_slots=2 + j % 3, seed=j)
                           for j in range(ENERGY_FUNCTIONALS)]
        count = len(functionals)

        def compute(bundle: PathBundle):
            flow = solve_damped_flow_bundle(bundle)
            lhs = np.empty((bundle.size, count))
            rhs = np.empty((bundle.size, count))
            for j, F in enumerate(functionals):
                lhs[:, j], rhs[:, j], _ = damped_energy_bound(F, bundle, flow, K, T)
            return {'lhs': lhs, 'rhs': rhs}

        with Timer("Поточечная оценка энергии"):
            data = simulate_ensemble(model, self.config.ensemble_spec(),
                                     reducer=lambda b: scatter_valid(b, compute, {'lhs': (count,), 'rhs': (count,)}),
                                     chunk_size=self.chunk_size, workers=self.workers)
        mask = np.all(np.isfinite(data['lhs']), axis=-1)
        exclusion = 1.0 - float(np.mean(mask))
        rows = []
        for j, F in enumerate(functionals):
            lhs, rhs = data['lhs'][mask, j], data['rhs'][mask, j]
            ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
            worst = int(np.argmax(ratios)) if ratios.size else 0
            passed = bool(np.all(lhs <= rhs * (1 + 1e-6) + 1e-15)) and ratios.size > 0
            rows.append(self._row(model.model_id, {'K': K, 'F': F.label, **F.params},
                                  lhs=float(lhs[worst]) if lhs.size else None,
                                  rhs=float(rhs[worst]) if rhs.size else None,
                                  constant=energy_constant(max(K, 0.0), T),
                                  ratio=float(ratios[worst]) if ratios.size else None,
                                  passed=passed, exclusion_fraction=exclusion))
        status = "✓" if all(r.passed for r in rows) else "✗"
        logger.info(f"{status} Поточечная оценка энергии для {count} функционалов")
        return rows

    def run_ai_ellipticity(self) -> List[ReportRow]:
        model = self._model()
        settings = self.config.conditional_metric
        partition = np.asarray(self.config.partition or [self.config.ensemble.horizon], dtype=float)
        anchor = (np.asarray(settings.anchor, dtype=float) if settings.anchor is not None
                  else np.tile(model.origin, (partition.size, 1)))
        if anchor.shape != (partition.size, model.ambient_dimension):
            raise ConfigError("Точка z должна иметь по точке на каждый момент разбиения",
                              "conditional_metric.anchor")
        samples = conditional_samples(model, partition, self.config.ensemble_spec(), self.chunk_size,
                                      self.workers)
        metric = estimate_conditional_metric(model, partition, anchor, bandwidth=settings.bandwidth,
                                             samples=samples)
        K1 = settings.K1 if settings.K1 is not None else model.curvature_ceiling
        if not np.isfinite(K1):
            raise ConfigError("Для модели нужна явная верхняя оценка K1", "conditional_metric.K1")
        report = ellipticity_floor(metric, K1, seed=self.config.ensemble.seed)
        common = {'partition': partition.tolist(), 'ess': metric.effective_sample_size,
                  'bandwidth': metric.bandwidth, 'reliable': metric.reliable}
        rows = [self._row(model.model_id, {**common, 'check': 'ellipticity', 'K1': K1,
                                           'isotropic_ratio': report.isotropic_ratio},
                          lhs=report.ratio * report.floor, rhs=report.floor, ratio=report.ratio,
                          passed=report.passed and metric.reliable,
                          exclusion_fraction=samples.exclusion_fraction)]
        expected = self._closed_form_metric(partition)
        if expected is not None:
            error = float(np.max(np.abs(metric.matrix - expected)) / np.max(np.abs(expected)))
            rows.append(self._row(model.model_id, {**common, 'check': 'closed_form'},
                                  lhs=float(np.trace(metric.matrix)), rhs=float(np.trace(expected)),
                                  ratio=error, passed=error <= self.tolerances['closed_form'] and metric.reliable,
                                  exclusion_fraction=samples.exclusion_fraction))
        return rows

    def _closed_form_metric(self, partition: np.ndarray) -> Optional[np.ndarray]:
        """A^I для одного момента на ℝ^d без сноса и для OU"""
        model_config = self.config.model
        if model_config.kind != 'euclidean' or partition.size != 1:
            return None
        s = float(partition[0])
        eye = np.eye(model_config.dimension)
        if model_config.drift.kind == 'zero':
            return s * eye
        if model_config.drift.kind == 'ou':
            lam = model_config.drift.lam
            return -np.expm1(-lam * s) / lam * eye
        return None

    # ------------------------------------------------------------------
    # каплинг и пример со взрывом
    # ------------------------------------------------------------------

    def run_coupling(self) -> List[ReportRow]:
        model = self._model()
        K = curvature_constant(self.config, model)
        e = self.config.ensemble
        settings = self.config.coupling
        report = coupling_report(model, K, settings.rho0, e.n_paths, e.horizon, e.n_steps, e.seed,
                                 settings.tolerance, settings.max_abort, self.chunk_size, self.workers)
        return [self._row(model.model_id, {'K': K, 'rho0': row.rho0},
                          lhs=row.max_ratio, rhs=1.0 + settings.tolerance, ratio=row.max_ratio,
                          passed=row.passed, exclusion_fraction=row.abort_fraction)
                for row in report.rows]

    def run_example11(self) -> List[ReportRow]:
        e = self.config.ensemble
        settings = self.config.example11
        report = example11_sweep(settings.deltas, e.horizon, e.n_paths, settings.lambdas,
                                 dimension=self.config.model.dimension, n_steps=e.n_steps, seed=e.seed,
                                 explosion_threshold=settings.explosion_threshold,
                                 stability_tolerance=settings.stability_tolerance,
                                 explosion_radius=self.config.model.explosion_threshold,
                                 chunk_size=self.chunk_size, workers=self.workers)
        rows = []
        for delta, fraction in report.explosion.items():
            explosive = delta > 1.0
            rhs = settings.explosion_threshold if explosive else 0.0
            passed = fraction >= rhs if explosive else fraction == 0.0
            rows.append(self._row(f"euclidean(power,delta={delta:g})",
                                  {'delta': delta, 'check': 'explosion', 'adaptive': explosive},
                                  lhs=fraction, rhs=rhs, passed=passed, exclusion_fraction=fraction))
        for point in report.points:
            params = {'delta': point.delta, 'lambda': point.lam, 'check': 'exp_moment',
                      'status': 'divergent' if point.explosive else ('stable' if point.stable else 'unstable')}
            if point.explosive:
                rows.append(self._row(f"euclidean(power,delta={point.delta:g})", params, passed=True,
                                      exclusion_fraction=point.explosion_fraction))
                continue
            rows.append(self._row(f"euclidean(power,delta={point.delta:g})", params,
                                  lhs=point.estimate, rhs=point.estimate_half, ratio=point.change,
                                  passed=point.stable, exclusion_fraction=point.explosion_fraction))
        return rows

    # ------------------------------------------------------------------
    # конформные проверки
    # ------------------------------------------------------------------

    def _chart_model(self) -> ManifoldModel:
        model = self._model()
        return model.chart_view() if model.kind == 'sphere' else model

    def run_conformal_check(self) -> List[ReportRow]:
        model = self._chart_model()
        settings = self.config.conformal
        seed = self.config.ensemble.seed
        d = model.dimension
        rows = []

        factor = build_factor(settings.factor, model)
        radii = settings.radii or [0.1, 0.3, 0.6, 0.9]
        points = radial_sample(d, radii, settings.n_directions, seed)
        points = points[model.in_domain(points)]
        points = points[factor.value(points) > 1e-3]
        params = {'factor': factor.describe()}

        fields = random_vector_fields(d, 2 * settings.n_fields, seed)
        worst_deviation, worst_bound = 0.0, 0.0
        for X, Y in zip(fields[::2], fields[1::2]):
            report = conformal_connection_diff(model, factor, X, Y, points, settings.connection_tolerance)
            worst_deviation = max(worst_deviation, report.max_fd_deviation)
            worst_bound = max(worst_bound, report.max_bound_ratio)
        rows.append(self._row(model.model_id, {**params, 'check': 'connection'},
                              lhs=worst_deviation, rhs=settings.connection_tolerance, ratio=worst_bound,
                              passed=worst_deviation <= settings.connection_tolerance and worst_bound <= 1.0 + 1e-6))

        deviation = float(np.max(np.abs(conformal_ricci(model, factor, points) - ricci_oracle(model, factor, points))))
        logger.info(f"{'✓' if deviation <= settings.ricci_tolerance else '✗'} Конформный Риччи: "
                    f"отклонение от оракула {deviation:.2e}")
        rows.append(self._row(model.model_id, {**params, 'check': 'ricci'}, lhs=deviation,
                              rhs=settings.ricci_tolerance, passed=deviation <= settings.ricci_tolerance))

        containment = containment_probe(model, factor, fields[:settings.n_fields], points)
        rows.append(self._row(model.model_id, {**params, 'check': 'containment', 'sup_norm': containment.sup_norm},
                              lhs=containment.max_ratio, rhs=1.0, ratio=containment.max_ratio,
                              passed=containment.passed))
        rows.extend(self._curvature_trend(model, settings.n_values, settings.n_directions, seed))
        return rows

    def _curvature_trend(self, model: ManifoldModel, n_values, n_directions: int, seed: int) -> List[ReportRow]:
        """K_n по цепочке срезок и убывание дефекта от первого n к последнему"""
        psi = model.psi
        trends = []
        for n in sorted(n_values):
            radius = cutoff_chain(model, psi, n).support_radius
            radii = np.geomspace(0.05, 1.2 * radius, 40)
            points = radial_sample(model.dimension, radii, n_directions, seed)
            points = points[model.in_domain(points)]
            trends.append(approx_curvature_bound(model, psi, n, points))
        rows = []
        previous = None
        for trend in trends:
            defect = trend.defect_laplacian + trend.defect_gradient
            passed = previous is None or trend.K_n <= previous + 0.05 * abs(previous) + 1e-6
            rows.append(self._row(model.model_id, {'check': 'curvature_trend', 'n': trend.n,
                                                   'defect_laplacian': trend.defect_laplacian,
                                                   'defect_gradient': trend.defect_gradient,
                                                   'skipped': trend.n_skipped},
                                  lhs=trend.K_n, rhs=previous, constant=defect, passed=passed))
            previous = trend.K_n
        if len(trends) > 1:
            first = trends[0].defect_laplacian + trends[0].defect_gradient
            last = trends[-1].defect_laplacian + trends[-1].defect_gradient
            rows.append(self._row(model.model_id, {'check': 'defect_decay', 'n_first': trends[0].n,
                                                   'n_last': trends[-1].n},
                                  lhs=last, rhs=0.5 * first, ratio=last / first if first > 0 else 0.0,
                                  passed=last <= 0.5 * first))
        return rows

    def run_laplacian_comparison(self) -> List[ReportRow]:
        model = self._model()
        K = curvature_constant(self.config, model)
        report = laplacian_comparison(model, K, model.psi, self.config.laplacian.radii)
        return [self._row(model.model_id, {'K': K, 'psi': model.psi.describe(),
                                           'ratio_smooth': report.max_ratio_smooth},
                          lhs=report.max_ratio, rhs=1.0, ratio=max(report.max_ratio, report.max_ratio_smooth),
                          passed=report.passed)]


def run_experiment(config: ExperimentConfig, workers: int = 1, chunk_size: int = 256,
                   tolerances: Optional[Dict[str, float]] = None) -> List[ReportRow]:
    """Строки отчета для эксперимента из конфигурации"""
    return ExperimentRunner(config, workers, chunk_size, tolerances).run()
