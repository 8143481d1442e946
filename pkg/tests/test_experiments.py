from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from main import EXIT_CONFIG_ERROR, EXIT_PASS, main
from src.errors import ConfigError
from src.experiments import (
    COLUMNS,
    ExperimentRunner,
    ReportRow,
    all_passed,
    build_model,
    curvature_constant,
    example11_sweep,
    exponential_moment,
    load_experiment_config,
    load_settings,
    parse_experiment_config,
    rows_to_frame,
    run_experiment,
    write_report,
)
from src.experiments.diagnostics import displaced_start
from src.geometry import EuclideanModel
from src.utils import Timer, load_config

TRIVIAL = {
    'id': 'trivial',
    'experiment': 'talagrand',
    'model': {'kind': 'euclidean', 'dimension': 2},
    'ensemble': {'horizon': 1.0, 'n_steps': 32, 'n_paths': 64, 'seed': 7},
    'functional': {'kind': 'constant'},
    'K': 0.0,
}


def write_yaml(path, data) -> str:
    path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding='utf-8')
    return str(path)


class TestConfig:
    """Схема документа эксперимента"""

    def test_unknown_key_rejected(self):
        """Опечатка в ключе — ошибка с путем к полю"""
        data = {**TRIVIAL, 'ensemble': {**TRIVIAL['ensemble'], 'n_path': 64}}
        with pytest.raises(ConfigError) as info:
            parse_experiment_config(data)
        assert info.value.field_path == 'ensemble.n_path'

    def test_too_few_steps_rejected(self):
        data = {**TRIVIAL, 'ensemble': {**TRIVIAL['ensemble'], 'n_steps': 8}}
        with pytest.raises(ConfigError) as info:
            parse_experiment_config(data)
        assert info.value.field_path == 'ensemble.n_steps'

    def test_seed_is_required(self):
        data = {**TRIVIAL, 'ensemble': {'horizon': 1.0}}
        with pytest.raises(ConfigError) as info:
            parse_experiment_config(data)
        assert info.value.field_path == 'ensemble.seed'

    def test_partition_must_increase(self):
        with pytest.raises(ConfigError):
            parse_experiment_config({**TRIVIAL, 'partition': [0.5, 0.25]})
        with pytest.raises(ConfigError):
            parse_experiment_config({**TRIVIAL, 'partition': [0.5, 2.0]})

    def test_conformal_needs_base(self):
        with pytest.raises(ConfigError):
            parse_experiment_config({**TRIVIAL, 'model': {'kind': 'conformal'}})

    def test_ensemble_spec(self):
        spec = parse_experiment_config(TRIVIAL).ensemble_spec()
        assert (spec.horizon, spec.n_steps, spec.n_paths, spec.seed) == (1.0, 32, 64, 7)

    def test_subcommand_must_match_file(self, tmp_path):
        path = write_yaml(tmp_path / 'trivial.yaml', TRIVIAL)
        with pytest.raises(ConfigError) as info:
            load_experiment_config(path, experiment='lsi')
        assert info.value.field_path == 'experiment'
        config = load_experiment_config(path, experiment='talagrand', seed=11)
        assert config.ensemble.seed == 11

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(str(tmp_path / 'absent.yaml'))


class TestModelBuilding:
    """Сборка модели по разделу model"""

    def test_drift_only_on_euclidean(self):
        config = parse_experiment_config({**TRIVIAL, 'model': {'kind': 'hyperbolic', 'drift': {'kind': 'ou'}}})
        with pytest.raises(ConfigError):
            build_model(config.model)

    def test_curvature_constant(self):
        """K берется из модели, если не задан явно"""
        config = parse_experiment_config({k: v for k, v in TRIVIAL.items() if k != 'K'})
        assert curvature_constant(config, build_model(config.model)) == pytest.approx(0.0)
        power = parse_experiment_config({
            **{k: v for k, v in TRIVIAL.items() if k != 'K'},
            'model': {'kind': 'euclidean', 'drift': {'kind': 'power', 'delta': 2.0}},
        })
        with pytest.raises(ConfigError):
            curvature_constant(power, build_model(power.model))


class TestReport:
    """Формат CSV отчета"""

    def test_column_order(self):
        assert COLUMNS == ['experiment', 'model', 'params', 'lhs', 'rhs', 'constant', 'se', 'control',
                           'ratio', 'passed', 'wall_time', 'exclusion_fraction']

    def test_timing_blank_by_default(self):
        rows = [ReportRow('a:talagrand', 'euclidean', {'seed': 1}, lhs=0.1, rhs=0.2, wall_time=3.5)]
        assert rows_to_frame(rows)['wall_time'].isna().all()
        assert rows_to_frame(rows, include_timing=True)['wall_time'].iloc[0] == 3.5

    def test_write_report(self, tmp_path):
        rows = [
            ReportRow('a:lsi', 'euclidean', {'seed': 1, 'b': 2}, lhs=1 / 3, rhs=0.5, passed=True),
            ReportRow('a:lsi', 'euclidean', {'seed': 1}, passed=False),
        ]
        out = write_report(rows, str(tmp_path / 'nested' / 'report.csv'))
        text = out.read_bytes().decode('utf-8')
        assert b'\r\n' not in out.read_bytes()
        assert text.splitlines()[0] == ','.join(COLUMNS)
        assert '0.3333333333' in text
        assert (tmp_path / 'nested' / 'report.csv.gp').exists()
        frame = pd.read_csv(out)
        assert list(frame['passed']) == [True, False]
        assert not all_passed(rows)


class TestRunner:
    """Запуск экспериментов целиком"""

    def test_trivial_talagrand(self):
        rows = run_experiment(parse_experiment_config(TRIVIAL))
        assert len(rows) == 1
        assert rows[0].passed
        assert rows[0].experiment == 'trivial:talagrand'
        assert rows[0].params['seed'] == 7

    def test_laplacian_comparison(self):
        config = parse_experiment_config({
            **TRIVIAL,
            'experiment': 'laplacian-comparison',
            'model': {'kind': 'euclidean', 'dimension': 3, 'psi': {'kind': 'affine', 'a': 1.0, 'b': 1.0}},
            'laplacian': {'radii': [1.0, 2.0, 4.0]},
        })
        runner = ExperimentRunner(config)
        rows = runner.run()
        assert all_passed(rows)
        assert runner.completed == rows

    def test_talagrand_row_ratio(self):
        """Колонка ratio — левая часть после вычитания контроля, деленная на правую"""
        config = parse_experiment_config({**TRIVIAL, 'functional': {'kind': 'tilt', 'theta': 0.5}})
        row = run_experiment(config)[0]
        assert row.control > 0.0
        assert row.params['lhs_corrected'] == pytest.approx(max(row.lhs - row.control, 0.0))
        assert row.ratio == pytest.approx(row.params['lhs_corrected'] / row.rhs)

    def test_rerun_is_byte_identical(self, tmp_path):
        """Повторный запуск с тем же зерном дает тот же CSV"""
        config = parse_experiment_config(TRIVIAL)
        first = write_report(run_experiment(config), str(tmp_path / 'first.csv'), gnuplot=False)
        second = write_report(run_experiment(config, workers=2), str(tmp_path / 'second.csv'), gnuplot=False)
        assert first.read_bytes() == second.read_bytes()


class TestMain:
    """Коды завершения командной строки"""

    def test_pass(self, tmp_path):
        config = write_yaml(tmp_path / 'trivial.yaml', TRIVIAL)
        out = tmp_path / 'report.csv'
        code = main(['talagrand', '--config', config, '--out', str(out),
                     '--settings', str(tmp_path / 'absent.yaml')])
        assert code == EXIT_PASS
        assert out.exists()

    def test_bad_config(self, tmp_path):
        config = write_yaml(tmp_path / 'bad.yaml', {**TRIVIAL, 'unknown': 1})
        code = main(['talagrand', '--config', config, '--out', str(tmp_path / 'report.csv'),
                     '--settings', str(tmp_path / 'absent.yaml')])
        assert code == EXIT_CONFIG_ERROR
        assert not (tmp_path / 'report.csv').exists()

    def test_bad_settings(self, tmp_path):
        settings = write_yaml(tmp_path / 'settings.yaml', {'performance': {'workers': 0}})
        config = write_yaml(tmp_path / 'trivial.yaml', TRIVIAL)
        code = main(['talagrand', '--config', config, '--out', str(tmp_path / 'report.csv'),
                     '--settings', settings])
        assert code == EXIT_CONFIG_ERROR


class TestSettings:
    """Настройки запуска config.yaml"""

    def test_defaults_without_file(self, tmp_path):
        settings = load_settings(str(tmp_path / 'absent.yaml'))
        assert settings.performance.workers == 1
        assert settings.performance.chunk_size == 256
        assert settings.output.reports_path == 'reports'
        assert settings.tolerances.talagrand == pytest.approx(0.15)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_yaml(tmp_path / 'settings.yaml', {'performance': {'worker': 4}})
        with pytest.raises(ConfigError) as info:
            load_settings(path)
        assert info.value.field_path == 'settings.performance.worker'

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("logging: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_config(str(path))
        assert info.value.field_path == "settings"

    def test_timer_keeps_elapsed_on_error(self):
        """Timer не глотает исключение и запоминает время"""
        with pytest.raises(RuntimeError):
            with Timer("Этап") as timer:
                raise RuntimeError("сбой")
        assert timer.elapsed >= 0.0

    def test_bundled_settings(self):
        """config.yaml проекта проходит схему"""
        path = Path(__file__).resolve().parent.parent / "path_transport" / "config.yaml"
        settings = load_settings(str(path))
        assert settings.logging.level == 'INFO'


class TestDiagnostics:
    """Дихотомия взрыва и стартовые точки каплинга"""

    def test_exponential_moment(self):
        """Значения e^{λ sup²} = [1, 1, 3, 3]: полная оценка 2, половина 1"""
        full, half, change = exponential_moment(np.array([0.0, 0.0, np.log(3.0), np.log(3.0)]), 1.0)
        assert full == pytest.approx(2.0)
        assert half == pytest.approx(1.0)
        assert change == pytest.approx(0.5)

    def test_subcritical_sweep_is_stable(self):
        """δ ≤ 1: взрывов нет, момент устойчив при удвоении выборки"""
        report = example11_sweep([0.5], horizon=1.0, n_paths=64, lambdas=[0.01], n_steps=32, seed=3)
        assert report.passed
        assert report.explosion[0.5] == 0.0
        point = report.points[0]
        assert point.stable and not point.explosive
        assert np.isfinite(point.estimate)

    @pytest.mark.heavy
    def test_supercritical_sweep_explodes(self):
        """δ = 2: почти все пути взрываются до T, момент помечается расходящимся"""
        report = example11_sweep([2.0], horizon=3.0, n_paths=256, lambdas=[0.01], n_steps=200, seed=3)
        assert report.passed
        assert report.explosion[2.0] >= 0.95
        point = report.points[0]
        assert point.explosive
        assert np.isinf(point.estimate)

    @pytest.mark.parametrize("rho0", [0.3, 1.0])
    def test_displaced_start(self, rho0, hyperbolic_model, sphere_model):
        """Стартовая точка Y₀ лежит на расстоянии ρ₀ от начала"""
        for model in (EuclideanModel(2), hyperbolic_model, sphere_model):
            y0 = displaced_start(model, rho0)
            assert model.distance(model.origin[None], y0[None])[0] == pytest.approx(rho0, rel=1e-9)

