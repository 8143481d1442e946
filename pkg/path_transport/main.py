"""
Точка входа: запуск эксперимента по YAML-конфигурации

Пример:
    python main.py talagrand --config experiments/talagrand.yaml --out reports/talagrand.csv --workers 4
"""
import argparse
import logging
import sys
from pathlib import Path

# Добавляем текущую директорию в PYTHONPATH
sys.path.insert(0, str(Path(__file__).parent))

from src.errors import CertificateRefused, ConfigError, NumericFailure, PathTransportError
from src.experiments import (EXPERIMENT_KINDS, ExperimentRunner, all_passed, load_experiment_config, load_settings,
                             write_report)
from src.utils import ensure_directories, setup_logging

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CERTIFICATE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Сертификаты транспортных неравенств на пространстве путей")
    parser.add_argument('experiment', choices=EXPERIMENT_KINDS, help="вид эксперимента")
    parser.add_argument('--config', required=True, help="YAML эксперимента")
    parser.add_argument('--out', default=None, help="путь к CSV отчета")
    parser.add_argument('--workers', type=int, default=None, help="число потоков")
    parser.add_argument('--seed', type=int, default=None, help="главное зерно (вместо значения из файла)")
    parser.add_argument('--settings', default="config.yaml", help="настройки запуска")
    return parser


def main(argv=None) -> int:
    """
    Главная функция: загрузка, запуск, запись отчета

    Returns:
        0 — все проверки пройдены, 1 — сертификат не пройден,
        2 — ошибка конфигурации, 3 — численный сбой
    """
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.settings)
    except ConfigError as e:
        setup_logging()
        logger.error(f"Ошибка настроек запуска: {e}")
        return EXIT_CONFIG_ERROR
    setup_logging(settings.logging.model_dump())
    workers = args.workers if args.workers is not None else settings.performance.workers
    chunk_size = settings.performance.chunk_size

    try:
        config = load_experiment_config(args.config, experiment=args.experiment, seed=args.seed)
    except ConfigError as e:
        logger.error(f"Ошибка конфигурации: {e}")
        return EXIT_CONFIG_ERROR

    out = args.out or config.output or str(Path(settings.output.reports_path) / f"{config.id}.csv")
    if args.out is None and config.output is None:
        ensure_directories(settings.output.reports_path)

    runner = ExperimentRunner(config, workers=workers, chunk_size=chunk_size,
                              tolerances=settings.tolerances.model_dump())
    code = EXIT_PASS
    try:
        runner.run()
        if not all_passed(runner.completed):
            code = EXIT_CERTIFICATE_FAILURE
    except CertificateRefused as e:
        logger.error(f"Сертификат отклонен: {e}")
        code = EXIT_CERTIFICATE_FAILURE
    except NumericFailure as e:
        logger.error(f"Численный сбой: {e}", exc_info=True)
        code = EXIT_NUMERIC_FAILURE
    except (ConfigError, PathTransportError) as e:
        logger.error(f"Ошибка конфигурации: {e}", exc_info=True)
        code = EXIT_CONFIG_ERROR
    except Exception as e:
        logger.error(f"Критическая ошибка при выполнении эксперимента: {e}", exc_info=True)
        code = EXIT_NUMERIC_FAILURE

    if runner.completed:
        write_report(runner.completed, out, include_timing=config.report.include_timing,
                     gnuplot=config.report.gnuplot)
    logger.info(f"Код завершения: {code}")
    return code


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
