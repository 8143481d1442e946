"""
Вспомогательные функции для проекта
"""

import logging
import math
import time
from pathlib import Path
from typing import Callable, Iterable, List, Sequence, Tuple

import colorlog
import numpy as np
import yaml
from joblib import Parallel, delayed
from tqdm import tqdm

from .errors import ConfigError

DEFAULT_LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_MASK64 = (1 << 64) - 1


def setup_logging(config: dict = None) -> None:
    """
    Настройка логирования для проекта

    Args:
        config: конфигурация логирования (level, format, file)
    """
    if config is None:
        config = {}

    log_level = getattr(logging, str(config.get('level', 'INFO')).upper(), logging.INFO)
    log_format = config.get('format', DEFAULT_LOG_FORMAT)

    console = logging.StreamHandler()
    console.setFormatter(colorlog.ColoredFormatter(
        '%(log_color)s' + log_format,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        }
    ))
    handlers = [console]

    log_file = config.get('file')
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter(log_format))
        handlers.append(file_handler)

    logging.basicConfig(level=log_level, handlers=handlers, force=True)


def load_config(config_path: str = "config.yaml") -> dict:
    """
    Словарь настроек запуска из YAML

    Отсутствующий файл дает пустой словарь (значения по умолчанию схемы).

    Raises:
        ConfigError: файл не разбирается как YAML или верхний уровень не словарь
    """
    path = Path(config_path)
    if not path.exists():
        logging.warning(f"Файл настроек {config_path} не найден, используем значения по умолчанию")
        return {}
    try:
        data = yaml.safe_load(path.read_text(encoding='utf-8'))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Некорректный YAML: {exc}", "settings") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("Настройки должны быть словарем", "settings")
    return data


def ensure_directories(reports_dir: str) -> None:
    """Создание каталога отчетов"""
    Path(reports_dir).mkdir(parents=True, exist_ok=True)
    logging.info(f"Директория создана/проверена: {reports_dir}")


class Timer:
    """
    Время этапа по монотонным часам; elapsed доступно после выхода из блока

    Пример:
        with Timer("Ансамбль") as timer:
            ...
        row.wall_time = timer.elapsed
    """

    def __init__(self, name: str = "Этап"):
        self.name = name
        self.elapsed = 0.0
        self._start = 0.0
        self.logger = logging.getLogger(__name__)

    def __enter__(self):
        self._start = time.perf_counter()
        self.logger.info(f"{self.name}: начато")
        return self

    def __exit__(self, exc_type, exc, tb):
        self.elapsed = time.perf_counter() - self._start
        if exc_type is None:
            self.logger.info(f"✓ {self.name}: {self.elapsed:.2f} с")
        else:
            self.logger.warning(f"✗ {self.name}: прервано через {self.elapsed:.2f} с ({exc_type.__name__})")
        return False


def mix_seed(master: int, index: int) -> int:
    """
    Детерминированное зерно пути: финализатор splitmix64 от (master, index)

    Args:
        master: главное зерно эксперимента
        index: номер пути в ансамбле

    Returns:
        64-битное зерно
    """
    z = (int(master) * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stable_mean(values: Iterable[float]) -> float:
    """Среднее с компенсированным суммированием (не зависит от порядка чанков)"""
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if values.size == 0:
        return float('nan')
    return math.fsum(values.ravel()) / values.size


def stable_std(values: np.ndarray) -> float:
    """Выборочное стандартное отклонение (ddof=1) через fsum"""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        return 0.0
    mean = stable_mean(values)
    return math.sqrt(math.fsum((values - mean) ** 2) / (values.size - 1))


def chunk_ranges(n_items: int, chunk_size: int) -> List[Tuple[int, int]]:
    """
    Разбиение [0, n_items) на чанки фиксированного размера

    Границы чанков не зависят от числа воркеров.
    """
    if chunk_size <= 0:
        raise ValueError("chunk_size должен быть положительным")
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def run_chunked(func: Callable[[int, int], object], n_items: int, chunk_size: int = 256,
                workers: int = 1, description: str = "Чанки") -> list:
    """
    Параллельное применение func(start, stop) к чанкам

    Args:
        func: функция чанка
        n_items: число элементов
        chunk_size: размер чанка
        workers: число потоков joblib
        description: подпись для прогресс-бара

    Returns:
        Результаты в порядке чанков
    """
    ranges = chunk_ranges(n_items, chunk_size)
    if workers <= 1 or len(ranges) == 1:
        iterator = tqdm(ranges, desc=description, disable=len(ranges) < 8, leave=False)
        return [func(start, stop) for start, stop in iterator]
    return Parallel(n_jobs=workers, prefer="threads")(
        delayed(func)(start, stop) for start, stop in ranges
    )


def concat_chunks(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Склейка результатов чанков по первой оси"""
    return np.concatenate(list(parts), axis=0)
