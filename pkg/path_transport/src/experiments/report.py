"""
Строки отчета и запись CSV
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.10g'


@dataclass
class ReportRow:
    """Одна проверка эксперимента; порядок полей — порядок колонок CSV"""

    experiment: str
    model: str
    params: Dict[str, object] = field(default_factory=dict)
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    constant: Optional[float] = None
    se: Optional[float] = None
    control: Optional[float] = None
    ratio: Optional[float] = None
    passed: bool = True
    wall_time: Optional[float] = None
    exclusion_fraction: Optional[float] = None


COLUMNS = [f.name for f in fields(ReportRow)]


def _echo(params: Dict[str, object]) -> str:
    def plain(value):
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
        return value

    return json.dumps({k: plain(v) for k, v in params.items()}, sort_keys=True, ensure_ascii=False,
                      default=str)


def rows_to_frame(rows: Sequence[ReportRow], include_timing: bool = False) -> pd.DataFrame:
    """
    Таблица отчета с фиксированным набором колонок

    Колонка wall_time пуста, если include_timing выключен.
    """
    records = []
    for row in rows:
        record = asdict(row)
        record['params'] = _echo(row.params)
        record['passed'] = bool(row.passed)
        if not include_timing:
            record['wall_time'] = None
        records.append(record)
    return pd.DataFrame.from_records(records, columns=COLUMNS)


def write_report(rows: Sequence[ReportRow], path: str, include_timing: bool = False,
                 gnuplot: bool = True) -> Path:
    """
    Запись CSV (и заготовки gnuplot рядом с ним)

    Args:
        rows: строки отчета
        path: путь к CSV
        include_timing: писать время выполнения
        gnuplot: создать <path>.gp

    Returns:
        Путь к CSV
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = rows_to_frame(rows, include_timing)
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"✓ Отчет сохранен: {out} ({len(frame)} строк)")
    if gnuplot:
        write_gnuplot_stub(out)
    return out


def write_gnuplot_stub(csv_path: Path) -> Path:
    """Скрипт gnuplot: lhs и rhs по номеру строки"""
    stub = csv_path.with_suffix(csv_path.suffix + '.gp')
    lhs = COLUMNS.index('lhs') + 1
    rhs = COLUMNS.index('rhs') + 1
    script = "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{csv_path.stem}'",
        "set xlabel 'row'",
        f"plot '{csv_path.name}' using 0:{lhs} with linespoints title 'lhs', \\",
        f"     '' using 0:{rhs} with linespoints title 'rhs'",
        "",
    ])
    stub.write_text(script, encoding='utf-8')
    return stub


def all_passed(rows: List[ReportRow]) -> bool:
    return all(bool(row.passed) for row in rows)
