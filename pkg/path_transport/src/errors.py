"""
Иерархия исключений проекта
"""


class PathTransportError(Exception):
    """Базовое исключение пакета"""


class ConfigError(PathTransportError, ValueError):
    """Ошибка конфигурации эксперимента"""

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        prefix = f"[{field_path}] " if field_path else ""
        super().__init__(f"{prefix}{message}")


class ContractViolation(PathTransportError, ValueError):
    """Нарушено предусловие операции"""


class ChartDomainError(ContractViolation):
    """Точка или геодезическая вне области карты"""


class UnsupportedModelError(ContractViolation):
    """Операция не поддерживается данной моделью"""


class TransportCapError(ContractViolation):
    """Превышен лимит атомов точного решателя"""


class NumericFailure(PathTransportError, RuntimeError):
    """Численный сбой (код выхода 3)"""


class GeometryEvaluationError(NumericFailure):
    """Нефинитное значение геометрической величины"""

    def __init__(self, message: str, point=None):
        self.point = point
        super().__init__(f"{message} (точка: {point})")


class GeodesicSolverError(NumericFailure):
    """Геодезическая стрельба не сошлась"""

    def __init__(self, message: str, residual: float = float('nan')):
        self.residual = residual
        super().__init__(f"{message} (невязка: {residual:.3e})")


class FlowSolverError(NumericFailure):
    """Нефинитные элементы при интегрировании матричного потока"""

    def __init__(self, message: str, step: int = -1):
        self.step = step
        super().__init__(f"{message} (шаг: {step})")


class NearBoundaryError(NumericFailure):
    """Конформный множитель слишком мал у границы носителя"""


class CertificateRefused(PathTransportError):
    """Предпосылки сертификата не выполнены"""
