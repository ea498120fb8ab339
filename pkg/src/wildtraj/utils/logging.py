import logging
import sys
from typing import Optional

DEFAULT_FORMAT = "[%(asctime)s] %(levelname)s [%(name)s] %(message)s"


def init_logging(level: int = logging.INFO, format_str: Optional[str] = None) -> None:
    """
    Инициализирует корневой логгер.

    Повторный вызов только меняет уровень: обработчик добавляется один раз,
    чтобы воркеры run-all не дублировали строки.

    Args:
        level: Уровень логирования.
        format_str: Формат сообщений. Если None, используется DEFAULT_FORMAT.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    if not root_logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(format_str or DEFAULT_FORMAT))
        root_logger.addHandler(handler)
    for handler in root_logger.handlers:
        handler.setLevel(level)


def level_from_flags(verbose: bool = False, quiet: bool = False) -> int:
    """Уровень логирования по флагам -v/-q командной строки"""
    if verbose:
        return logging.DEBUG
    if quiet:
        return logging.WARNING
    return logging.INFO


def setup_logger(
    name: str,
    level: Optional[int] = None,
    format_str: Optional[str] = None
) -> logging.Logger:
    """
    Создаёт и настраивает логгер для модуля.

    Args:
        name: Имя логгера (обычно __name__ модуля).
        level: Уровень логирования. Если None, наследуется от корневого логгера.
        format_str: Собственный формат. Если None, сообщения уходят в корневой обработчик.

    Returns:
        Настроенный логгер.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level if level is not None else logging.NOTSET)
    logger.propagate = True

    if format_str and not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(format_str))
        logger.addHandler(handler)
        # Собственный обработчик: не печатаем дважды через корень
        logger.propagate = False

    return logger
