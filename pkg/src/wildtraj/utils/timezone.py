import re
from datetime import timedelta, timezone, tzinfo
from typing import Optional
from zoneinfo import ZoneInfo, available_timezones

from .logging import setup_logger

logger = setup_logger(__name__)

_OFFSET_RE = re.compile(r"^(?:UTC)?([+-])(\d{1,2})(?::?(\d{2}))?$")


def parse_utc_offset(value: str) -> timezone:
    """
    Разбирает фиксированное смещение вида '+02:00', '-0530', 'UTC+3'

    Args:
        value: Строка смещения

    Returns:
        timezone: Объект фиксированного смещения

    Raises:
        ValueError: Если строка не является смещением
    """
    match = _OFFSET_RE.match(value.strip())
    if not match:
        raise ValueError(f"Invalid UTC offset: {value!r}")
    sign, hours, minutes = match.groups()
    delta = timedelta(hours=int(hours), minutes=int(minutes or 0))
    if delta > timedelta(hours=14):
        raise ValueError(f"UTC offset out of range: {value!r}")
    return timezone(-delta if sign == "-" else delta)


def get_timezone(value: Optional[str] = None) -> tzinfo:
    """
    Часовой пояс для меток времени без явного смещения.

    По умолчанию UTC (так экспортирует Movebank). Принимает фиксированное
    смещение или идентификатор IANA.

    Args:
        value: Смещение, имя зоны или None

    Returns:
        tzinfo: Часовой пояс
    """
    if value is None or value.upper() in ("", "UTC", "Z"):
        return timezone.utc
    try:
        return parse_utc_offset(value)
    except ValueError:
        pass
    if value in available_timezones():
        logger.debug("Using IANA zone %s for naive timestamps", value)
        return ZoneInfo(value)
    raise ValueError(f"Unknown timezone or offset: {value!r}")
