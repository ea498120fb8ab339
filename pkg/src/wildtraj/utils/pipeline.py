import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from rich import print
from rich.table import Table

from ..core.errors import WildtrajError
from .logging import setup_logger

logger = setup_logger(__name__)


@dataclass
class RunContext:
    """
    Общее состояние этапов одного эксперимента.

    Attributes:
        config: Эффективная конфигурация (RunConfig)
        out_dir: Каталог эксперимента
        artifacts: Промежуточные результаты этапов по имени
        quiet: Не печатать таблицы
        log_level: Уровень логирования для воркеров
    """
    config: Any
    out_dir: Any
    artifacts: Dict[str, Any] = field(default_factory=dict)
    quiet: bool = False
    log_level: int = logging.INFO


class Stage(ABC):
    """Абстрактный класс для этапов пайплайна"""

    def __init__(self) -> None:
        self.stage_name = self.__class__.__name__.replace("Stage", "")

    @abstractmethod
    async def run(self, ctx: RunContext) -> bool:
        """
        Выполняет этап обработки

        Args:
            ctx: Контекст эксперимента

        Returns:
            bool: True если этап выполнен успешно, False в противном случае
        """


class StageChain:
    """Цепочка этапов обработки с поддержкой оператора >>"""

    def __init__(self, stages: Optional[List[Stage]] = None, quiet: bool = False):
        self.stages = stages or []
        self.quiet = quiet
        self.error: Optional[WildtrajError] = None
        self.failed_stage: Optional[str] = None

    def __rshift__(self, next_stage: Union[Stage, "StageChain"]) -> "StageChain":
        if isinstance(next_stage, StageChain):
            return StageChain(self.stages + next_stage.stages, quiet=self.quiet)
        return StageChain(self.stages + [next_stage], quiet=self.quiet)

    def _print(self, text: str) -> None:
        if not self.quiet:
            print(text)

    async def run(self, ctx: RunContext, start_from: Optional[str] = None) -> bool:
        """
        Запускает этапы по порядку

        Ошибки пайплайна (WildtrajError) не пробрасываются: цепочка сохраняет
        их в self.error, чтобы CLI выбрал код возврата.

        Args:
            ctx: Контекст эксперимента
            start_from: Имя этапа, с которого начать (опционально)

        Returns:
            bool: True если все этапы выполнены успешно
        """
        start_idx = 0
        if start_from:
            names = [stage.stage_name for stage in self.stages]
            if start_from not in names:
                self._print(f"[bold red]Stage {start_from} is not part of the pipeline[/bold red]")
                return False
            start_idx = names.index(start_from)

        for stage in self.stages[start_idx:]:
            self._print(f"\n[bold blue]=== Stage: {stage.stage_name} ===[/bold blue]")
            try:
                success = await stage.run(ctx)
            except WildtrajError as e:
                self.error = e
                self.failed_stage = stage.stage_name
                logger.error("Stage %s failed: %s", stage.stage_name, e)
                self._print(f"[bold red]Stage {stage.stage_name} failed: {e}[/bold red]")
                return False
            if not success:
                self.failed_stage = stage.stage_name
                self._print(f"[bold yellow]Stopped at stage {stage.stage_name}[/bold yellow]")
                return False

        self._print("\n[bold green]Pipeline finished[/bold green]")
        return True


def print_table(rows: List[Dict[str, Any]], columns: List[str], title: str = "",
                quiet: bool = False) -> None:
    """Печатает строки таблицей rich; числовые колонки выравниваются вправо"""
    if quiet:
        return
    table = Table(title=title or None)
    for column in columns:
        numeric = bool(rows) and isinstance(rows[0].get(column), (int, float))
        table.add_column(column, justify="right" if numeric else "left")
    for row in rows:
        table.add_row(*(str(row.get(column, "")) for column in columns))
    print(table)
