from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import json
import logging

import numpy as np
import sympy

from ..config import Config

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Приводит numpy- и sympy-значения к типам, которые понимает json."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, sympy.Basic):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


class ReportStore:
    '''
    Класс ReportStore сохраняет отчёты экспериментов: JSON с версией схемы,
    полной конфигурацией и объявлениями независимости символов, плюс CSV-кривые.
    '''
    def __init__(self, base_dir: Optional[Path] = None):
        self.base_dir = Path(base_dir) if base_dir is not None else Config.BASE_DIR
        self.curves_dir = self.base_dir / "curves"
        self.rasters_dir = self.base_dir / "rasters"

    def build_report(self, command: str, result: Dict[str, Any], config: Dict[str, Any],
                     declarations: Optional[Dict[str, str]] = None,
                     created_at: Optional[str] = None) -> Dict[str, Any]:
        return {
            "schema_version": Config.SCHEMA_VERSION,
            "command": command,
            "created_at": created_at or datetime.now(timezone.utc).isoformat(),
            "config": to_jsonable(config),
            "independence_declarations": to_jsonable(declarations or {}),
            "result": to_jsonable(result),
        }

    def save(self, report: Dict[str, Any], path: Path) -> Path:
        # Ключи сортируются: одинаковые прогоны дают одинаковые файлы
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(report), f, sort_keys=True, indent=2, ensure_ascii=False)
            f.write("\n")
        logger.info(f"Отчёт сохранён: {path}")
        return path

    def load(self, path: Path) -> Dict[str, Any]:
        with open(path, "r", encoding="utf-8") as f:
            report = json.load(f)
        version = report.get("schema_version")
        if version != Config.SCHEMA_VERSION:
            raise ValueError(f"Неподдерживаемая версия схемы отчёта: {version}")
        return report

    def save_curve(self, name: str, rows: Sequence[Sequence[float]], columns: Sequence[str] = ("step", "fraction")) -> Path:
        '''
        CSV-кривая; первая колонка целая (шаг), остальные числа с плавающей точкой.
        '''
        path = self.curves_dir / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
        fmt = ["%d"] + ["%.12g"] * (len(columns) - 1) if columns[0] == "step" else ["%.17g"] * len(columns)
        np.savetxt(path, data, delimiter=",", header=",".join(columns), comments="", fmt=fmt)
        logger.debug(f"Кривая {name}: {len(data)} строк в {path}")
        return path

    def load_curve(self, path: Path) -> np.ndarray:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)

    def saved_curves(self) -> List[Path]:
        if not self.curves_dir.exists():
            return []
        return sorted(self.curves_dir.glob("*.csv"))
