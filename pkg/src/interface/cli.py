"""Командная строка pmlab: разбор конфигурации, запуск эксперимента, код выхода."""
from typing import Any, Dict, Optional, Tuple
import json
import logging

import click

from .experiment_config import COMMANDS, ExperimentConfig
from .experiment_runner import EXIT_FAILURE, EXIT_VALIDATION, ExperimentRunner

logger = logging.getLogger(__name__)


def _read_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"Конфигурация должна быть JSON-объектом: {path}")
    return data


def _parse_matrix(text: str):
    rows = [row for row in text.split(";") if row.strip()]
    try:
        return [[int(v) for v in row.split(",")] for row in rows]
    except ValueError as e:
        raise ValueError(f"Матрица задаётся строками целых чисел через ';': {text}") from e


def _parse_symbols(pairs: Tuple[str, ...]) -> Dict[str, str]:
    symbols = {}
    for pair in pairs:
        name, sep, expression = pair.partition("=")
        if not sep:
            raise ValueError(f"Символ задаётся как имя=выражение: {pair}")
        symbols[name.strip()] = expression.strip()
    return symbols


def _execute(ctx: click.Context, data: Dict[str, Any], command: Optional[str]) -> int:
    options = ctx.obj
    if command is not None:
        data.setdefault("analysis", {})["command"] = command
        data.setdefault("output", {}).setdefault("name", command.replace("-", "_"))
    if options["output_dir"]:
        data.setdefault("output", {})["directory"] = options["output_dir"]
    config = ExperimentConfig.model_validate(data)
    if config.analysis.command is None:
        raise ValueError(f"В конфигурации не задана команда (analysis.command), доступны: {list(COMMANDS)}")
    runner = ExperimentRunner(config)
    report, code = runner.execute()
    click.echo(report["report_path"])
    return code


def _guarded(ctx: click.Context, load) -> None:
    '''
    Ошибки ввода дают код 2, непредвиденные ошибки дают код 1.
    '''
    try:
        code = load()
    except ValueError as e:
        logger.error(f"Ошибка валидации: {e}")
        click.echo(f"Ошибка валидации: {e}", err=True)
        ctx.exit(EXIT_VALIDATION)
    except Exception as e:
        logger.exception(f"Непредвиденная ошибка: {e}")
        ctx.exit(EXIT_FAILURE)
    ctx.exit(code)


@click.group()
@click.option("--verbose", is_flag=True, help="Подробный журнал (DEBUG).")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None,
              help="Каталог для отчётов и кривых.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, output_dir: Optional[str]):
    """Лаборатория псевдоминимальных динамических систем."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    ctx.obj = {"output_dir": output_dir}


@cli.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def run(ctx: click.Context, config_path: str):
    """Выполнить команду, заданную в analysis.command."""
    _guarded(ctx, lambda: _execute(ctx, _read_config(config_path), None))


def _register(command: str):
    @click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
    @click.pass_context
    def handler(ctx: click.Context, config_path: str):
        _guarded(ctx, lambda: _execute(ctx, _read_config(config_path), command))

    cli.command(command, help=f"Команда {command} по JSON-конфигурации.")(handler)


for _command in COMMANDS:
    if _command != "decide-affine":
        _register(_command)


@cli.command("decide-affine")
@click.argument("config_path", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--matrix", help="Матрица τ построчно: '1,0;1,1'.")
@click.option("--a", "shift", help="Сдвиг через запятую: '1/2,@theta'.")
@click.option("--symbol", "symbols", multiple=True, help="Объявление символа имя=выражение.")
@click.option("--power", type=int, default=None, help="Решать минимальность степени T^k.")
@click.pass_context
def decide_affine(ctx: click.Context, config_path: Optional[str], matrix: Optional[str],
                  shift: Optional[str], symbols: Tuple[str, ...], power: Optional[int]):
    """Точный решатель минимальности аффинного отображения тора."""
    def load():
        data = _read_config(config_path)
        if matrix is not None or shift is not None:
            if matrix is None or shift is None:
                raise ValueError("Нужны оба параметра --matrix и --a")
            data["symbols"] = {**data.get("symbols", {}), **_parse_symbols(symbols)}
            data["system"] = {
                "kind": "affine",
                "matrix": _parse_matrix(matrix),
                "a": [v.strip() for v in shift.split(",")],
            }
        if power is not None:
            data.setdefault("analysis", {})["power"] = power
        return _execute(ctx, data, "decide-affine")

    _guarded(ctx, load)


def main():
    cli(prog_name="pmlab")


if __name__ == "__main__":
    main()
