"""Точка входа в приложение radarloc (CLI)."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import torch
from toolz import assoc_in

from radarloc import __version__
from radarloc.config import core as config
from radarloc.config.schema import SCENARIO_IDS, AppConfig
from radarloc.config.settings import get_settings
from radarloc.experiments import runners
from radarloc.utils.core import format_error
from radarloc.utils.logging import configure_logging

logger = logging.getLogger(__name__)


def _common_arguments() -> argparse.ArgumentParser:
    """Общие флаги, допустимые и до, и после подкоманды."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", default=argparse.SUPPRESS, help="Путь к файлу конфигурации (YAML или JSON)")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Глобальный seed")
    parser.add_argument("--out", default=argparse.SUPPRESS, help="Каталог результатов")
    parser.add_argument("--scenario", choices=SCENARIO_IDS, default=argparse.SUPPRESS, help="Сценарий O, N, W, S или E")
    parser.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="Число потоков синтеза")
    parser.add_argument("--log-level", default=argparse.SUPPRESS, help="Уровень логирования")
    parser.add_argument(
        "--deterministic", action="store_true", default=argparse.SUPPRESS,
        help="Однопоточный детерминированный режим",
    )
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Парсер аргументов командной строки."""
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="radarloc",
        description="Локализация целей по тепловым картам NAMF: синтез, обучение и эксперименты",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    generate = subparsers.add_parser("generate", parents=[common], help="Генерация набора тепловых карт")
    generate.add_argument("--doppler", action="store_true", help="Доплеровский вариант (ось скорости)")
    generate.add_argument("--scnr", type=float, default=None, help="Среднее выходное ОСПШ, дБ")

    train = subparsers.add_parser("train", parents=[common], help="Обучение сети на наборе данных")
    train.add_argument("--dataset", required=True, help="Файл набора данных RLHM")

    evaluate = subparsers.add_parser("evaluate", parents=[common], help="Оценка сети и классических методов")
    evaluate.add_argument("--dataset", required=True, help="Файл набора данных RLHM")
    evaluate.add_argument("--checkpoint", required=True, help="Контрольная точка RLNN")

    for name, description in EXPERIMENT_HELP.items():
        subparsers.add_parser(name, parents=[common], help=description)

    return parser


EXPERIMENT_HELP: Dict[str, str] = {
    "threshold": "Порог срыва NAMF",
    "sweep-scnr": "Ошибки методов в зависимости от ОСПШ",
    "sweep-size": "Ошибка CNN в зависимости от размера набора",
    "mismatch": "Рассогласование сценариев и хордовое расстояние",
    "fsl": "Дообучение на малой выборке смещенных сценариев",
    "doppler": "Доплеровский вариант с оценкой скорости",
}

# Подкоманда задает тег эксперимента experiments.experiment
EXPERIMENT_TAGS: Dict[str, str] = {
    "threshold": "threshold",
    "sweep-scnr": "scnr_sweep",
    "sweep-size": "size_sweep",
    "mismatch": "mismatch",
    "fsl": "fsl",
    "doppler": "doppler",
}

EXPERIMENT_RUNNERS: Dict[str, Callable[..., List[Dict[str, Any]]]] = {
    "threshold": runners.run_threshold_experiment,
    "scnr_sweep": runners.run_scnr_sweep,
    "size_sweep": runners.run_size_sweep,
    "mismatch": runners.run_mismatch_experiment,
    "fsl": runners.run_fsl_experiment,
    "doppler": runners.run_doppler_experiment,
}


# Флаги командной строки и пути ключей конфигурации, которые они задают
ARGUMENT_OVERRIDES: Tuple[Tuple[str, Tuple[str, ...]], ...] = (
    ("seed", ("experiments", "seed")),
    ("seed", ("training", "seed")),
    ("out", ("experiments", "output_dir")),
    ("scenario", ("experiments", "scenario")),
)


def load_app_config(args: argparse.Namespace) -> AppConfig:
    """Конфигурация из файла с переопределениями из аргументов.

    --seed задает и seed экспериментов, и seed инициализации и
    перемешивания при обучении сети. Подкоманда эксперимента задает
    тег experiments.experiment, по которому выбирается запуск.

    Args:
        args: Разобранные аргументы командной строки

    Returns:
        AppConfig: Проверенная конфигурация
    """
    base = config.load_config(getattr(args, "config", None))

    overrides: Dict[str, Any] = {}
    for name, path in ARGUMENT_OVERRIDES:
        if hasattr(args, name):
            overrides = assoc_in(overrides, path, getattr(args, name))
    command = getattr(args, "command", None)
    if command in EXPERIMENT_TAGS:
        overrides = assoc_in(overrides, ("experiments", "experiment"), EXPERIMENT_TAGS[command])
    if not overrides:
        return base
    return config.build_config(base.model_dump(), overrides)


def configure_determinism(deterministic: bool) -> None:
    """Однопоточный torch и детерминированные алгоритмы."""
    if not deterministic:
        return
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)
    logger.info("Включен детерминированный режим")


def run_command(args: argparse.Namespace) -> None:
    """Выполнение подкоманды."""
    settings = get_settings()
    app_config = load_app_config(args)
    deterministic = getattr(args, "deterministic", False) or settings.deterministic
    workers = 1 if deterministic else max(1, getattr(args, "workers", settings.workers))
    configure_determinism(deterministic)

    output_dir = Path(app_config.experiments.output_dir)
    logger.info(f"Запуск команды {args.command}, результаты в {output_dir}")

    if args.command == "generate":
        path = runners.run_generate(app_config, output_dir, workers, doppler=args.doppler, scnr_db=args.scnr)
        logger.info(f"Набор данных записан: {path}")
    elif args.command == "train":
        path = runners.run_train(app_config, Path(args.dataset), output_dir)
        logger.info(f"Контрольная точка записана: {path}")
    elif args.command == "evaluate":
        runners.run_evaluate(app_config, Path(args.dataset), Path(args.checkpoint), output_dir, workers)
    else:
        EXPERIMENT_RUNNERS[app_config.experiments.experiment](app_config, output_dir, workers)


def main(argv: Optional[List[str]] = None) -> int:
    """Основная функция для запуска приложения.

    Returns:
        int: Код завершения (0 при успехе, 1 при ошибке)
    """
    args = build_parser().parse_args(argv)
    configure_logging(getattr(args, "log_level", None))

    try:
        run_command(args)
    except Exception as e:
        logger.exception(f"Ошибка выполнения команды {args.command}")
        error_info = format_error(e)
        print(f"radarloc: {error_info['error_type']}: {error_info['error_message']}", file=sys.stderr)
        return 1

    logger.info(f"Команда {args.command} выполнена")
    return 0


if __name__ == "__main__":
    sys.exit(main())
