"""Assembly of the command modules and exit-code mapping."""

import sys
from typing import Annotated, List, Optional

import click
import typer

from app.cli.commands import evaluation, inference, pipeline, supervision, synth, train
from app.cli.common import err_console
from app.core.config import settings
from app.core.exceptions import EXIT_DATA, EXIT_USAGE, SelfHDRError
from app.core.logging import LOG_LEVEL_MAP, set_log_level, setup_logger
from app.schemas.reports import CommandResult

logger = setup_logger(__name__)

cli = typer.Typer(
    name=settings.APP_NAME,
    help="Self-supervised multi-exposure HDR reconstruction.",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


@cli.callback()
def main_options(
    log_level: Annotated[
        Optional[str],
        typer.Option("--log-level", help="DEBUG | INFO | WARNING | ERROR | CRITICAL"),
    ] = None,
) -> None:
    if log_level is None:
        return
    if log_level.upper() not in LOG_LEVEL_MAP:
        raise typer.BadParameter(f"unknown level {log_level!r}", param_hint="--log-level")
    set_log_level(log_level)


cli.command("synth")(synth.synth)
cli.command("build-supervision")(supervision.build_supervision)
cli.command("train")(train.train)
cli.command("infer")(inference.infer)
cli.command("eval")(evaluation.evaluate_cmd)
cli.command("pipeline")(pipeline.pipeline)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and return its exit code.

    0 success, 1 usage or configuration error, 2 data error, 3 numeric failure. Every
    non-zero code comes with a one-line diagnostic on stderr.
    """
    command = typer.main.get_command(cli)
    try:
        result = command.main(
            args=argv if argv is not None else sys.argv[1:],
            prog_name=settings.APP_NAME,
            standalone_mode=False,
        )
    except click.ClickException as e:
        err_console.print(f"usage error: {e.format_message()}", markup=False)
        return EXIT_USAGE
    except click.exceptions.Abort:
        err_console.print("aborted", markup=False)
        return EXIT_USAGE
    except SelfHDRError as e:
        logger.error(f"Command failed: {e.message}", extra={"exit_code": e.exit_code})
        err_console.print(f"error: {e.message}", markup=False)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O failure: {str(e)}")
        err_console.print(f"error: {str(e)}", markup=False)
        return EXIT_DATA

    if isinstance(result, CommandResult):
        return result.exit_code
    if isinstance(result, int):
        return result
    return 0
