"""
Command line interface.

``qareuse`` runs the analysis one stage at a time over a work directory
(``ingest-qa``, ``ingest-app``, ``detect``, ``attribute``, ``analyze``,
``report``) or end to end from a pipeline manifest (``run``).

Exit codes: 0 on success, 1 on a fatal input or configuration error, 2 when
the run completed with incomplete clone detection shards.
"""

import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import click

from .config import Config
from .exceptions import ConfigurationError, IncompleteShardsError, QAReuseError
from .pipeline import Pipeline, PipelineManifest
from .report import ReportFormat, print_summary
from .utils import print_table

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 1
EXIT_INCOMPLETE = 2


@dataclass
class CliState:
    settings: Config
    workdir: Path

    def pipeline(self) -> Pipeline:
        return Pipeline(self.workdir, self.settings)


def _fail(ctx: click.Context, message: str, code: int) -> None:
    click.echo(f"Error: {message}", err=True)
    ctx.exit(code)


def handle_errors(command: Callable) -> Callable:
    """Map package exceptions to exit codes"""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except IncompleteShardsError as exc:
            _fail(ctx, str(exc), EXIT_INCOMPLETE)
        except QAReuseError as exc:
            _fail(ctx, str(exc), EXIT_INPUT_ERROR)

    return wrapper


def apply_settings(state: CliState, **overrides: Any) -> Config:
    """Apply command flags (unset flags are ``None``) and validate"""
    try:
        state.settings.update(**overrides)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    state.settings.validate()
    return state.settings


def _echo_table(state: CliState, title: str, rows) -> None:
    if state.settings.show_progress:
        print_table(title, rows, ["Item", "Value"], echo=click.echo)


def _ingest_options(func: Callable) -> Callable:
    func = click.option("--tags", help="Comma separated tags to keep (default: java,android)")(func)
    func = click.option("--date-ceiling", help="Latest post creation date kept (ISO 8601)")(func)
    func = click.option("--min-lines", type=int, help="Minimum snippet lines (default: 10)")(func)
    return func


def _detect_options(func: Callable) -> Callable:
    func = click.option("--threshold", type=float,
                        help="Minimum similarity, inclusive (default: 0.70)")(func)
    func = click.option("--shard-size-qa", type=int,
                        help="Q&A snippets per shard (default: 2000)")(func)
    func = click.option("--shard-size-app", type=int,
                        help="App snippets per shard (default: 800)")(func)
    func = click.option("--workers", type=int, help="Worker processes (default: 1)")(func)
    return func


def _attribute_options(func: Callable) -> Callable:
    func = click.option("--match-fraction", type=float,
                        help="Share of snippet lines a commit history must add (default: 0.9)")(func)
    func = click.option("--ambiguity-days", type=int,
                        help="Days within which direction stays ambiguous (default: 2)")(func)
    return func


@click.group()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="INI configuration file")
@click.option("--profile", default="default", show_default=True,
              help="Profile section of the configuration file")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"],
                                               case_sensitive=False))
@click.option("--quiet", is_flag=True, help="No progress bars or summaries")
@click.option("--workdir", type=click.Path(file_okay=False), default="qareuse-work",
              show_default=True, help="Directory holding the stage outputs")
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[str], profile: str,
        log_level: Optional[str], quiet: bool, workdir: str) -> None:
    """Detect code reused between a Q&A site and apps, and its license issues"""
    settings = Config()
    try:
        if config_file:
            settings.load_file(config_file, profile)
        settings.update_from_env()
        settings.update(log_level=log_level.upper() if log_level else None,
                        show_progress=False if quiet else None)
    except (QAReuseError, ValueError) as exc:
        _fail(ctx, str(exc), EXIT_INPUT_ERROR)

    logging.basicConfig(level=settings.log_level, format=settings.log_format, force=True)
    ctx.obj = CliState(settings, Path(workdir))


@cli.command("ingest-qa")
@click.argument("dump")
@_ingest_options
@click.option("--inherit-question-tags", is_flag=True, default=None,
              help="Let answers inherit the tags of their question")
@click.pass_obj
@handle_errors
def ingest_qa(state: CliState, dump: str, tags: Optional[str], date_ceiling: Optional[str],
              min_lines: Optional[int], inherit_question_tags: Optional[bool]) -> None:
    """Extract code snippets from a posts dump (path or URL)"""
    apply_settings(state, required_tags=tags, date_ceiling=date_ceiling, min_lines=min_lines,
                   inherit_question_tags=inherit_question_tags)
    stats = state.pipeline().ingest_qa(dump)
    _echo_table(state, "Q&A ingestion", sorted(stats.to_dict().items()))


@cli.command("ingest-app")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--inconsistencies", type=click.Path(exists=True, dir_okay=False),
              help="CSV table of license-inconsistency ranges")
@click.option("--inconsistent-only", is_flag=True, default=None,
              help="Only cut fragments from files of the inconsistency table")
@click.option("--min-lines", type=int, help="Minimum fragment lines (default: 10)")
@click.pass_obj
@handle_errors
def ingest_app(state: CliState, manifest: str, inconsistencies: Optional[str],
               inconsistent_only: Optional[bool], min_lines: Optional[int]) -> None:
    """Scan release trees and index their histories"""
    apply_settings(state, inconsistent_files_only=inconsistent_only, min_lines=min_lines)
    summary = state.pipeline().ingest_app(manifest, inconsistencies)
    _echo_table(state, "App ingestion", sorted(summary.items()))


@cli.command()
@_detect_options
@click.option("--min-lines", type=int, help="Minimum snippet lines (default: 10)")
@click.pass_obj
@handle_errors
def detect(state: CliState, threshold: Optional[float], shard_size_qa: Optional[int],
           shard_size_app: Optional[int], workers: Optional[int],
           min_lines: Optional[int]) -> None:
    """Detect clone pairs between the Q&A and app corpora"""
    apply_settings(state, similarity_threshold=threshold, shard_size_qa=shard_size_qa,
                   shard_size_app=shard_size_app, workers=workers, min_lines=min_lines)
    pairs = state.pipeline().detect()
    _echo_table(state, "Clone detection", [["Clone pairs", len(pairs)]])


@cli.command()
@_attribute_options
@click.option("--review", type=click.Path(exists=True, dir_okay=False),
              help="Annotated review queue to import")
@click.pass_obj
@handle_errors
def attribute(state: CliState, match_fraction: Optional[float], ambiguity_days: Optional[int],
              review: Optional[str]) -> None:
    """Date app snippets and classify the reuse direction of each pair"""
    apply_settings(state, match_fraction=match_fraction, ambiguity_window_days=ambiguity_days)
    records = state.pipeline().attribute(review)
    rows = []
    for direction in ("REUSE_FROM_QA", "REUSE_TO_QA", "AMBIGUOUS"):
        rows.append([direction, sum(1 for r in records
                                    if r.direction and r.direction.value == direction)])
    rows.append(["UNDATED", sum(1 for r in records if r.direction is None)])
    _echo_table(state, "Attribution", rows)


@cli.command()
@click.pass_obj
@handle_errors
def analyze(state: CliState) -> None:
    """Apply the license rules and build the run report"""
    apply_settings(state)
    report = state.pipeline().analyze()
    if state.settings.show_progress:
        print_summary(report, echo=click.echo)


@cli.command()
@click.option("--out", type=click.Path(file_okay=False), default="report", show_default=True,
              help="Output directory")
@click.option("--format", "fmt", type=click.Choice(["JSON", "CSV_BUNDLE"], case_sensitive=False),
              default="JSON", show_default=True)
@click.pass_obj
@handle_errors
def report(state: CliState, out: str, fmt: str) -> None:
    """Write the run report"""
    for path in state.pipeline().report(out, ReportFormat(fmt.upper())):
        click.echo(str(path))


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@_ingest_options
@_detect_options
@_attribute_options
@click.option("--out", type=click.Path(file_okay=False), help="Output directory of the report")
@click.pass_obj
@handle_errors
def run(state: CliState, manifest: str, tags: Optional[str], date_ceiling: Optional[str],
        min_lines: Optional[int], threshold: Optional[float], shard_size_qa: Optional[int],
        shard_size_app: Optional[int], workers: Optional[int], match_fraction: Optional[float],
        ambiguity_days: Optional[int], out: Optional[str]) -> None:
    """Run every stage from a pipeline manifest"""
    plan = PipelineManifest.load(manifest)
    apply_settings(state, **dict(plan.overrides))
    apply_settings(state, required_tags=tags, date_ceiling=date_ceiling, min_lines=min_lines,
                   similarity_threshold=threshold, shard_size_qa=shard_size_qa,
                   shard_size_app=shard_size_app, workers=workers,
                   match_fraction=match_fraction, ambiguity_window_days=ambiguity_days)
    if out:
        plan = PipelineManifest(plan.dump, plan.releases, plan.inconsistencies, plan.review,
                                Path(out), plan.report_format, plan.overrides)
    report = state.pipeline().run(plan)
    if state.settings.show_progress:
        print_summary(report, echo=click.echo)


def main() -> None:
    cli(prog_name="qareuse")
