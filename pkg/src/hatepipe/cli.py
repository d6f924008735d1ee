"""Command-line entry points for the pipeline stages.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider/backend
error.
"""

from __future__ import annotations

import sys

import click

from .config import load_config
from .errors import BackendError, DataError, ProviderError
from .pipeline import Pipeline, STAGES


def _pipeline(ctx) -> Pipeline:
    cfg = load_config(
        ctx.obj["config"],
        work_dir_override=ctx.obj["work_dir"],
        seed_override=ctx.obj["seed"],
    )
    return Pipeline(cfg, log=click.echo)


@click.group()
@click.option("--config", "-c", required=True, help="Path to the pipeline TOML config.")
@click.option("--work-dir", default=None, help="Override the artifact directory.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--dry-run", is_flag=True, help="Print the plan without running stages.")
@click.pass_context
def cli(ctx, config, work_dir, seed, dry_run):
    """Hate speech detection pipeline for text-embedded images."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config, work_dir=work_dir, seed=seed, dry_run=dry_run)


def _stage_command(name, runner_attr, help_text):
    @cli.command(name=name, help=help_text)
    @click.pass_context
    def _cmd(ctx):
        if ctx.obj["dry_run"]:
            click.echo(f"dry-run: would run stage {name}")
            return
        pipe = _pipeline(ctx)
        getattr(pipe, runner_attr)()

    return _cmd


_stage_command("ingest", "run_ingest", "Load and validate the manifest; print label distribution.")
_stage_command("ocr", "run_ocr", "Extract text for instances that lack it.")
_stage_command("augment", "run_augment", "Back-translate the train split through the configured chains.")
_stage_command("train", "run_train", "Train every configured model.")
_stage_command("predict", "run_predict", "Predict eval/test splits with every trained model.")
_stage_command("llm", "run_llm", "Run LLM prompting over the eval/test splits.")
_stage_command("ensemble", "run_ensemble", "Fuse member predictions by the configured voting rule.")
_stage_command("evaluate", "run_evaluate", "Score predictions and write reports.")


@cli.command("run-all")
@click.option(
    "--force",
    multiple=True,
    help="Recompute this stage and everything downstream (repeatable).",
)
@click.pass_context
def run_all(ctx, force):
    """Execute every stage in order, skipping cached ones."""
    for stage in force:
        if stage not in STAGES:
            raise click.UsageError(
                f"unknown stage {stage!r}; choose from {', '.join(STAGES)}"
            )
    if ctx.obj["dry_run"]:
        click.echo("dry-run: would run stages " + " -> ".join(STAGES))
        return
    pipe = _pipeline(ctx)
    pipe.run_all(force=list(force))


@cli.command("report")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["text_table", "json", "plot"]),
    default="text_table",
)
@click.pass_context
def report(ctx, fmt):
    """Re-render the evaluation reports in the chosen format."""
    import json as _json
    from pathlib import Path

    from .evaluate import EvalReport, render_report

    pipe = _pipeline(ctx)
    reports_file = Path(pipe.config.reports_dir) / "reports.json"
    if not reports_file.exists():
        raise DataError(f"no reports at {reports_file}; run evaluate first")
    raw = _json.loads(reports_file.read_text(encoding="utf-8"))
    reports = {name: EvalReport.from_dict(d) for name, d in raw.items()}
    result = render_report(reports, fmt, pipe.config.reports_dir)
    if fmt != "plot":
        click.echo(result)
    else:
        for path in result:
            click.echo(path)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="hatepipe")
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except (ProviderError, BackendError) as exc:
        click.echo(f"provider error: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
