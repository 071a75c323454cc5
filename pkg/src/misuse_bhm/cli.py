#!/usr/bin/env python3
"""Command-line interface for the misuse prevalence model.

Commands:
  mbhm prepare     load and prepare input tables
  mbhm fit         run the sampler, write draws and the posterior summary
  mbhm predict     county predictions and state/national aggregates
  mbhm validate    residuals, predictive checks, cross-validation, sensitivity
  mbhm simulate    write a synthetic input set with known parameters
  mbhm report      render a run's artifacts
  mbhm config      inspect or initialise run configuration

Exit status: 0 success, 1 error, 2 finished without passing the convergence gate.
"""

import functools
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
import yaml

from . import __version__
from .commands import (
    SUBCOMMANDS,
    collect_report,
    fit_model,
    predict_run,
    prepare_data,
    simulate_data,
    validate_run,
)
from .config import DEFAULT_CONFIG, get_config_value, load_config, save_config
from .exceptions import MisuseBHMError
from .models import RunConfig
from .utils.files import read_csv
from .utils.format import frame_table
from .utils.output import console, error, handle_output, setup_logging, success, warning

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


# ─── Helpers ──────────────────────────────────────────────────────────


def run_options(f):
    """Flags shared by every command that resolves a run configuration."""
    options = [
        click.option("--seed", type=int, help="Random seed"),
        click.option("--chains", type=int, help="Number of chains"),
        click.option("--iters", type=int, help="Iterations per chain, warmup included"),
        click.option("--warmup", type=int, help="Warmup iterations per chain"),
        click.option("--thin", type=int, help="Keep every n-th post-warmup draw"),
        click.option("--out", type=click.Path(file_okay=False), help="Run output directory"),
        click.option("--jobs", type=int, help="Parallel worker processes"),
        click.option("--reduced-model", is_flag=True, help="Drop the prevalence random intercept"),
        click.option("--gamma-unit-interval", is_flag=True, help="Constrain the survey scaling factor to (0, 1)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _overrides(flags: Dict[str, Any]) -> Dict[str, Any]:
    iters, warmup = flags.get("iters"), flags.get("warmup")
    if iters is not None and warmup is None:
        warmup = iters // 2
    return {
        "sampler.seed": flags.get("seed"),
        "sampler.chains": flags.get("chains"),
        "sampler.iterations": iters,
        "sampler.warmup": warmup,
        "sampler.thin": flags.get("thin"),
        "output_dir": flags.get("out"),
        "jobs": flags.get("jobs"),
        "model.include_prevalence_random_intercept": False if flags.get("reduced_model") else None,
        "model.gamma_constraint": "unit_interval" if flags.get("gamma_unit_interval") else None,
    }


def _resolve(ctx, flags: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    overrides = _overrides(flags)
    overrides.update(extra or {})
    return load_config(ctx.obj.get("config_path"), overrides)


def guarded(action: str):
    """Report library errors the same way for every command and exit 1."""
    def decorator(f):
        @functools.wraps(f)
        def wrapper(*args, **kwargs):
            try:
                return f(*args, **kwargs)
            except (MisuseBHMError, OSError, ValueError) as e:
                error(f"Failed to {action}: {e}")
                sys.exit(EXIT_ERROR)
        return wrapper
    return decorator


def _finish(result: Dict[str, Any], ctx, message: str) -> None:
    handle_output(result, ctx.obj["output_json"], message if result.get("converged", True) else None)
    if not result.get("converged", True):
        warning("Convergence gate not passed (max R-hat >= 1.1 or too few draws); results are provisional")
        sys.exit(EXIT_NOT_CONVERGED)


# ─── Top-level group ──────────────────────────────────────────────────


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="mbhm")
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose logging")
@click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), help="YAML run configuration")
@click.option("--json", "output_json", is_flag=True, help="Output in JSON format")
@click.pass_context
def cli(ctx, verbose, config_path, output_json):
    """Bayesian county-level opioid misuse prevalence from deaths and prevalence estimates.

    Run `mbhm <command> --help` for command-specific options.
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["config_path"] = config_path
    ctx.obj["output_json"] = output_json
    setup_logging(verbose)


@cli.command("prepare")
@run_options
@click.pass_context
@guarded("prepare data")
def prepare(ctx, **flags):
    """Load, check, impute and standardize the input tables."""
    cfg = _resolve(ctx, flags)
    result = prepare_data(cfg)
    handle_output(result, ctx.obj["output_json"], f"Prepared dataset written to {cfg.output_dir}")


@cli.command("fit")
@run_options
@click.option("--format", "draws_format", type=click.Choice(["csv", "npz"]), default="csv",
              show_default=True, help="Draw storage format")
@click.pass_context
@guarded("fit model")
def fit(ctx, draws_format, **flags):
    """Run the sampler and write draws, summary and convergence report."""
    cfg = _resolve(ctx, flags)
    result = fit_model(cfg, draws_format)
    if not ctx.obj["output_json"]:
        summary = read_csv(Path(result["paths"]["summary"]))
        console.print(frame_table(summary, title="Posterior summary",
                                  columns=["param", "mean", "p2.5", "p97.5", "rhat", "ess"]))
    result["converged"] = result["passed"]
    _finish(result, ctx, f"Fit written to {cfg.output_dir}")


@cli.command("predict")
@run_options
@click.pass_context
@guarded("predict")
def predict(ctx, **flags):
    """County predictions, state/national aggregates and suppression probabilities."""
    cfg = _resolve(ctx, flags)
    result = predict_run(cfg)
    handle_output(result, ctx.obj["output_json"], f"Predictions written to {cfg.output_dir}")


@cli.command("validate")
@click.argument("subcommand", type=click.Choice(SUBCOMMANDS))
@run_options
@click.option("-k", "--folds", type=int, help="Number of cross-validation folds")
@click.option("--interval", type=click.Choice(["predictive", "expected"]), help="Interval used for CV coverage")
@click.option("--level", type=float, help="Central probability of CV intervals (default 0.95)")
@click.option("--replicates", type=int, default=10, show_default=True, help="Synthetic replicates (recovery)")
@click.pass_context
@guarded("validate")
def validate(ctx, subcommand, folds, interval, level, replicates, **flags):
    """Run one validation analysis: SUBCOMMAND is one of the listed choices."""
    cfg = _resolve(ctx, flags, {"validate.k": folds, "validate.interval": interval, "validate.level": level})
    options = {"replicates": replicates} if subcommand == "recovery" else {}
    result = validate_run(cfg, subcommand, **options)
    _finish(result, ctx, f"{subcommand} report written to {cfg.output_dir}/validate")


@cli.command("simulate")
@run_options
@click.option("--to", "target", type=click.Path(file_okay=False), help="Directory for the synthetic inputs")
@click.option("--counties", type=int, help="Number of counties")
@click.option("--states", type=int, help="Number of states")
@click.option("--evidence-states", type=int, help="States with county-level estimates")
@click.pass_context
@guarded("simulate")
def simulate(ctx, target, counties, states, evidence_states, **flags):
    """Write a synthetic input set and its true parameters."""
    extra = {
        "synthetic.seed": flags.pop("seed"),
        "synthetic.n_counties": counties,
        "synthetic.n_states": states,
        "synthetic.evidence_states": evidence_states,
    }
    cfg = _resolve(ctx, flags, extra)
    result = simulate_data(cfg, Path(target) if target else None)
    if not result["identifiable"]:
        warning("Fewer than two states carry county estimates; the full model is weakly identified")
    handle_output(result, ctx.obj["output_json"], "Synthetic inputs written")


@cli.command("report")
@run_options
@click.option("--max-rows", type=int, default=30, show_default=True, help="Rows shown per table")
@click.pass_context
@guarded("build report")
def report(ctx, max_rows, **flags):
    """Show a run's artifacts and write report.md."""
    cfg = _resolve(ctx, flags)
    sections = collect_report(cfg)
    if ctx.obj["output_json"]:
        handle_output({title: frame.to_dict(orient="records") for title, frame in sections.items()}, True)
        return
    for title, frame in sections.items():
        console.print(frame_table(frame, title=title, max_rows=max_rows))
    success(f"Report written to {Path(cfg.output_dir) / 'report.md'}")


# ─── `mbhm config` group ──────────────────────────────────────────────


@cli.group()
def config():
    """Inspect or initialise run configuration."""


@config.command("show")
@run_options
@click.pass_context
@guarded("show configuration")
def config_show(ctx, **flags):
    """Print the fully resolved configuration."""
    cfg = _resolve(ctx, flags)
    data = cfg.model_dump(mode="json", by_alias=True)
    if ctx.obj["output_json"]:
        handle_output(data, True)
    else:
        console.print(yaml.safe_dump(data, default_flow_style=False, sort_keys=False))


@config.command("get")
@click.argument("key")
@click.pass_context
@guarded("read configuration")
def config_get(ctx, key):
    """Print one resolved value by dotted key, e.g. sampler.chains."""
    cfg = load_config(ctx.obj.get("config_path"))
    value = get_config_value(cfg.model_dump(mode="json", by_alias=True), key)
    if value is None and get_config_value(DEFAULT_CONFIG, key) is None:
        error(f"Unknown or unset configuration key: {key}")
        sys.exit(EXIT_ERROR)
    handle_output(value, ctx.obj["output_json"])


@config.command("init")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--force", is_flag=True, help="Overwrite an existing file")
@click.pass_context
@guarded("write configuration")
def config_init(ctx, path, force):
    """Write the default configuration to PATH as a starting point."""
    target = Path(path)
    if target.exists() and not force:
        error(f"{target} already exists (use --force to overwrite)")
        sys.exit(EXIT_ERROR)
    save_config(load_config(ctx.obj.get("config_path")), target)
    success(f"Configuration written to {target}")


def main():
    """Main entry point for the CLI."""
    cli(obj={})


if __name__ == "__main__":
    main()
