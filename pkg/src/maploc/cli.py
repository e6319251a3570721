"""Command-line harness: evaluation, alignment, curation, and camera
statistics over MLTF bundles, with JSON/CSV reports and rendered figures.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import click

from . import __version__
from .errors import MaplocError
from .runner import EvalConfig, run_curate, run_eval


def _load_config(config_path, seed, threads) -> EvalConfig:
    config = EvalConfig.from_file(config_path) if config_path else EvalConfig()
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if threads is not None:
        overrides["threads"] = threads
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="JSON config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--threads", type=int, default=None,
                      help="Override the config thread count.")(fn)
    return fn


def _eval_options(fn):
    fn = click.option("--bundle", "bundle_path", required=True,
                      type=click.Path(exists=True, file_okay=False),
                      help="Bundle root directory.")(fn)
    fn = _common_options(fn)
    fn = click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
                      help="Output JSON report path (CSV and figures share its stem).")(fn)
    fn = click.option("--figures/--no-figures", default=True,
                      help="Render figures next to the CSV output.")(fn)
    return fn


def _run_eval_command(command, bundle_path, config_path, seed, threads, out_path, figures):
    config = _load_config(config_path, seed, threads)
    out_json = Path(out_path)
    out_csv = out_json.with_suffix(".csv")
    try:
        report = run_eval(bundle_path, config, command,
                          out_json=out_json, out_csv=out_csv, figures=figures)
    except MaplocError as exc:
        raise click.ClickException(str(exc)) from exc
    groups = len(report["per_group"])
    failures = report["failures"]
    click.echo(f"{command}: {groups} groups, {failures} failed -> {out_json}")
    if failures:
        raise SystemExit(1)


@click.group()
@click.version_option(__version__, prog_name="maploc")
def main():
    """Evaluation engine for joint multi-view reconstruction and
    open-vocabulary point labeling."""


@main.command("eval-maploc")
@_eval_options
def eval_maploc(bundle_path, config_path, seed, threads, out_path, figures):
    """Align predictions to world coordinates and score the semantic and
    completeness metrics per group."""
    _run_eval_command("eval-maploc", bundle_path, config_path, seed, threads,
                      out_path, figures)


@main.command("eval-depth")
@_eval_options
def eval_depth(bundle_path, config_path, seed, threads, out_path, figures):
    """Score predicted depth maps (AbsRel, delta < 1.25) per group."""
    _run_eval_command("eval-depth", bundle_path, config_path, seed, threads,
                      out_path, figures)


@main.command("eval-pose")
@_eval_options
def eval_pose(bundle_path, config_path, seed, threads, out_path, figures):
    """Recover relative camera poses from predicted pointmaps and score
    RRA/RTA/mAA@30 per group."""
    _run_eval_command("eval-pose", bundle_path, config_path, seed, threads,
                      out_path, figures)


@main.command("stats")
@_eval_options
def stats(bundle_path, config_path, seed, threads, out_path, figures):
    """Camera translation/rotation difference distributions per view count."""
    _run_eval_command("stats", bundle_path, config_path, seed, threads,
                      out_path, figures)


@main.command("align")
@_eval_options
def align(bundle_path, config_path, seed, threads, out_path, figures):
    """Compute and emit each group's world-alignment transform."""
    _run_eval_command("align", bundle_path, config_path, seed, threads,
                      out_path, figures)


@main.command("curate")
@click.option("--scans", "scans_path", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of raw scenes: <scene>/<frame>/{gt_*.mltf}.")
@click.option("--out", "out_path", required=True, type=click.Path(file_okay=False),
              help="Output bundle root.")
@_common_options
def curate(scans_path, out_path, config_path, seed, threads):
    """Build an evaluation bundle: overlap-constrained, viewpoint-diverse
    groups plus optional NYU40 label mapping."""
    config = _load_config(config_path, seed, threads)
    out_root = Path(out_path)
    try:
        manifest = run_curate(scans_path, out_root, config,
                              out_stats=out_root / "curation_stats.json")
    except MaplocError as exc:
        raise click.ClickException(str(exc)) from exc
    n_groups = sum(len(s["groups"]) for s in manifest["scenes"])
    click.echo(f"curate: {len(manifest['scenes'])} scenes, {n_groups} groups -> {out_root}")


if __name__ == "__main__":
    main()
