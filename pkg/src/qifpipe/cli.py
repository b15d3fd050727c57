"""``qifpipe`` command line.

Verdicts are reported as data; the exit status is nonzero only when a
command could not run (bad input, unreadable file, and so on).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .experiments import NAMES, ExperimentConfig, ingest_csv, run_experiment
from .linalg import format_rational, matrix_to_json, read_matrix_csv, write_matrix_csv
from .mechanisms import build_mechanism, mechanism_spec, parse_mechanism_spec
from .refinement import check_refinement
from .utility import Prior


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise click.ClickException(f"cannot write {out}: {exc.strerror}") from None


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


class _Guard:
    """Turn library ValueErrors into clean operational errors."""

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if typ is not None and issubclass(typ, (ValueError, KeyError, TypeError)):
            raise click.ClickException(str(exc)) from None
        return False


@click.group()
@click.version_option(package_name="qifpipe")
def main():
    """Exact privacy/utility analysis of perturb-then-post-process pipelines."""


@main.group()
def mech():
    """Mechanism constructors."""


@mech.command("build")
@click.option("--family", type=click.Choice(["rr", "geometric"]), help="Mechanism family.")
@click.option("-k", type=int, help="Choice-set size (rr).")
@click.option("-n", type=int, help="Domain size (geometric).")
@click.option("-p", "p", help="Truth probability p/q (rr).")
@click.option("--alpha", help="Decay alpha p/q (geometric).")
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), help="Mechanism spec JSON file.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write CSV here instead of stdout.")
def mech_build(family, k, n, p, alpha, spec_path, out):
    """Print a mechanism's channel matrix as CSV."""
    if spec_path:
        spec = _load_json(spec_path)
    elif family:
        spec = {"family": family, "k": k, "n": n, "p": p, "alpha": alpha}
        spec = {key: v for key, v in spec.items() if v is not None}
    else:
        raise click.UsageError("give --family with its parameters, or --spec")
    with _Guard():
        params = parse_mechanism_spec(spec)
        mech_ = build_mechanism(params)
    click.echo(f"# {json.dumps(mechanism_spec(params), sort_keys=True)}", err=True)
    _emit(write_matrix_csv(mech_), out)


@main.group()
def refine():
    """Refinement between channels."""


@refine.command("check")
@click.argument("a", type=click.Path(exists=True, dir_okay=False))
@click.argument("b", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the fallback certificate search.")
@click.option("--out", type=click.Path(dir_okay=False))
def refine_check(a, b, seed, out):
    """Decide whether channel A is refined by channel B."""
    with _Guard():
        ma, mb = read_matrix_csv(a), read_matrix_csv(b)
        verdict = check_refinement(ma, mb, seed=seed)
        doc = verdict.to_json()
        doc["validated"] = verdict.validate(ma, mb)
        if verdict.certificate is not None:
            ua, ub = verdict.certificate.utilities(ma, mb)
            doc["certificate"]["utility_a"] = format_rational(ua)
            doc["certificate"]["utility_b"] = format_rational(ub)
    _emit(_dump(doc), out)


@main.group()
def stability():
    """Stability scans over parameter grids."""


@stability.command("scan")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="Directory for verdict.json, scan.csv and plot_data.csv.")
def stability_scan_cmd(config, out):
    """Run the scan described by CONFIG and print its report CSV."""
    cfg = _load_json(config)
    try:
        bundle = run_experiment(ExperimentConfig("custom", cfg, Path(out) if out else None))
    except OSError as exc:
        raise click.ClickException(f"cannot write report: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(f"verdict: {bundle.verdict['verdict']}", err=True)
    click.echo(bundle.tables["scan.csv"], nl=False)


@main.command()
@click.argument("name", type=click.Choice(NAMES))
@click.option("--out", type=click.Path(file_okay=False), help="Directory to write the report bundle.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Scan config JSON (required for 'custom').")
def experiment(name, out, seed, config_path):
    """Run a named experiment and print its verdict JSON."""
    params = _load_json(config_path) if config_path else {}
    if name == "custom" and not params:
        raise click.UsageError("the custom experiment needs --config")
    try:
        bundle = run_experiment(ExperimentConfig(name, params, Path(out) if out else None, seed))
    except OSError as exc:
        raise click.ClickException(f"cannot write report: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(bundle.verdict_json(), nl=False)


@main.command()
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--column", required=True)
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON object from CSV tokens to numeric values.")
@click.option("--target-row", required=True, type=int, help="0-based data row of the unknown individual.")
@click.option("--uniform-prior", is_flag=True, help="Use a uniform prior over the mapped domain.")
def ingest(csv_path, column, map_path, target_row, uniform_prior):
    """Build an empirical prior and known-values list from a CSV column."""
    value_map = _load_json(map_path)
    if not isinstance(value_map, dict):
        raise click.ClickException(f"{map_path}: expected a JSON object")
    with _Guard():
        prior, known = ingest_csv(csv_path, column, value_map, target_row)
    if uniform_prior:
        prior = Prior.uniform(prior.over)
    doc = {
        "prior": matrix_to_json(prior.to_matrix()),
        "known": known,
        "target_row": target_row,
    }
    click.echo(_dump(doc), nl=False)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
