# ============================================================
# soliton_lab.cli: command-line interface
# ============================================================

import json
import logging
import sys
from pathlib import Path

import click
from scipy import fft

from . import __version__
from .experiments import list_experiments, run, run_all
from .helpers import DEFAULT_SEED, infer_value, parse_override
from .io_utils import export_workbook, read_config_file, validate_config_file

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _configure_logging(verbose: bool):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format=LOG_FORMAT, stream=sys.stderr, force=True)


def _parse_extra(args) -> dict[str, str]:
    """
    Collect ``--key value``, ``--key=value`` and ``key=value`` overrides.

    Raises:
        ValueError: dangling option or a token that is not an override
    """
    out: dict[str, str] = {}
    i = 0
    while i < len(args):
        token = args[i]
        if token.startswith("--"):
            body = token[2:]
            if "=" not in body:
                if i + 1 >= len(args):
                    raise ValueError(f"missing value for option '{token}'")
                i += 1
                body = f"{body}={args[i]}"
            key, value = parse_override(body)
        elif "=" in token:
            key, value = parse_override(token)
        else:
            raise ValueError(f"unexpected argument '{token}'")
        out[key] = value
        i += 1
    return out


def _check_out_dir(out):
    if out is not None and Path(out).exists() and not Path(out).is_dir():
        click.secho(f"Error: Output path '{out}' exists and is not a directory.", fg='red', err=True)
        sys.exit(2)


def _print_verdicts(verdicts: dict):
    for name, entry in verdicts.items():
        passed = entry["passed"] if isinstance(entry, dict) else entry
        if passed:
            click.secho(f"  ✓ {name}", fg='green')
        else:
            detail = entry.get("detail", "") if isinstance(entry, dict) else ""
            click.secho(f"  ✗ {name}" + (f": {detail}" if detail else ""), fg='red')


@click.group()
@click.version_option(version=__version__)
@click.option('-v', '--verbose', is_flag=True, help='Log progress (INFO) to stderr')
def cli(verbose):
    """
    soliton-lab: numerical experiments on SO(2)-symmetric translators.

    Each experiment checks one quantitative claim about translating
    solitons of mean curvature flow in R^4 and their cylinder necks.

    \b
    Examples:
      soliton-lab list
      soliton-lab run bowl-ode --r_max 50 --out results/bowl
      soliton-lab run-all --out results --threads 4
      soliton-lab export results/bowl -o bowl.xlsx
      soliton-lab validate sweep.cfg --experiment alignment-scaling
    """
    _configure_logging(verbose)


@cli.command(name='list')
def list_command():
    """List the experiment catalog."""
    for name, anchor in list_experiments():
        click.echo(f"{name:<22} {anchor}")


@cli.command(context_settings={"ignore_unknown_options": True, "allow_extra_args": True})
@click.argument('name')
@click.option('--seed', default=DEFAULT_SEED, show_default=True, type=int,
              help='Run seed (64-bit unsigned)')
@click.option('--out', default=None, type=click.Path(file_okay=False),
              help='Output directory for report.json, manifest.json and CSVs')
@click.option('--threads', default=None, type=int,
              help='FFT worker threads (default: all cores)')
@click.option('--config', 'config', default=None, type=click.Path(dir_okay=False),
              help='key = value parameter file (command-line overrides win)')
@click.pass_context
def run_command(ctx, name, seed, out, threads, config):
    """
    Run one experiment; extra --key value pairs override its parameters.

    \b
    Examples:
      soliton-lab run tip-ratio
      soliton-lab run alignment-scaling --L_values 1,10,100 --trials 20
      soliton-lab run diameters --config diameters.cfg --seed 7 --out out/diam
    """
    try:
        raw = read_config_file(config) if config else {}
        raw.update(_parse_extra(ctx.args))
    except FileNotFoundError:
        click.secho(f"Error: Config file '{config}' not found.", fg='red', err=True)
        sys.exit(2)
    except ValueError as e:
        click.secho("Validation error:", fg='red', err=True)
        click.echo(str(e), err=True)
        sys.exit(3)
    overrides = {key: infer_value(value) for key, value in raw.items()}
    _check_out_dir(out)

    try:
        with fft.set_workers(threads if threads else -1):
            report = run(name, overrides, seed, out)
    except KeyError as e:
        click.secho(f"Error: {e.args[0]}", fg='red', err=True)
        sys.exit(3)
    except ValueError as e:
        click.secho("Validation error:", fg='red', err=True)
        click.echo(str(e), err=True)
        sys.exit(3)
    except RuntimeError as e:
        click.secho(f"Error: {e}", fg='red', err=True)
        sys.exit(1)
    except OSError as e:
        click.secho(f"Error: cannot write outputs: {e}", fg='red', err=True)
        sys.exit(2)

    click.echo(f"{name} (seed {seed})")
    _print_verdicts(report.verdicts)
    if report.passed:
        click.secho(f"✓ All {len(report.verdicts)} verdicts passed", fg='green')
        sys.exit(0)
    failed = sum(1 for v in report.verdicts.values() if not v["passed"])
    click.secho(f"✗ {failed} of {len(report.verdicts)} verdicts failed", fg='red')
    sys.exit(1)


@cli.command(name='run-all')
@click.option('--seed', default=DEFAULT_SEED, show_default=True, type=int, help='Run seed')
@click.option('--out', default=None, type=click.Path(file_okay=False),
              help='Output root; each experiment writes <out>/<name>/')
@click.option('--threads', default=None, type=int,
              help='Experiments run concurrently (default: all cores)')
@click.option('--only', multiple=True, help='Restrict to these experiments (repeatable)')
def run_all_command(seed, out, threads, only):
    """
    Run the whole catalog and write summary.json.

    \b
    Examples:
      soliton-lab run-all --out results
      soliton-lab run-all --only kernel-mass --only entropy-table
    """
    _check_out_dir(out)
    try:
        summary = run_all(seed, out, threads, list(only) or None)
    except KeyError as e:
        click.secho(f"Error: {e.args[0]}", fg='red', err=True)
        sys.exit(3)
    except OSError as e:
        click.secho(f"Error: cannot write outputs: {e}", fg='red', err=True)
        sys.exit(2)

    for name, result in summary["experiments"].items():
        if result["passed"]:
            click.secho(f"✓ {name}", fg='green')
        elif "error" in result:
            click.secho(f"✗ {name}: {result['error']}", fg='red')
        else:
            click.secho(f"✗ {name}", fg='red')
            _print_verdicts({k: v for k, v in result["verdicts"].items() if not v})
    sys.exit(0 if summary["passed"] else 1)


@cli.command()
@click.argument('report_dir', type=click.Path(file_okay=False))
@click.option('-o', '--output', default=None, type=click.Path(dir_okay=False),
              help='Output Excel file path (.xlsx)')
@click.option('-f', '--force', is_flag=True, help='Overwrite output file if it exists')
def export(report_dir, output, force):
    """
    Export an experiment output directory to an Excel workbook.

    \b
    Examples:
      soliton-lab export results/tip-ratio -o tip.xlsx
    """
    if output is None:
        output = str(Path(report_dir) / "report.xlsx")
    output_path = Path(output)
    if output_path.exists() and not force:
        click.secho(f"Error: Output file '{output}' already exists. Use --force to overwrite.",
                    fg='red', err=True)
        sys.exit(2)
    try:
        sheets = export_workbook(report_dir, output_path)
    except FileNotFoundError as e:
        click.secho(f"Error: {e.filename or report_dir}: not found.", fg='red', err=True)
        sys.exit(2)
    except (KeyError, json.JSONDecodeError) as e:
        click.secho(f"Error: malformed report in '{report_dir}': {e}", fg='red', err=True)
        sys.exit(3)
    click.secho(f"✓ Exported {sheets} sheets to {output}", fg='green')


@cli.command()
@click.argument('input_files', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option('--experiment', '-e', required=True, help='Experiment whose parameters to check')
@click.option('--format', 'output_format',
              type=click.Choice(['text', 'json'], case_sensitive=False),
              default='text', help='Output format (text or json)')
def validate(input_files, experiment, output_format):
    """
    Validate config files against an experiment's parameters.

    \b
    Examples:
      soliton-lab validate sweep.cfg --experiment neck-improvement
      soliton-lab validate a.cfg b.cfg -e diameters --format json
    """
    all_valid = True
    file_not_found = False
    results = []

    for input_file in input_files:
        try:
            is_valid, errors = validate_config_file(input_file, experiment)
        except FileNotFoundError:
            is_valid, errors = False, ["File not found"]
            file_not_found = True
        except KeyError as e:
            click.secho(f"Error: {e.args[0]}", fg='red', err=True)
            sys.exit(3)

        all_valid &= is_valid
        if output_format == 'json':
            results.append({'file': str(input_file), 'valid': is_valid, 'errors': errors})
        elif is_valid:
            click.secho(f"✓ {input_file}: Valid", fg='green')
        else:
            click.secho(f"✗ {input_file}: Invalid", fg='red')
            for error in errors:
                click.echo(f"  - {error}", err=True)

    if output_format == 'json':
        click.echo(json.dumps({
            'experiment': experiment,
            'results': results,
            'summary': {
                'total': len(input_files),
                'valid': sum(1 for r in results if r['valid']),
                'invalid': sum(1 for r in results if not r['valid']),
            },
        }, indent=2))

    if file_not_found:
        sys.exit(2)
    sys.exit(0 if all_valid else 3)


def main():
    """Entry point for CLI."""
    cli()


if __name__ == '__main__':
    main()
