"""Command-line entry point: ``sparc <experiment> --config c.json --seed N --out r.json``."""
from __future__ import annotations

import json
import sys

import click

from .errors import SparcError
from .harness import EXPERIMENTS, ExperimentConfig, run
from .io import read_json

U64 = click.IntRange(0, 2**64 - 1)


def _fail(kind, message, code):
    click.echo(json.dumps({"error": kind, "message": message}), err=True)
    sys.exit(code)


def _execute(experiment, config, seed, out):
    try:
        raw = read_json(config)
        if raw.get("experiment", experiment) != experiment:
            raise SparcError(f"config is for {raw['experiment']!r}, not {experiment!r}")
        raw["experiment"] = experiment
        cfg = ExperimentConfig.from_dict(raw)
        run(cfg, seed, out)
    except SparcError as err:
        _fail(err.kind, str(err), 2)
    except (OSError, ValueError, KeyError, TypeError) as err:
        _fail(type(err).__name__, str(err), 1)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Sparse superposition codes: decoding sweeps, state evolution and thresholds."""


def _command(name):
    @click.option("--config", "config", required=True, type=click.Path(exists=True, dir_okay=False))
    @click.option("--seed", required=True, type=U64)
    @click.option("--out", required=True, type=click.Path(dir_okay=False, writable=True))
    def cmd(config, seed, out, **kw):
        experiment = "asymptotic" if kw.get("asymptotic") else name
        _execute(experiment, config, seed, out)
    cmd.__doc__ = f"Run the {name} experiment."
    if name == "thresholds":
        cmd = click.option("--asymptotic", is_flag=True,
                           help="Emit the large-B record instead.")(cmd)
    main.command(name)(cmd)


for _name in EXPERIMENTS:
    _command(_name)


if __name__ == "__main__":
    main()
