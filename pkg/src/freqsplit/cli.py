"""
Command-line scenario runner.

    freqsplit <scenario> --config FILE --seed N --out DIR [--points N]
              [--duration-s T] [--degree D] [--no-plot]

Exit codes: 0 ok, 2 configuration error, 3 domain error, 4 fit did not
converge, 5 I/O or input-data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, config, tables
from .errors import ConfigError, DomainError, FitError, SchemaError
from .scenarios import SCENARIOS, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_FIT, EXIT_IO = 0, 2, 3, 4, 5
U64_MAX = 2 ** 64 - 1

log = logging.getLogger("freqsplit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freqsplit", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    p.add_argument("--config", type=Path, default=None,
                   help="TOML overrides of the calibration bundle")
    p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--points", type=int, default=None, help="number of sweep points")
    p.add_argument("--duration-s", type=float, default=None,
                   help="accumulation time per point, s")
    p.add_argument("--degree", type=int, default=None, help="noise polynomial degree")
    p.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_plot(outcome, path: Path, title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": "freqsplit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        outcome.plot(ax)
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def run(args: argparse.Namespace) -> int:
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    if not 0 <= args.seed <= U64_MAX:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    extra = {}
    if args.points is not None:
        extra["points"] = args.points
    if args.duration_s is not None:
        extra["duration_s"] = args.duration_s
    if args.degree is not None:
        extra["degree"] = args.degree
    cfg = config.load(args.config, extra)

    outcome = run_scenario(args.scenario, cfg, args.seed)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    stem = args.scenario
    table_path = out / f"{stem}.csv"
    text = tables.dumps(outcome.table)
    table_path.write_text(text)
    (out / f"{stem}.summary.json").write_text(
        json.dumps(_jsonable(outcome.summary), indent=2, sort_keys=True) + "\n")
    (out / f"{stem}.config.toml").write_text(config.dumps(cfg.values))
    artifacts = {table_path.name: hashlib.sha256(text.encode()).hexdigest()}
    if outcome.plot is not None and not args.no_plot:
        plot_path = out / f"{stem}.svg"
        _write_plot(outcome, plot_path, stem)
        artifacts[plot_path.name] = None
    manifest = {
        "tool": "freqsplit",
        "version": __version__,
        "scenario": args.scenario,
        "seed": args.seed,
        "config": cfg.values,
        "artifacts": artifacts,
        "notes": outcome.notes,
        "reproduce": (f"freqsplit {args.scenario} --config {stem}.config.toml "
                      f"--seed {args.seed} --out <dir>"),
    }
    (out / f"{stem}.manifest.json").write_text(
        json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", table_path)

    if outcome.fit is not None and not outcome.fit.converged:
        log.error("fit did not converge: %s", outcome.fit.message)
        return EXIT_FIT
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        return run(args)
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG
    except DomainError as exc:
        log.error("domain: %s", exc)
        return EXIT_DOMAIN
    except FitError as exc:
        log.error("fit: %s", exc)
        return EXIT_FIT
    except (OSError, SchemaError) as exc:
        log.error("io: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
