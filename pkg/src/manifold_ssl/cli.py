"""Command-line entry point: ``run``, ``synth`` and ``inspect``.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

from . import synthetic
from .config import PipelineConfig, parse_config, to_ini
from .dataset import derive_labels, load_clinical, load_feature_matrix
from .errors import ConfigError, ManifoldSSLError
from .evaluation import ExperimentData, ExperimentReport, read_raw_cells, report_from_cells, run_experiment

log = logging.getLogger("manifold_ssl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="manifold-ssl", description="Semi-supervised multi-modal survival pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the repeated cross-validation experiment")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    run.add_argument("--threads", type=int, help="worker threads (default: $MANIFOLD_SSL_THREADS or 1)")

    synth = sub.add_parser("synth", help="write a synthetic dataset with a bundled config")
    synth.add_argument("--preset", required=True)
    synth.add_argument("--seed", type=int, default=1)
    synth.add_argument("--out", required=True, type=Path)
    synth.add_argument("--unlabeled-fraction", type=float)

    insp = sub.add_parser("inspect", help="print the mean ± std table of a report")
    insp.add_argument("--report", required=True, type=Path, help="raw_cells.csv or the directory holding it")
    return parser


def load_data(cfg: PipelineConfig) -> ExperimentData:
    cfg.check_paths()
    assignment = derive_labels(load_clinical(cfg.clinical), cfg.threshold_days)
    modalities = {name: load_feature_matrix(path, name) for name, path in cfg.modalities.items()}
    return ExperimentData(modalities, assignment)


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.out.resolve())
    out = cfg.output_dir
    data = load_data(cfg)
    counts = data.assignment.counts()
    log.info("labels: %s", {k.value: v for k, v in counts.items()})
    report = run_experiment(cfg.experiment_settings(), data, workers=args.threads)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.ini").write_text(to_ini(cfg), encoding="utf-8")
    paths = report.write(out)
    for r, msg in report.failures:
        print(f"warning: repetition {r} failed: {msg}", file=sys.stderr)
    print(format_summary(report))
    print(f"reports written to {out}: {', '.join(p.name for p in paths.values())}")
    return EXIT_OK


def cmd_synth(args) -> int:
    kwargs = {}
    if args.unlabeled_fraction is not None:
        if args.preset == "two_moons":
            raise ConfigError("--unlabeled-fraction does not apply to two_moons")
        kwargs["unlabeled_fraction"] = args.unlabeled_fraction
    ds = synthetic.generate(args.preset, args.seed, **kwargs)
    paths = synthetic.write_dataset(ds, args.out)
    print(f"wrote {args.preset} (seed {args.seed}) to {args.out}: {', '.join(Path(p).name for p in paths.values())}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = args.report
    if path.is_dir():
        path = path / "raw_cells.csv"
    if not path.is_file():
        raise ConfigError(f"report not found: {path}")
    print(format_summary(report_from_cells(read_raw_cells(path))))
    return EXIT_OK


def _pct(x):
    return "   n/a" if math.isnan(x) else f"{100 * x:6.2f}"


def format_summary(report: ExperimentReport) -> str:
    rows = report.summary()
    width = max([len("modality")] + [len(r["modality"]) for r in rows])
    mwidth = max([len("method")] + [len(r["method"]) for r in rows])
    lines = [f"{'modality':<{width}}  {'method':<{mwidth}}  mean ACC % (± std)   n"]
    for r in rows:
        lines.append(f"{r['modality']:<{width}}  {r['method']:<{mwidth}}  {_pct(r['mean'])} (± {_pct(r['std']).strip()})  {r['n']:>3}")
    return "\n".join(lines)


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "inspect": cmd_inspect}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifoldSSLError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # last resort: never exit without a message
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
