"""``podkit`` command line: ingest, align, stats, eval, generate (and synth).

Exit codes: 0 success, 1 usage error, 2 corpus integrity failure,
3 processing error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .align import AlignParams, alignment_report_csv, event_pitch_classes
from .corpus import activation_ratio, corpus_stats, export_concatenated, instrumentation_path
from .errors import PodkitError
from .instruments import VOCABULARY, InstrumentMap, load_instrument_map, normalize_instruments
from .midi import read_midi, save_midi
from .pianoroll import (
    DEFAULT_FPQ, binarize, build_roll, extract_events, instrument_rows, roll_to_csv, roll_to_score,
)
from .pipeline import align_corpus, corpus_rolls, load_corpus, prune_pairs
from .task import (
    LEVELS, OraclePredictor, RandomPredictor, RepeatPredictor, SplitSpec, evaluate, generate, split_ids,
)

log = logging.getLogger("podkit")

EXIT_OK, EXIT_USAGE, EXIT_INTEGRITY, EXIT_PROCESSING = 0, 1, 2, 3
PREDICTORS = ("oracle", "repeat", "random")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    root: str | None = None
    out: str = "podkit-out"
    fpq: int = DEFAULT_FPQ
    C: float = 10
    gap_open: float = 3
    gap_extend: float = 1
    order: int = 1
    seed: int = 0
    test_fraction: float = 0.2
    level: str = "event"
    predictor: str = "repeat"
    jobs: int | None = None
    piano_midi: str | None = None
    plot: bool = False
    pairs: int = 50

    def validate(self) -> "RunConfig":
        if self.fpq < 1:
            raise UsageError("--fpq must be positive")
        if self.order < 1:
            raise UsageError("--order must be positive")
        if not 0 < self.test_fraction < 1:
            raise UsageError("--test-fraction must lie in (0, 1)")
        if self.level not in LEVELS:
            raise UsageError(f"--level must be one of {LEVELS}")
        if self.predictor not in PREDICTORS:
            raise UsageError(f"--predictor must be one of {PREDICTORS}")
        if self.jobs is not None and self.jobs < 1:
            raise UsageError("--jobs must be positive")
        try:
            self.align_params()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return self

    def align_params(self) -> AlignParams:
        return AlignParams(self.C, self.gap_open, self.gap_extend)

    def split(self) -> SplitSpec:
        return SplitSpec(self.seed, self.test_fraction)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require_root(cfg: RunConfig) -> Path:
    if cfg.root is None:
        raise UsageError("--root is required")
    root = Path(cfg.root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} is not a readable directory")
    return root


def _load(cfg: RunConfig):
    loaded, failures = load_corpus(_require_root(cfg), cfg.jobs)
    for f in failures:
        log.error("folder %s (%s): %s: %s", f.folder_id, f.role, f.kind, f.error)
    return loaded, failures


def _failure_status(failures) -> int:
    if not failures:
        return EXIT_OK
    return EXIT_INTEGRITY if any(f.integrity for f in failures) else EXIT_PROCESSING


def _errors_json(failures) -> str:
    return json.dumps([asdict(f) for f in failures], indent=2) + "\n"


def cmd_ingest(cfg: RunConfig) -> int:
    loaded, failures = _load(cfg)
    out = Path(cfg.out)
    _write(out / "errors.json", _errors_json(failures))
    rolls = corpus_rolls(loaded, cfg.fpq)
    for r in rolls:
        _write(out / "rolls" / f"{r.record.score_id}_piano.csv", roll_to_csv(r.piano))
        _write(out / "rolls" / f"{r.record.score_id}_orchestra.csv", roll_to_csv(r.orch))
    if rolls:
        export_concatenated([(r.record.score_id, r.piano) for r in rolls], out / "concatenated", "piano")
        export_concatenated([(r.record.score_id, r.orch) for r in rolls], out / "concatenated", "orchestra")
    print(f"ingested {len(rolls)} pairs, {len(failures)} rejected")
    return _failure_status(failures)


def cmd_align(cfg: RunConfig) -> int:
    loaded, failures = _load(cfg)
    params = cfg.align_params()
    out = Path(cfg.out) / "align"
    for a in align_corpus(corpus_rolls(loaded, cfg.fpq), params, cfg.jobs):
        x, y = event_pitch_classes(a.piano_events), event_pitch_classes(a.orch_events)
        _write(out / f"{a.score_id}_alignment.csv", alignment_report_csv(a.result, x, y, params))
        _write(out / f"{a.score_id}_piano_aligned.csv", roll_to_csv(a.aligned.piano))
        _write(out / f"{a.score_id}_orchestra_aligned.csv", roll_to_csv(a.aligned.orch))
        log.info("pair %s: score %.3f, %d matches", a.score_id, a.result.total_score, len(a.result.matches()))
    if failures:
        _write(Path(cfg.out) / "errors.json", _errors_json(failures))
    return _failure_status(failures)


def _plot_activation(stats, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(12, 3))
    ax.bar(np.arange(len(stats.activation)), stats.activation, width=1.0)
    ax.set_xlabel("orchestra row (instrument, pitch)")
    ax.set_ylabel("activation ratio")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def cmd_stats(cfg: RunConfig) -> int:
    loaded, failures = _load(cfg)
    rolls = corpus_rolls(loaded, cfg.fpq)
    aligned = align_corpus(rolls, cfg.align_params(), cfg.jobs)
    records = [r.record for r in rolls]
    # activation on aligned event-level orchestra rolls, shares on the raw pairs
    stats = corpus_stats(records, [(r.piano, r.orch) for r in rolls])
    events = [a.aligned.orch.frames(extract_events(a.aligned.orch).event_indices) for a in aligned]
    if events:
        stats = replace(stats, activation=activation_ratio(events))
    out = Path(cfg.out) / "stats"
    _write(out / "activation_ratio.csv", stats.activation_csv())
    _write(out / "composer_shares.csv", stats.composer_csv())
    if cfg.plot:
        _plot_activation(stats, out / "activation_ratio.png")
    return _failure_status(failures)


def _eval_pairs(cfg: RunConfig):
    loaded, failures = _load(cfg)
    aligned = align_corpus(corpus_rolls(loaded, cfg.fpq), cfg.align_params(), cfg.jobs)
    pairs = [a.aligned for a in aligned]
    train, _ = split_ids([p.score_id for p in pairs], cfg.split())
    pruned, maps = prune_pairs(pairs, train) if pairs else ([], {})
    return pruned, maps, failures


def _predictor(cfg: RunConfig, pairs=None):
    if cfg.predictor == "repeat":
        return RepeatPredictor()
    if cfg.predictor == "random":
        return RandomPredictor(cfg.seed)
    if pairs is None:
        raise UsageError("the oracle predictor needs ground truth and cannot generate")
    return OraclePredictor(pairs, cfg.level)


def cmd_eval(cfg: RunConfig) -> int:
    pairs, _, failures = _eval_pairs(cfg)
    if failures:
        return _failure_status(failures)
    report = evaluate(_predictor(cfg, pairs), pairs, cfg.split(), cfg.order, cfg.level)
    out = Path(cfg.out) / "eval"
    _write(out / "report.csv", report.to_csv())
    _write(out / "summary.json", report.summary_json(
        predictor=cfg.predictor, seed=cfg.seed, test_fraction=cfg.test_fraction, fpq=cfg.fpq,
        C=cfg.C, gap_open=cfg.gap_open, gap_extend=cfg.gap_extend,
        test_ids=sorted({e.score_id for e in report.per_event}, key=int),
    ))
    print(f"mean_accuracy={report.mean_accuracy:.4f} K={report.K}")
    return EXIT_OK


def _load_piano(path: Path):
    score = read_midi(path)
    instrum = instrumentation_path(path)
    if instrum.is_file():
        return normalize_instruments(score, load_instrument_map(instrum))
    imap = InstrumentMap.from_pairs([(t.name, "piano") for t in score.tracks])
    return normalize_instruments(score, imap)


def cmd_generate(cfg: RunConfig) -> int:
    if cfg.piano_midi is None:
        raise UsageError("--piano-midi is required")
    predictor = _predictor(cfg)
    if cfg.root is not None:
        pairs, maps, failures = _eval_pairs(cfg)
        if failures:
            return _failure_status(failures)
        if not pairs:
            raise UsageError("the corpus is empty; cannot derive orchestra rows")
        orch_labels = maps["orchestra"].kept_labels
    else:
        orch_labels = instrument_rows(v for v in VOCABULARY if v != "piano")
    piano = binarize(build_roll(_load_piano(Path(cfg.piano_midi)), cfg.fpq))
    orch = generate(predictor, piano, orch_labels, cfg.order)
    out = Path(cfg.out)
    stem = Path(cfg.piano_midi).stem
    _write(out / f"{stem}_orchestra.csv", roll_to_csv(orch))
    save_midi(roll_to_score(orch, velocity=80), out / f"{stem}_orchestra.mid")
    print(f"generated {orch.n_frames} frames over {orch.dimension} orchestra rows")
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    from .synth import write_synthetic_corpus

    folders = write_synthetic_corpus(cfg.out, cfg.pairs, cfg.seed)
    print(f"wrote {len(folders)} synthetic pairs to {cfg.out}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "align": cmd_align,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "generate": cmd_generate,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults stay None so that only flags given on the command line override the config file
    common.add_argument("--config", help="JSON file with RunConfig fields; flags win")
    common.add_argument("--root", help="corpus root directory")
    common.add_argument("--out", help="output directory")
    common.add_argument("--fpq", type=int, help=f"frames per quarter note (default {DEFAULT_FPQ})")
    common.add_argument("--C", dest="C", type=float, help="similarity scale (default 10)")
    common.add_argument("--gap-open", type=float, help="gap opening cost (default 3)")
    common.add_argument("--gap-extend", type=float, help="gap extension cost (default 1)")
    common.add_argument("--order", type=int, help="number of past orchestra frames (default 1)")
    common.add_argument("--seed", type=int, help="split / random predictor seed (default 0)")
    common.add_argument("--test-fraction", type=float, help="share of pairs held out (default 0.2)")
    common.add_argument("--level", choices=LEVELS, help="evaluation level (default event)")
    common.add_argument("--predictor", choices=PREDICTORS, help="baseline predictor (default repeat)")
    common.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="podkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse, normalize and write piano-roll CSVs")
    sub.add_parser("align", parents=[common], help="align every pair and write reports")
    p = sub.add_parser("stats", parents=[common], help="activation ratios and composer shares")
    p.add_argument("--plot", action="store_true", default=None, help="also write a PNG histogram")
    sub.add_parser("eval", parents=[common], help="evaluate a baseline predictor")
    p = sub.add_parser("generate", parents=[common], help="orchestrate a piano MIDI file")
    p.add_argument("--piano-midi", help="piano score to orchestrate")
    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus to --out")
    p.add_argument("--pairs", type=int, help="number of pairs (default 50)")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            values.update(json.load(f))
    names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in vars(args).items() if k in names and v is not None})
    return RunConfig(**values).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"podkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        print(f"podkit: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (PodkitError, OSError, ValueError) as exc:
        print(f"podkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
