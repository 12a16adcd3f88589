"""Orchestral inference task: predictors, accuracy, evaluation and generation.

A predictor maps the present piano frame and the ``N`` most recent
orchestra frames to a guess of the present orchestra frame. Evaluation is
one-step: the past handed to the predictor is always the ground truth.
At event level only the frames where the orchestra changes are scored and
the past is indexed by event, not by frame.
"""
from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .align import AlignmentResult
from .errors import DimensionMismatch, EmptyTestSet, OrderTooLarge
from .pianoroll import BinaryRoll, EventSequence, extract_events

LEVELS = ("frame", "event")


@dataclass(frozen=True)
class PredictionContext:
    piano_now: np.ndarray
    orch_past: tuple[np.ndarray, ...]
    order: int
    score_id: str = ""
    position: int = 0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be a positive integer")
        if len(self.orch_past) != self.order:
            raise ValueError(f"expected {self.order} past frames, got {len(self.orch_past)}")

    @property
    def orch_dimension(self) -> int:
        return len(self.orch_past[0])


class Predictor(Protocol):
    def predict(self, ctx: PredictionContext) -> np.ndarray: ...


def repeat_predictor(ctx: PredictionContext) -> np.ndarray:
    return np.array(ctx.orch_past[0], dtype=np.uint8)


def random_predictor(ctx: PredictionContext, seed: int) -> np.ndarray:
    """Independent fair coin per orchestra row.

    The generator is keyed on ``(seed, score_id, position)`` so the output
    does not depend on call order and the function is safe to share.
    """
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(ctx.score_id.encode("utf-8")), int(ctx.position)]
    rng = np.random.default_rng(key)
    return (rng.random(ctx.orch_dimension) < 0.5).astype(np.uint8)


class RepeatPredictor:
    name = "repeat"

    def predict(self, ctx):
        return repeat_predictor(ctx)


@dataclass(frozen=True)
class RandomPredictor:
    seed: int = 0
    name = "random"

    def predict(self, ctx):
        return random_predictor(ctx, self.seed)


# --------------------------------------------------------------------------
# accuracy

def note_counts(truth, predicted) -> tuple[int, int, int]:
    truth = np.asarray(truth) > 0
    predicted = np.asarray(predicted) > 0
    if truth.shape != predicted.shape:
        raise DimensionMismatch(f"truth has shape {truth.shape}, prediction {predicted.shape}")
    tp = int(np.count_nonzero(truth & predicted))
    fp = int(np.count_nonzero(predicted & ~truth))
    fn = int(np.count_nonzero(truth & ~predicted))
    return tp, fp, fn


def _accuracy(tp, fp, fn) -> float:
    # two silent frames agree perfectly
    total = tp + fp + fn
    return 100.0 if total == 0 else 100.0 * tp / total


def accuracy_frame(truth, predicted) -> float:
    """``100 * TP / (TP + FP + FN)``; 100 when both frames are silent."""
    return _accuracy(*note_counts(truth, predicted))


# --------------------------------------------------------------------------
# aligned pairs

@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Piano and orchestra rolls on one shared frame grid.

    ``match_starts`` are the frames where an aligned (piano, orchestra)
    event pair begins; training points live there.
    """

    score_id: str
    piano: BinaryRoll
    orch: BinaryRoll
    match_starts: np.ndarray | None = None

    def __post_init__(self):
        if self.piano.n_frames != self.orch.n_frames:
            raise DimensionMismatch(
                f"{self.score_id}: piano has {self.piano.n_frames} frames, orchestra {self.orch.n_frames}"
            )
        if self.match_starts is None:
            stacked = np.concatenate([self.piano.values, self.orch.values])
            starts = extract_events(BinaryRoll(stacked, [("_", k) for k in range(len(stacked))])).event_indices
            object.__setattr__(self, "match_starts", starts)

    @property
    def n_frames(self) -> int:
        return self.piano.n_frames

    def with_rolls(self, piano: BinaryRoll, orch: BinaryRoll) -> "AlignedPair":
        return AlignedPair(self.score_id, piano, orch, self.match_starts)


def project_matches(score_id: str, piano: EventSequence, orch: EventSequence,
                    result: AlignmentResult) -> AlignedPair:
    """Keep only matched event pairs, laid out on the piano's rhythm.

    Each matched orchestra event is held for the duration of the piano
    event it is matched with.
    """
    pairs = result.matches()
    durations = piano.durations()
    lengths = np.array([durations[i] for i, _ in pairs], dtype=int)
    pi = np.array([i for i, _ in pairs], dtype=int)
    oj = np.array([j for _, j in pairs], dtype=int)
    p_values = np.repeat(piano.frames[:, pi], lengths, axis=1) if pairs else np.zeros((len(piano.row_labels), 0))
    o_values = np.repeat(orch.frames[:, oj], lengths, axis=1) if pairs else np.zeros((len(orch.row_labels), 0))
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(int) if pairs else np.zeros(0, dtype=int)
    return AlignedPair(
        score_id,
        BinaryRoll(p_values, piano.row_labels, piano.frames_per_quarter),
        BinaryRoll(o_values, orch.row_labels, orch.frames_per_quarter),
        starts,
    )


def evaluation_sequence(pair: AlignedPair, level: str):
    """``(frame_indices, piano_columns, orchestra_columns)`` scored at ``level``."""
    if level == "frame":
        idx = np.arange(pair.n_frames)
    elif level == "event":
        idx = extract_events(pair.orch).event_indices
    else:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    return idx, pair.piano.values[:, idx], pair.orch.values[:, idx]


def _context(P, O, t, order, score_id) -> PredictionContext:
    past = tuple(O[:, t - k] for k in range(1, order + 1))
    return PredictionContext(P[:, t], past, order, score_id, t)


class OraclePredictor:
    """Returns the ground truth; an upper bound for sanity checks."""

    name = "oracle"

    def __init__(self, pairs: Sequence[AlignedPair], level: str):
        self._truth = {p.score_id: evaluation_sequence(p, level)[2] for p in pairs}

    def predict(self, ctx):
        return np.array(self._truth[ctx.score_id][:, ctx.position], dtype=np.uint8)


# --------------------------------------------------------------------------
# splitting and evaluation

@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    test_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")


def split_ids(score_ids, split: SplitSpec) -> tuple[list[str], list[str]]:
    """Disjoint train/test split over whole score pairs, deterministic in the seed."""
    ids = sorted(set(score_ids))
    if not ids:
        return [], []
    n_test = min(len(ids), max(1, round(split.test_fraction * len(ids))))
    order = np.random.default_rng(split.seed).permutation(len(ids))
    test = sorted(ids[k] for k in order[:n_test])
    test_set = set(test)
    return [i for i in ids if i not in test_set], test


@dataclass(frozen=True)
class EventAccuracy:
    score_id: str
    t_e: int
    tp: int
    fp: int
    fn: int
    accuracy: float


@dataclass
class AccuracyReport:
    per_event: list[EventAccuracy] = field(default_factory=list)
    level: str = "event"
    order: int = 1

    @property
    def K(self) -> int:
        return len(self.per_event)

    @property
    def mean_accuracy(self) -> float:
        if not self.per_event:
            return 0.0
        return float(sum(e.accuracy for e in self.per_event) / self.K)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["score_id", "t_e", "TP", "FP", "FN", "accuracy"])
        for e in self.per_event:
            writer.writerow([e.score_id, e.t_e, e.tp, e.fp, e.fn, repr(e.accuracy)])
        buf.write(f"# mean_accuracy={self.mean_accuracy!r} K={self.K}\n")
        return buf.getvalue()

    def summary(self, **extra) -> dict:
        return {"mean_accuracy": self.mean_accuracy, "K": self.K,
                "level": self.level, "order": self.order, **extra}

    def summary_json(self, **extra) -> str:
        return json.dumps(self.summary(**extra), indent=2, sort_keys=True) + "\n"


def evaluate_pairs(predictor: Predictor, pairs: Sequence[AlignedPair], order: int = 1,
                   level: str = "event") -> AccuracyReport:
    """Score every pair of ``pairs`` (already the test subset)."""
    if order < 1:
        raise ValueError("order must be a positive integer")
    if not pairs:
        raise EmptyTestSet("no test pairs to evaluate")
    report = AccuracyReport(level=level, order=order)
    for pair in pairs:
        idx, P, O = evaluation_sequence(pair, level)
        if len(idx) < order:
            raise OrderTooLarge(f"{pair.score_id}: {len(idx)} {level}s, order {order}")
        for t in range(order, len(idx)):
            predicted = predictor.predict(_context(P, O, t, order, pair.score_id))
            tp, fp, fn = note_counts(O[:, t], predicted)
            report.per_event.append(EventAccuracy(pair.score_id, int(idx[t]), tp, fp, fn, _accuracy(tp, fp, fn)))
    if not report.per_event:
        raise EmptyTestSet("test pairs contain no evaluation points")
    return report


def evaluate(predictor: Predictor, pairs: Sequence[AlignedPair], split: SplitSpec,
             order: int = 1, level: str = "event") -> AccuracyReport:
    """Split by score pair and score the test subset (mean over all test events)."""
    by_id = {p.score_id: p for p in pairs}
    _, test = split_ids(by_id, split)
    return evaluate_pairs(predictor, [by_id[i] for i in test], order, level)


def extract_training_points(pair: AlignedPair, order: int = 1):
    """``(context, target)`` at each matched event ``t >= order`` whose piano frame sounds.

    Silent piano events are skipped as targets but stay in the past windows.
    """
    starts = pair.match_starts
    P = pair.piano.values[:, starts]
    O = pair.orch.values[:, starts]
    points = []
    for t in range(order, len(starts)):
        if P[:, t].any():
            points.append((_context(P, O, t, order, pair.score_id), O[:, t].copy()))
    return points


def generate(predictor: Predictor, piano_roll: BinaryRoll, orch_labels, order: int = 1,
             score_id: str = "generated") -> BinaryRoll:
    """Orchestrate a piano roll event by event.

    Predictions are fed back as the past (zeros before the start); silent
    piano events become silent orchestra events without consulting the
    predictor. Each predicted frame is held until the next piano event.
    """
    orch_labels = tuple(orch_labels)
    events = extract_events(piano_roll)
    dim = len(orch_labels)
    history = [np.zeros(dim, dtype=np.uint8) for _ in range(order)]
    outputs = []
    for k in range(len(events)):
        piano_now = events.column(k)
        if piano_now.any():
            ctx = PredictionContext(piano_now, tuple(history), order, score_id, k)
            frame = np.asarray(predictor.predict(ctx), dtype=np.uint8)
            if frame.shape != (dim,):
                raise DimensionMismatch(f"predictor returned shape {frame.shape}, expected ({dim},)")
        else:
            frame = np.zeros(dim, dtype=np.uint8)
        outputs.append(frame)
        history = [frame] + history[:-1]
    if outputs:
        values = np.repeat(np.stack(outputs, axis=1), events.durations(), axis=1)
    else:
        values = np.zeros((dim, piano_roll.n_frames), dtype=np.uint8)
    return BinaryRoll(values, orch_labels, piano_roll.frames_per_quarter)
