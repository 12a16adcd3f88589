"""Global alignment of chord sequences with affine gaps.

Chords are compared through their pitch-class content. Two 12-dim binary
pitch-class vectors ``a`` and ``b`` score

    C * sum_k delta(a_k + b_k) / max(|a + b|_1, 1)

with ``delta(0) = 0``, ``delta(1) = -1``, ``delta(2) = +1``, and a score of
zero whenever either chord is silent. A gap run of length ``L`` costs
``gap_open + (L - 1) * gap_extend``.

The dynamic program keeps three matrices (match, gap in the second
sequence, gap in the first) and runs on integers: every score is scaled by
a common denominator of all possible similarity values, so optimal scores
and tie-breaking are exact.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Union

import numpy as np

from .pianoroll import EventSequence

N_CLASSES = 12
NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

# every possible |a + b|_1 lies in 1..24
_NORM_LCM = reduce(math.lcm, range(1, 2 * N_CLASSES + 1))
_INT_LIMIT = 2**60


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"parameter must be finite, got {x}")
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class AlignParams:
    C: float = 10
    gap_open: float = 3
    gap_extend: float = 1

    def __post_init__(self):
        for name in ("C", "gap_open", "gap_extend"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.gap_open < 0 or self.gap_extend < 0:
            raise ValueError("gap costs must be non-negative")
        if self.gap_extend > self.gap_open:
            raise ValueError("gap_extend must not exceed gap_open")

    def exact(self) -> tuple[Fraction, Fraction, Fraction]:
        return _as_fraction(self.C), _as_fraction(self.gap_open), _as_fraction(self.gap_extend)


@dataclass(frozen=True)
class Match:
    i: int
    j: int


@dataclass(frozen=True)
class GapInFirst:
    """An element of the second sequence faces a gap in the first."""
    j: int


@dataclass(frozen=True)
class GapInSecond:
    """An element of the first sequence faces a gap in the second."""
    i: int


Step = Union[Match, GapInFirst, GapInSecond]


@dataclass(frozen=True)
class AlignmentResult:
    steps: tuple[Step, ...]
    exact_score: Fraction

    @property
    def total_score(self) -> float:
        return float(self.exact_score)

    def matches(self) -> list[tuple[int, int]]:
        return [(s.i, s.j) for s in self.steps if isinstance(s, Match)]

    def swapped(self) -> "AlignmentResult":
        """The same alignment read with the two sequences exchanged."""
        flip = {Match: lambda s: Match(s.j, s.i),
                GapInFirst: lambda s: GapInSecond(s.j),
                GapInSecond: lambda s: GapInFirst(s.i)}
        return AlignmentResult(tuple(flip[type(s)](s) for s in self.steps), self.exact_score)


# --------------------------------------------------------------------------
# pitch classes and similarity

def pitch_class_vector(classes) -> np.ndarray:
    """Binary 12-vector from an iterable of pitch classes (or MIDI pitches)."""
    v = np.zeros(N_CLASSES, dtype=np.uint8)
    for c in classes:
        v[int(c) % N_CLASSES] = 1
    return v


def _class_matrix(pitches) -> np.ndarray:
    pitches = np.asarray(pitches, dtype=int)
    m = np.zeros((N_CLASSES, len(pitches)), dtype=np.uint8)
    m[pitches % N_CLASSES, np.arange(len(pitches))] = 1
    return m


def to_pitch_class(frame, row_labels) -> np.ndarray:
    """Fold a binary frame onto 12 pitch classes; a class is on if any of its notes is."""
    return pitch_classes(np.asarray(frame).reshape(-1, 1), row_labels)[0]


def pitch_classes(frames, row_labels) -> np.ndarray:
    """Pitch-class vectors of every column of ``frames``, shape ``(n_columns, 12)``."""
    frames = np.asarray(frames)
    fold = _class_matrix([p for _, p in row_labels])
    return ((fold.astype(np.int64) @ (frames > 0).astype(np.int64)) > 0).astype(np.uint8).T


def _similarity_parts(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    both = a @ b.T
    na = a.sum(axis=-1)
    nb = b.sum(axis=-1)
    norm = np.add.outer(na, nb) if a.ndim == 2 else na + nb
    delta_sum = 3 * both - norm
    silent = (np.multiply.outer(na, nb) if a.ndim == 2 else na * nb) == 0
    return delta_sum, np.maximum(norm, 1), silent


def similarity_exact(a, b, params: AlignParams = AlignParams()) -> Fraction:
    C, _, _ = params.exact()
    delta_sum, norm, silent = _similarity_parts(a, b)
    if silent:
        return Fraction(0)
    return C * int(delta_sum) / int(norm)


def similarity(a, b, params: AlignParams = AlignParams()) -> float:
    """Similarity of two pitch-class vectors, in ``[-C, C/2]``."""
    return float(similarity_exact(a, b, params))


def similarity_matrix(x, y, params: AlignParams = AlignParams()) -> np.ndarray:
    """Float similarities of every pair, shape ``(len(x), len(y))``."""
    x = np.asarray(x).reshape(-1, N_CLASSES)
    y = np.asarray(y).reshape(-1, N_CLASSES)
    delta_sum, norm, silent = _similarity_parts(x, y)
    out = float(params.C) * delta_sum / norm
    out[silent] = 0.0
    return out


# --------------------------------------------------------------------------
# dynamic programming

def _scaled_inputs(x, y, params):
    """Integer similarity matrix and gap costs sharing one scale factor.

    Falls back to floats (scale 1) if the integers could overflow.
    """
    C, g_open, g_ext = params.exact()
    scale = math.lcm(_NORM_LCM * C.denominator, g_open.denominator, g_ext.denominator)
    delta_sum, norm, silent = _similarity_parts(x, y)
    per_step = abs(C) * scale + g_open * scale
    if per_step * (len(x) + len(y) + 2) < _INT_LIMIT:
        unit = C.numerator * (scale // C.denominator)
        sim = unit * delta_sum // norm
        sim[silent] = 0
        return sim.astype(np.int64), int(g_open * scale), int(g_ext * scale), scale
    sim = float(C) * delta_sum / norm
    sim[silent] = 0.0
    return sim, float(g_open), float(g_ext), None


def _pick(candidates):
    """Index of the first maximal candidate; order encodes the tie preference."""
    best = 0
    for k in range(1, len(candidates)):
        if candidates[k] > candidates[best]:
            best = k
    return best


def align(x, y, params: AlignParams = AlignParams()) -> AlignmentResult:
    """Optimal global alignment of two sequences of pitch-class vectors.

    Ties in the traceback prefer a match, then a gap in the second
    sequence, then a gap in the first.
    """
    x = np.asarray(x, dtype=np.uint8).reshape(-1, N_CLASSES)
    y = np.asarray(y, dtype=np.uint8).reshape(-1, N_CLASSES)
    n, m = len(x), len(y)
    sim, g_open, g_ext, scale = _scaled_inputs(x, y, params)
    exact = scale is not None
    dtype = np.int64 if exact else np.float64
    neg = dtype(-(2**61)) if exact else -np.inf

    M = np.full((n + 1, m + 1), neg, dtype=dtype)
    X = np.full((n + 1, m + 1), neg, dtype=dtype)  # last step GapInSecond
    Y = np.full((n + 1, m + 1), neg, dtype=dtype)  # last step GapInFirst
    M[0, 0] = 0
    ramp = np.arange(m + 1, dtype=dtype) * g_ext
    for i in range(n + 1):
        if i > 0:
            diag = np.maximum(np.maximum(M[i - 1], X[i - 1]), Y[i - 1])
            M[i, 1:] = sim[i - 1] + diag[:-1]
            X[i] = np.maximum(np.maximum(M[i - 1] - g_open, X[i - 1] - g_ext), Y[i - 1] - g_open)
        if m:
            # Y[i, j] = max_{k < j} (max(M, X)[i, k] - open - (j - 1 - k) * ext)
            opened = np.maximum(M[i], X[i]) - g_open + ramp
            best = np.maximum.accumulate(opened[:-1])
            Y[i, 1:] = np.maximum(best - ramp[:-1], neg)

    steps = []
    i, j = n, m
    state = _pick((M[i, j], X[i, j], Y[i, j]))
    final = (M, X, Y)[state][i, j]
    while i > 0 or j > 0:
        if state == 0:
            steps.append(Match(i - 1, j - 1))
            i, j = i - 1, j - 1
            state = _pick((M[i, j], X[i, j], Y[i, j]))
        elif state == 1:
            steps.append(GapInSecond(i - 1))
            i -= 1
            state = _pick((M[i, j] - g_open, X[i, j] - g_ext, Y[i, j] - g_open))
        else:
            steps.append(GapInFirst(j - 1))
            j -= 1
            state = _pick((M[i, j] - g_open, X[i, j] - g_open, Y[i, j] - g_ext))
    steps.reverse()
    score = Fraction(int(final), scale) if exact else Fraction(repr(float(final)))
    return AlignmentResult(tuple(steps), score)


def step_contributions(steps, x, y, params: AlignParams = AlignParams()) -> list[Fraction]:
    """Exact score contribution of every step; a gap run is charged open then extend."""
    _, g_open, g_ext = params.exact()
    out = []
    prev = None
    for s in steps:
        if isinstance(s, Match):
            out.append(similarity_exact(x[s.i], y[s.j], params))
        else:
            out.append(-(g_ext if type(s) is type(prev) else g_open))
        prev = s
    return out


def score_steps(steps, x, y, params: AlignParams = AlignParams()) -> Fraction:
    return sum(step_contributions(steps, x, y, params), Fraction(0))


# --------------------------------------------------------------------------
# event sequences

def event_pitch_classes(events: EventSequence) -> np.ndarray:
    return pitch_classes(events.frames, events.row_labels)


def align_pair(piano: EventSequence, orch: EventSequence,
               params: AlignParams = AlignParams()) -> AlignmentResult:
    """Align piano events (first) with orchestra events (second).

    Step indices are event positions; ``events.event_indices`` maps them
    back to frames.
    """
    return align(event_pitch_classes(piano), event_pitch_classes(orch), params)


def report_rows(result: AlignmentResult, x, y, params: AlignParams = AlignParams()):
    kinds = {Match: "match", GapInFirst: "gap_in_piano", GapInSecond: "gap_in_orchestra"}
    contributions = step_contributions(result.steps, x, y, params)
    for k, (s, c) in enumerate(zip(result.steps, contributions)):
        piano = s.i if isinstance(s, (Match, GapInSecond)) else "-"
        orch = s.j if isinstance(s, (Match, GapInFirst)) else "-"
        yield k, piano, orch, kinds[type(s)], repr(float(c))


def alignment_report_csv(result: AlignmentResult, x, y, params: AlignParams = AlignParams()) -> str:
    """``step,piano_event,orch_event,kind,score_contribution``; ``-`` marks a gapped side."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "piano_event", "orch_event", "kind", "score_contribution"])
    writer.writerows(report_rows(result, x, y, params))
    return buf.getvalue()
