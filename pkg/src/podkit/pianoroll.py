"""Piano-roll matrices: construction, concatenation, binarization, pruning and events.

A roll is a ``D x T`` matrix whose rows are labelled ``(instrument, pitch)``
and whose columns are frames on a fixed grid of ``frames_per_quarter``
frames per quarter note. Rows are always kept in canonical order, sorted by
instrument name then pitch, so any two rolls over the same instruments line
up row for row.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, NonIntegerQuantum
from .midi import MidiScore, NoteEvent, Track

N_PITCHES = 128
DEFAULT_FPQ = 8

RowLabel = tuple[str, int]


def instrument_rows(instruments) -> tuple[RowLabel, ...]:
    """128 pitch rows for every instrument, alphabetical by instrument."""
    return tuple((name, p) for name in sorted(set(instruments)) for p in range(N_PITCHES))


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    raw = np.asarray(values)
    if raw.size and (raw.min() < 0 or raw.max() > np.iinfo(dtype).max):
        raise ValueError("roll values out of range")
    arr = np.array(raw, dtype=dtype, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"roll values must be 2-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PianoRoll:
    """Intensity roll; ``values[r, t]`` is a velocity, 0 meaning off."""

    values: np.ndarray
    row_labels: tuple[RowLabel, ...]
    frames_per_quarter: int = DEFAULT_FPQ

    _dtype = np.uint8

    def __post_init__(self):
        values = _frozen(self.values, self._dtype)
        labels = tuple((str(i), int(p)) for i, p in self.row_labels)
        if values.shape[0] != len(labels):
            raise ValueError(f"{values.shape[0]} rows but {len(labels)} row labels")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate (instrument, pitch) row labels")
        if self.frames_per_quarter < 1:
            raise ValueError("frames_per_quarter must be positive")
        self._check_values(values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_labels", labels)

    def _check_values(self, values):
        if values.size and values.max() > 127:
            raise ValueError("intensities must lie in [0, 127]")

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def pitches(self) -> np.ndarray:
        return np.array([p for _, p in self.row_labels], dtype=int)

    def replace(self, values=None, row_labels=None):
        return type(self)(
            self.values if values is None else values,
            self.row_labels if row_labels is None else row_labels,
            self.frames_per_quarter,
        )

    def frames(self, indices) -> "PianoRoll":
        return self.replace(values=self.values[:, np.asarray(indices, dtype=int)])

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.row_labels == other.row_labels
            and self.frames_per_quarter == other.frames_per_quarter
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"{type(self).__name__}(D={self.dimension}, T={self.n_frames}, fpq={self.frames_per_quarter})"


@dataclass(frozen=True, eq=False, repr=False)
class BinaryRoll(PianoRoll):
    """On/off roll with every entry in {0, 1}."""

    def _check_values(self, values):
        if values.size and values.max() > 1:
            raise ValueError("binary roll entries must be 0 or 1")


def build_roll(score: MidiScore, frames_per_quarter: int = DEFAULT_FPQ,
               instruments=None, n_frames: int | None = None) -> PianoRoll:
    """Quantize a normalized score into a piano roll.

    Frame ``f`` covers ticks ``[f*q, (f+1)*q)`` with
    ``q = ticks_per_quarter / frames_per_quarter``; a note sounding during
    any part of that interval marks the cell with its velocity, and
    overlapping notes keep the loudest. ``instruments`` fixes the row set
    (defaults to the score's own tracks). ``n_frames`` pads or truncates.
    """
    tpq = score.ticks_per_quarter
    if frames_per_quarter < 1 or tpq % frames_per_quarter:
        raise NonIntegerQuantum(
            f"ticks_per_quarter {tpq} is not divisible by frames_per_quarter {frames_per_quarter}"
        )
    quantum = tpq // frames_per_quarter
    names = score.track_names() if instruments is None else list(instruments)
    labels = instrument_rows(names)
    base = {name: k * N_PITCHES for k, name in enumerate(sorted(set(names)))}
    missing = [t.name for t in score.tracks if t.name not in base]
    if missing:
        raise ValueError(f"tracks not covered by the instrument set: {missing}")

    total = -(-score.end_tick // quantum) if n_frames is None else n_frames
    values = np.zeros((len(labels), total), dtype=np.uint8)
    for track in score.tracks:
        offset = base[track.name]
        for note in track.events:
            first = note.onset // quantum
            last = (note.end - 1) // quantum
            if first >= total:
                continue
            row = values[offset + note.pitch, first:last + 1]
            np.maximum(row, note.velocity, out=row)
    return PianoRoll(values, labels, frames_per_quarter)


def concat_orchestra(rolls) -> PianoRoll:
    """Stack rolls along the pitch axis and sort rows into canonical order."""
    rolls = list(rolls)
    if not rolls:
        raise ValueError("concat_orchestra needs at least one roll")
    first = rolls[0]
    for r in rolls[1:]:
        if r.n_frames != first.n_frames:
            raise LengthMismatch(f"frame counts differ: {first.n_frames} vs {r.n_frames}")
        if r.frames_per_quarter != first.frames_per_quarter:
            raise LengthMismatch("frames_per_quarter differs between rolls")
    labels = [lab for r in rolls for lab in r.row_labels]
    values = np.concatenate([r.values for r in rolls], axis=0)
    order = sorted(range(len(labels)), key=lambda k: labels[k])
    cls = BinaryRoll if all(isinstance(r, BinaryRoll) for r in rolls) else PianoRoll
    return cls(values[order], [labels[k] for k in order], first.frames_per_quarter)


def split_rows(roll: PianoRoll, groups) -> list[PianoRoll]:
    """Split a roll into sub-rolls holding the given row index groups."""
    return [roll.replace(values=roll.values[list(g)], row_labels=[roll.row_labels[k] for k in g])
            for g in groups]


def split_instruments(roll: PianoRoll) -> dict[str, PianoRoll]:
    groups: dict[str, list[int]] = {}
    for k, (name, _) in enumerate(roll.row_labels):
        groups.setdefault(name, []).append(k)
    return dict(zip(groups, split_rows(roll, groups.values())))


def binarize(roll: PianoRoll) -> BinaryRoll:
    return BinaryRoll((roll.values > 0).astype(np.uint8), roll.row_labels, roll.frames_per_quarter)


@dataclass(frozen=True)
class PitchPruneMap:
    kept_rows: tuple[int, ...]
    original_labels: tuple[RowLabel, ...]

    def __post_init__(self):
        kept = tuple(int(k) for k in self.kept_rows)
        if any(b <= a for a, b in zip(kept, kept[1:])):
            raise ValueError("kept_rows must be strictly increasing")
        if kept and not 0 <= kept[0] <= kept[-1] < len(self.original_labels):
            raise ValueError("kept_rows out of range")
        object.__setattr__(self, "kept_rows", kept)
        object.__setattr__(self, "original_labels", tuple(self.original_labels))

    @property
    def original_dimension(self) -> int:
        return len(self.original_labels)

    @property
    def kept_labels(self) -> tuple[RowLabel, ...]:
        return tuple(self.original_labels[k] for k in self.kept_rows)

    def apply(self, roll: PianoRoll) -> PianoRoll:
        if roll.row_labels != self.original_labels:
            raise ValueError("roll rows do not match the pruning map")
        return roll.replace(values=roll.values[list(self.kept_rows)], row_labels=self.kept_labels)

    def expand(self, roll: PianoRoll) -> PianoRoll:
        """Inverse of :meth:`apply`; removed rows come back as zeros."""
        if roll.row_labels != self.kept_labels:
            raise ValueError("roll rows do not match the pruned labels")
        values = np.zeros((self.original_dimension, roll.n_frames), dtype=roll.values.dtype)
        values[list(self.kept_rows)] = roll.values
        return roll.replace(values=values, row_labels=self.original_labels)


def prune_pitches(rolls) -> tuple[PitchPruneMap, list[BinaryRoll]]:
    """Drop rows that are never on anywhere in the (training) collection."""
    rolls = list(rolls)
    if not rolls:
        raise ValueError("prune_pitches needs at least one roll")
    labels = rolls[0].row_labels
    if any(r.row_labels != labels for r in rolls):
        raise ValueError("all rolls must share row labels")
    active = np.zeros(len(labels), dtype=bool)
    for r in rolls:
        active |= r.values.any(axis=1)
    pmap = PitchPruneMap(tuple(np.flatnonzero(active)), labels)
    return pmap, [pmap.apply(r) for r in rolls]


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Frames of a binary roll at the indices where its column changes."""

    event_indices: np.ndarray
    frames: np.ndarray
    source_length: int
    row_labels: tuple[RowLabel, ...] = field(default=())
    frames_per_quarter: int = DEFAULT_FPQ

    def __len__(self):
        return len(self.event_indices)

    def column(self, k: int) -> np.ndarray:
        return self.frames[:, k]

    def durations(self) -> np.ndarray:
        """Frames each event is held for before the next one starts."""
        bounds = np.append(self.event_indices, self.source_length)
        return np.diff(bounds)

    def as_roll(self) -> BinaryRoll:
        """The events as consecutive frames, durations discarded."""
        return BinaryRoll(self.frames, self.row_labels, self.frames_per_quarter)


def extract_events(roll: BinaryRoll) -> EventSequence:
    values = roll.values
    if roll.n_frames == 0:
        indices = np.zeros(0, dtype=int)
    else:
        changed = (values[:, 1:] != values[:, :-1]).any(axis=0)
        indices = np.concatenate([[0], np.flatnonzero(changed) + 1]).astype(int)
    frames = values[:, indices].copy()
    frames.setflags(write=False)
    indices.setflags(write=False)
    return EventSequence(indices, frames, roll.n_frames, roll.row_labels, roll.frames_per_quarter)


def hold_events(events: EventSequence) -> BinaryRoll:
    """Hold each event frame until the next event index."""
    values = np.repeat(events.frames, events.durations(), axis=1)
    return BinaryRoll(values.reshape(len(events.row_labels), events.source_length),
                      events.row_labels, events.frames_per_quarter)


def roll_to_score(roll: PianoRoll, ticks_per_quarter: int = 480, velocity: int | None = None) -> MidiScore:
    """Turn every run of equal non-zero cells into a note, one track per instrument.

    ``velocity`` overrides the cell values (needed for binary rolls).
    """
    if ticks_per_quarter % roll.frames_per_quarter:
        raise NonIntegerQuantum("ticks_per_quarter must be a multiple of frames_per_quarter")
    quantum = ticks_per_quarter // roll.frames_per_quarter
    tracks: dict[str, list[NoteEvent]] = {}
    for (name, pitch), row in zip(roll.row_labels, roll.values):
        padded = np.concatenate([[0], row.astype(int), [0]])
        changes = np.flatnonzero(padded[1:] != padded[:-1])
        for start, stop in zip(changes[:-1], changes[1:]):
            level = int(padded[start + 1])
            if level:
                tracks.setdefault(name, []).append(NoteEvent(
                    pitch, int(start) * quantum, int(stop - start) * quantum, velocity or level))
    return MidiScore(tuple(Track(n, tuple(tracks[n])) for n in sorted(tracks)), ticks_per_quarter)


# --------------------------------------------------------------------------
# CSV

def format_label(label: RowLabel) -> str:
    return f"{label[0]}:{label[1]}"


def parse_label(text: str) -> RowLabel:
    name, _, pitch = text.rpartition(":")
    if not name or not pitch.isdigit():
        raise ValueError(f"bad row label {text!r}")
    return name, int(pitch)


def roll_to_csv(roll: PianoRoll, out=None) -> str | None:
    """One row per frame: ``frame,<instrument:pitch>,...``.

    Returns the text if ``out`` is None, otherwise writes to that path.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame", *map(format_label, roll.row_labels)])
    for t, column in enumerate(roll.values.T):
        writer.writerow([t, *column.tolist()])
    if out is None:
        return buf.getvalue()
    Path(out).write_text(buf.getvalue(), encoding="utf-8")
    return None


def parse_roll_csv(text: str, frames_per_quarter: int = DEFAULT_FPQ, binary: bool = False) -> PianoRoll:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "frame":
        raise ValueError("piano-roll CSV must start with a 'frame' header column")
    labels = [parse_label(h) for h in rows[0][1:]]
    body = np.array([[int(v) for v in row[1:]] for row in rows[1:]], dtype=np.int64)
    values = body.T if body.size else np.zeros((len(labels), len(rows) - 1), dtype=np.int64)
    cls = BinaryRoll if binary else PianoRoll
    return cls(values, labels, frames_per_quarter)


def read_roll_csv(path, frames_per_quarter: int = DEFAULT_FPQ, binary: bool = False) -> PianoRoll:
    return parse_roll_csv(Path(path).read_text(encoding="utf-8"), frames_per_quarter, binary)
