"""Corpus-level processing shared by the command line tools."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .align import AlignmentResult, AlignParams, align_pair
from .corpus import PairRecord, discover, instrumentation_path
from .errors import IntegrityError, PodkitError
from .instruments import load_instrument_map, normalize_instruments
from .midi import MidiScore, read_midi
from .pianoroll import (
    DEFAULT_FPQ, EventSequence, PianoRoll, binarize, build_roll, extract_events, prune_pitches,
)
from .task import AlignedPair, project_matches


def parallel_map(fn, items, jobs: int | None = None) -> list:
    """Ordered map over a process pool; serial for one job or one item."""
    items = list(items)
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def load_normalized(midi_path) -> MidiScore:
    """Parse a MIDI file and normalize it with the instrumentation CSV next to it."""
    imap = load_instrument_map(instrumentation_path(midi_path))
    return normalize_instruments(read_midi(midi_path), imap)


@dataclass(frozen=True)
class LoadedPair:
    record: PairRecord
    piano: MidiScore
    orch: MidiScore


@dataclass(frozen=True)
class LoadFailure:
    folder_id: int
    role: str
    error: str
    kind: str
    integrity: bool


def _load_one(args):
    root, record = args
    out = {}
    for role in ("piano", "orchestra"):
        try:
            out[role] = load_normalized(Path(root) / record.path(role))
        except (PodkitError, OSError, ValueError) as exc:
            return LoadFailure(record.folder_id, role, str(exc), type(exc).__name__,
                               isinstance(exc, IntegrityError))
    return LoadedPair(record, out["piano"], out["orchestra"])


def load_corpus(root, jobs: int | None = None) -> tuple[list[LoadedPair], list[LoadFailure]]:
    """Discover and parse every pair; failures are collected per folder."""
    records, errors = discover(root, strict=False)
    failures = [LoadFailure(e.folder_id, "metadata", str(e), type(e).__name__, True) for e in errors]
    loaded = []
    for item in parallel_map(_load_one, [(str(root), r) for r in records], jobs):
        (failures if isinstance(item, LoadFailure) else loaded).append(item)
    failures.sort(key=lambda f: f.folder_id)
    return loaded, failures


@dataclass(frozen=True)
class PairRolls:
    record: PairRecord
    piano: PianoRoll
    orch: PianoRoll


def corpus_rolls(pairs, frames_per_quarter: int = DEFAULT_FPQ) -> list[PairRolls]:
    """Piano rolls with one row set per side for the whole corpus."""
    piano_instruments = sorted({t.name for p in pairs for t in p.piano.tracks})
    orch_instruments = sorted({t.name for p in pairs for t in p.orch.tracks})
    return [
        PairRolls(p.record,
                  build_roll(p.piano, frames_per_quarter, piano_instruments),
                  build_roll(p.orch, frames_per_quarter, orch_instruments))
        for p in pairs
    ]


@dataclass(frozen=True)
class PairAlignment:
    score_id: str
    piano_events: EventSequence
    orch_events: EventSequence
    result: AlignmentResult
    aligned: AlignedPair


def align_rolls(score_id: str, piano: PianoRoll, orch: PianoRoll,
                params: AlignParams = AlignParams()) -> PairAlignment:
    piano_events = extract_events(binarize(piano))
    orch_events = extract_events(binarize(orch))
    result = align_pair(piano_events, orch_events, params)
    return PairAlignment(score_id, piano_events, orch_events, result,
                         project_matches(score_id, piano_events, orch_events, result))


def _align_item(args):
    return align_rolls(*args)


def align_corpus(rolls, params: AlignParams = AlignParams(), jobs: int | None = None) -> list[PairAlignment]:
    return parallel_map(_align_item, [(r.record.score_id, r.piano, r.orch, params) for r in rolls], jobs)


def prune_pairs(pairs, train_ids) -> tuple[list[AlignedPair], dict]:
    """Drop pitches never played in the training pairs, on both sides."""
    train_ids = set(train_ids)
    train = [p for p in pairs if p.score_id in train_ids] or list(pairs)
    piano_map, _ = prune_pitches([p.piano for p in train])
    orch_map, _ = prune_pitches([p.orch for p in train])
    pruned = [p.with_rolls(piano_map.apply(p.piano), orch_map.apply(p.orch)) for p in pairs]
    return pruned, {"piano": piano_map, "orchestra": orch_map}
