"""Deterministic synthetic piano/orchestra corpora for tests and demos.

A synthetic piano part is a chord progression on a sixteenth-note grid. Its
"orchestration" distributes the chord tones over a handful of instruments,
with desks of one section on separate tracks, and is perturbed by an
orchestral introduction, dropped passages and inserted chords so that the
pair really needs aligning.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .midi import MidiScore, NoteEvent, Track, save_midi

TPQ = 480
SIXTEENTH = TPQ // 4

# raw track name, canonical instrument, lowest pitch, highest pitch
ORCHESTRA_DESKS = (
    ("Flute 1", "flute", 60, 96),
    ("Clarinet in Bb", "clarinet", 50, 89),
    ("Bassoon", "bassoon", 34, 72),
    ("Violins I", "violin", 55, 100),
    ("Violins II", "violin", 55, 96),
    ("Viola", "viola", 48, 84),
    ("Violoncello", "violoncello", 36, 72),
    ("Contrabass", "double_bass", 28, 55),
)
PIANO_TRACKS = (("Piano RH", "piano"), ("Piano LH", "piano"))

PIANO_COMPOSERS = ("Beethoven", "Debussy", "Mussorgsky", "Schumann")
ORCHESTRATORS = ("Liszt", "Ravel", "Stokowski", "Debussy")

# chord qualities as pitch-class offsets from the root
_QUALITIES = ((0, 4, 7), (0, 3, 7), (0, 4, 7, 10), (0, 3, 6), (0, 5, 7))


def random_chord(rng: np.random.Generator) -> tuple[int, ...]:
    root = int(rng.integers(12))
    quality = _QUALITIES[int(rng.integers(len(_QUALITIES)))]
    return tuple(sorted((root + q) % 12 for q in quality))


def chord_progression(rng: np.random.Generator, n_chords: int, rest_prob: float = 0.08):
    """``(pitch classes or None for a rest, duration in sixteenths)`` items, no repeats."""
    items = []
    prev = "start"
    while len(items) < n_chords:
        chord = None if rng.random() < rest_prob else random_chord(rng)
        if chord == prev:
            continue
        items.append((chord, int(rng.choice([2, 4, 4, 8]))))
        prev = chord
    return items


def _in_range(pc: int, low: int, high: int, rng) -> int:
    options = [p for p in range(low, high + 1) if p % 12 == pc]
    return int(options[int(rng.integers(len(options)))])


def piano_voicing(chord, rng) -> dict[str, list[int]]:
    rh = sorted({_in_range(pc, 60, 79, rng) for pc in chord})
    lh = [_in_range(chord[0], 36, 52, rng)]
    return {"Piano RH": rh, "Piano LH": lh}


class OrchestralVoicing:
    """Voice-led distribution of chord tones over the orchestra desks.

    A desk keeps its pitch while it stays a chord tone and otherwise moves
    to the nearest chord tone in its range; desks enter and leave at random.
    """

    def __init__(self, density: float = 0.7, keep: float = 0.85):
        self.density = density
        self.keep = keep
        self.current: dict[str, int] = {}

    def __call__(self, chord, rng) -> dict[str, list[int]]:
        voicing = {}
        for name, _, low, high in ORCHESTRA_DESKS:
            playing = name in self.current
            if rng.random() >= (self.keep if playing else self.density):
                self.current.pop(name, None)
                continue
            prev = self.current.get(name)
            if prev is not None and prev % 12 in chord:
                pitch = prev
            elif prev is not None:
                options = [p for p in range(low, high + 1) if p % 12 in chord]
                pitch = min(options, key=lambda p: (abs(p - prev), p))
            else:
                pitch = _in_range(chord[int(rng.integers(len(chord)))], low, high, rng)
            self.current[name] = pitch
            voicing[name] = [pitch]
        if not voicing:
            name, _, low, high = ORCHESTRA_DESKS[3]
            voicing[name] = [_in_range(chord[0], low, high, rng)]
            self.current[name] = voicing[name][0]
        return voicing


def _render(items, voicer, track_names, rng) -> MidiScore:
    """Lay the progression out in time; each voicing sounds for the chord's duration."""
    notes = {name: [] for name in track_names}
    tick = 0
    for chord, length in items:
        duration = length * SIXTEENTH
        if chord is not None:
            for name, pitches in voicer(chord, rng).items():
                velocity = int(rng.integers(40, 110))
                notes[name].extend(NoteEvent(p, tick, duration, velocity) for p in pitches)
        tick += duration
    return MidiScore(tuple(Track(n, tuple(ev)) for n, ev in notes.items() if ev), TPQ)


def perturb(items, rng, intro: int = 2, drop_prob: float = 0.05, insert_prob: float = 0.05):
    """Orchestral version of a progression: extra intro chords, dropped and inserted chords."""
    out = [(random_chord(rng), 4) for _ in range(intro)]
    for item in items:
        if rng.random() < drop_prob:
            continue
        out.append(item)
        if rng.random() < insert_prob:
            out.append((random_chord(rng), 2))
    return out


def synthetic_pair(rng: np.random.Generator, n_chords: int | None = None):
    """``(piano_score, orchestra_score)`` with raw (unnormalized) track names."""
    n = int(rng.integers(24, 48)) if n_chords is None else n_chords
    items = chord_progression(rng, n)
    piano = _render(items, piano_voicing, [t for t, _ in PIANO_TRACKS], rng)
    orch_items = perturb(items, rng, intro=int(rng.integers(0, 3)))
    orch = _render(orch_items, OrchestralVoicing(), [d[0] for d in ORCHESTRA_DESKS], rng)
    return piano, orch


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_pair(root, folder_id: int, piano: MidiScore, orch: MidiScore,
               piano_composer: str, orch_composer: str, title: str) -> Path:
    root = Path(root)
    folder = root / str(folder_id)
    folder.mkdir(parents=True, exist_ok=True)
    piano_rows = sorted({(t.name, dict(PIANO_TRACKS).get(t.name, "piano")) for t in piano.tracks})
    desk = {d[0]: d[1] for d in ORCHESTRA_DESKS}
    orch_rows = sorted({(t.name, desk[t.name]) for t in orch.tracks})
    save_midi(piano, folder / "piano.mid")
    save_midi(orch, folder / "orchestra.mid")
    _write_csv(folder / "piano_instrum.csv", ["track_name", "instrument"], piano_rows)
    _write_csv(folder / "orchestra_instrum.csv", ["track_name", "instrument"], orch_rows)
    _write_csv(folder / f"{folder_id}.csv", ["role", "path", "composer", "title"], [
        ("piano", f"{folder_id}/piano.mid", piano_composer, title),
        ("orchestra", f"{folder_id}/orchestra.mid", orch_composer, f"{title} (orchestration)"),
    ])
    return folder


def write_synthetic_corpus(root, n_pairs: int = 50, seed: int = 0) -> list[Path]:
    """Write ``n_pairs`` folders numbered from 1 in the corpus layout."""
    rng = np.random.default_rng(seed)
    folders = []
    for k in range(1, n_pairs + 1):
        piano, orch = synthetic_pair(rng)
        composer = PIANO_COMPOSERS[int(rng.integers(len(PIANO_COMPOSERS)))]
        orchestrator = ORCHESTRATORS[int(rng.integers(len(ORCHESTRATORS)))]
        folders.append(write_pair(root, k, piano, orch, composer, orchestrator, f"Piece {k}"))
    return folders
