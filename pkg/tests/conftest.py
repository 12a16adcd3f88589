import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from podkit.midi import MidiScore, NoteEvent, Track  # noqa: E402
from podkit.synth import write_pair, write_synthetic_corpus  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def note(pitch, onset, duration, velocity=80):
    return NoteEvent(pitch=pitch, onset=onset, duration=duration, velocity=velocity)


def score(tracks: dict, tpq=480) -> MidiScore:
    return MidiScore(tuple(Track(name, tuple(events)) for name, events in tracks.items()), tpq)


def chord_score(chords, name="piano", step=480, tpq=480) -> MidiScore:
    """One chord per quarter note; ``None`` is a rest."""
    events = []
    for k, chord in enumerate(chords):
        for p in chord or ():
            events.append(note(p, k * step, step))
    return score({name: events}, tpq)


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic") / "corpus"
    write_synthetic_corpus(root, n_pairs=50, seed=0)
    return root


@pytest.fixture
def small_corpus(tmp_path):
    root = tmp_path / "corpus"
    write_synthetic_corpus(root, n_pairs=2, seed=3)
    return root


@pytest.fixture
def identical_corpus(tmp_path):
    """Pairs whose orchestra part is the piano part under an orchestral track name."""
    root = tmp_path / "corpus"
    chords = [(60, 64, 67), (62, 65, 69), (55, 59, 62, 65), (60, 64, 67), None, (57, 60, 64)]
    for k in (1, 2):
        piano = chord_score(chords, "Piano RH")
        orch = chord_score(chords, "Violins I")
        write_pair(root, k, piano, orch, "Composer", "Composer", f"Same {k}")
    return root


def random_binary(rng, shape, density=0.3):
    return (rng.random(shape) < density).astype(np.uint8)
