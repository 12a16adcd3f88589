"""Track-name normalization to a fixed vocabulary of orchestral sections."""
from __future__ import annotations

import csv
import io
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AmbiguousTrackName, InvalidInstrumentMap, UnknownTrackName
from .midi import MidiScore, Track

# Canonical names are section level: every desk of a section maps to one part.
# None of them folds to an entry of DEFAULT_AMBIGUOUS.
VOCABULARY = frozenset({
    "piano", "harpsichord", "organ", "celesta", "harp", "guitar",
    "piccolo", "flute", "oboe", "english_horn", "clarinet", "bass_clarinet",
    "bassoon", "contrabassoon", "saxophone",
    "french_horn", "trumpet", "cornet", "trombone", "bass_trombone", "tuba",
    "timpani", "percussion", "glockenspiel", "xylophone", "vibraphone",
    "violin", "viola", "violoncello", "double_bass",
    "voice_soprano", "voice_alto", "voice_tenor", "voice_baritone", "voice_bass", "choir",
})

DEFAULT_AMBIGUOUS = {
    "bass": ("double_bass", "voice_bass", "bass_clarinet", "bass_trombone"),
    "basses": ("double_bass", "voice_bass"),
    "horn": ("french_horn", "english_horn"),
    "horns": ("french_horn", "english_horn"),
}

AMBIGUOUS_MARK = "ambiguous"

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def fold_name(name: str) -> str:
    """Case-insensitive key with punctuation and whitespace runs collapsed."""
    text = unicodedata.normalize("NFKC", name).casefold()
    return _NON_ALNUM.sub(" ", text).strip()


def canonical_name(name: str) -> str:
    canon = fold_name(name).replace(" ", "_")
    if canon not in VOCABULARY:
        raise InvalidInstrumentMap(f"{name!r} is not a canonical instrument name")
    return canon


_FOLDED_VOCABULARY = {fold_name(v): v for v in VOCABULARY}


@dataclass(frozen=True)
class InstrumentMap:
    """Raw track name -> canonical instrument.

    ``entries`` and ``ambiguous`` are keyed by :func:`fold_name` output.
    An explicit entry overrides the built-in ambiguity list; a name listed
    in ``ambiguous`` with no entry is rejected.
    """

    entries: dict[str, str] = field(default_factory=dict)
    ambiguous: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_AMBIGUOUS))

    @classmethod
    def from_pairs(cls, pairs, ambiguous=None) -> "InstrumentMap":
        """Build from ``(track_name, instrument)`` rows.

        ``instrument`` may be a canonical name, several candidates joined by
        ``|``, or the literal ``ambiguous``; the last two flag the name.
        """
        candidates: dict[str, set[str]] = defaultdict(set)
        flagged: dict[str, tuple[str, ...]] = {}
        for raw, instrument in pairs:
            key = fold_name(raw)
            if not key:
                raise InvalidInstrumentMap("blank track name in instrument map")
            if fold_name(instrument) == AMBIGUOUS_MARK:
                flagged[key] = ()
                continue
            for part in instrument.split("|"):
                candidates[key].add(canonical_name(part))
        entries = {}
        for key, names in candidates.items():
            if len(names) > 1 or key in flagged:
                flagged[key] = tuple(sorted(names))
            else:
                entries[key] = next(iter(names))
        flagged = {**(DEFAULT_AMBIGUOUS if ambiguous is None else ambiguous), **flagged}
        return cls(entries, flagged)

    @classmethod
    def identity(cls) -> "InstrumentMap":
        return cls({})

    def resolve(self, track_name: str) -> str:
        key = fold_name(track_name)
        if key in self.entries:
            return self.entries[key]
        if key in self.ambiguous:
            raise AmbiguousTrackName(track_name, self.ambiguous[key])
        if key in _FOLDED_VOCABULARY:
            return _FOLDED_VOCABULARY[key]
        raise UnknownTrackName(track_name)


def parse_instrument_csv(text: str, ambiguous=None) -> InstrumentMap:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["track_name", "instrument"]:
        raise InvalidInstrumentMap("instrumentation CSV needs a 'track_name,instrument' header")
    rows = []
    for line, row in enumerate(reader, start=2):
        name, instrument = row.get("track_name"), row.get("instrument")
        if name is None or instrument is None or not instrument.strip():
            raise InvalidInstrumentMap(f"line {line}: expected two non-empty columns")
        rows.append((name, instrument))
    return InstrumentMap.from_pairs(rows, ambiguous)


def load_instrument_map(path, ambiguous=None) -> InstrumentMap:
    return parse_instrument_csv(Path(path).read_text(encoding="utf-8-sig"), ambiguous)


def normalize_instruments(score: MidiScore, imap: InstrumentMap) -> MidiScore:
    """Rename tracks to canonical instruments and merge tracks of one section.

    Output tracks are ordered alphabetically by canonical name. Raises on the
    first ambiguous or unmapped track so that the whole score is rejected.
    """
    merged: dict[str, list] = defaultdict(list)
    for track in score.tracks:
        merged[imap.resolve(track.name)].extend(track.events)
    tracks = tuple(Track(name, tuple(merged[name])) for name in sorted(merged))
    return MidiScore(tracks, score.ticks_per_quarter)
