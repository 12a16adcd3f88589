"""On-disk corpus of piano/orchestra score pairs, corpus statistics and export.

Layout::

    <root>/<id>/<id>.csv              role,path,composer,title  (role: piano | orchestra)
    <root>/<id>/<name>.mid            one per role, path relative to <root>
    <root>/<id>/<name>_instrum.csv    track_name,instrument   next to each .mid
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedMetadata, MissingFile, WriteFailure
from .pianoroll import PianoRoll, extract_events, format_label, parse_roll_csv, roll_to_csv

ROLES = ("piano", "orchestra")
METADATA_COLUMNS = ["role", "path", "composer", "title"]


@dataclass(frozen=True)
class PairRecord:
    folder_id: int
    piano_path: str
    orch_path: str
    piano_composer: str
    orch_composer: str
    piano_title: str
    orch_title: str

    @property
    def score_id(self) -> str:
        return str(self.folder_id)

    def path(self, role: str) -> str:
        return self.piano_path if role == "piano" else self.orch_path


def instrumentation_path(midi_path) -> Path:
    midi_path = Path(midi_path)
    return midi_path.with_name(f"{midi_path.stem}_instrum.csv")


def _read_metadata(root: Path, folder: Path, folder_id: int) -> PairRecord:
    meta = folder / f"{folder.name}.csv"
    if not meta.is_file():
        raise MissingFile(folder_id, meta.relative_to(root).as_posix())
    try:
        text = meta.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedMetadata(folder_id, f"metadata is not UTF-8: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != METADATA_COLUMNS:
        raise MalformedMetadata(folder_id, f"metadata header must be {','.join(METADATA_COLUMNS)}")
    rows = {}
    for row in reader:
        role = (row["role"] or "").strip().lower()
        if role not in ROLES:
            raise MalformedMetadata(folder_id, f"unknown role {row['role']!r}")
        if role in rows:
            raise MalformedMetadata(folder_id, f"duplicate {role} row")
        if not (row["path"] or "").strip():
            raise MalformedMetadata(folder_id, f"empty path for {role}")
        rows[role] = {k: (v or "").strip() for k, v in row.items()}
    missing_roles = [r for r in ROLES if r not in rows]
    if missing_roles:
        raise MalformedMetadata(folder_id, f"no {' or '.join(missing_roles)} row")

    for role in ROLES:
        rel = rows[role]["path"]
        target = (root / rel).resolve()
        if not target.is_relative_to(root.resolve()):
            raise MalformedMetadata(folder_id, f"{role} path {rel!r} escapes the corpus root")
        if not target.is_file():
            raise MissingFile(folder_id, rel)
        instrum = instrumentation_path(root / rel)
        if not instrum.is_file():
            raise MissingFile(folder_id, instrum.relative_to(root).as_posix())
    return PairRecord(
        folder_id,
        rows["piano"]["path"], rows["orchestra"]["path"],
        rows["piano"]["composer"], rows["orchestra"]["composer"],
        rows["piano"]["title"], rows["orchestra"]["title"],
    )


def numbered_folders(root) -> list[tuple[int, Path]]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} is not a directory")
    found = [(int(p.name), p) for p in root.iterdir() if p.is_dir() and p.name.isdigit()]
    return sorted(found)


def discover(root, strict: bool = True):
    """One :class:`PairRecord` per numbered folder, sorted by folder id.

    With ``strict=False`` integrity failures are collected instead of
    raised; the return value is then ``(records, errors)``.
    """
    root = Path(root)
    records, errors = [], []
    for folder_id, folder in numbered_folders(root):
        try:
            records.append(_read_metadata(root, folder, folder_id))
        except (MissingFile, MalformedMetadata) as exc:
            if strict:
                raise
            errors.append(exc)
    return records if strict else (records, errors)


# --------------------------------------------------------------------------
# statistics

def activation_ratio(rolls) -> np.ndarray:
    """Per row: frames with the row on / all frames in the collection.

    Pass event-level rolls to count note occurrences rather than durations.
    """
    rolls = list(rolls)
    if not rolls:
        return np.zeros(0)
    labels = rolls[0].row_labels
    if any(r.row_labels != labels for r in rolls):
        raise ValueError("all rolls must share row labels")
    on = np.zeros(len(labels), dtype=np.int64)
    total = 0
    for r in rolls:
        on += (r.values > 0).sum(axis=1)
        total += r.n_frames
    return on / total if total else np.zeros(len(labels))


@dataclass(frozen=True)
class ComposerShare:
    composer: str
    piano_files: int
    piano_percent: float
    orch_files: int
    orch_percent: float


@dataclass(frozen=True)
class CorpusStats:
    activation: np.ndarray
    row_labels: tuple
    composers: tuple[ComposerShare, ...]

    def activation_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "activation_ratio"])
        for label, ratio in zip(self.row_labels, self.activation):
            writer.writerow([format_label(label), repr(float(ratio))])
        return buf.getvalue()

    def composer_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["composer", "piano_files", "piano_frames_percent", "orchestra_files", "orchestra_frames_percent"])
        for c in self.composers:
            writer.writerow([c.composer, c.piano_files, f"{c.piano_percent:.4f}", c.orch_files, f"{c.orch_percent:.4f}"])
        return buf.getvalue()


def _frame_count(roll: PianoRoll, event_level: bool) -> int:
    if event_level:
        return len(extract_events(roll))
    return roll.n_frames


def composer_shares(records, rolls, event_level: bool = True) -> tuple[ComposerShare, ...]:
    """File counts and frame shares per composer, piano and orchestra side separately.

    ``rolls`` holds one ``(piano_roll, orchestra_roll)`` per record. Frames
    are counted on the event-level representation unless ``event_level``
    is False.
    """
    files = {role: defaultdict(int) for role in ROLES}
    frames = {role: defaultdict(int) for role in ROLES}
    for rec, (piano, orch) in zip(records, rolls, strict=True):
        for role, composer, roll in (("piano", rec.piano_composer, piano), ("orchestra", rec.orch_composer, orch)):
            files[role][composer] += 1
            frames[role][composer] += _frame_count(roll, event_level)
    totals = {role: sum(frames[role].values()) for role in ROLES}

    def pct(role, name):
        return 100.0 * frames[role][name] / totals[role] if totals[role] else 0.0

    names = sorted(set(files["piano"]) | set(files["orchestra"]))
    return tuple(
        ComposerShare(n, files["piano"][n], pct("piano", n), files["orchestra"][n], pct("orchestra", n))
        for n in names
    )


def corpus_stats(records, rolls, event_level: bool = True) -> CorpusStats:
    """Activation ratios over the orchestra rolls plus composer shares."""
    rolls = list(rolls)
    orch = [o for _, o in rolls]
    counted = [o.frames(extract_events(o).event_indices) for o in orch] if event_level else orch
    labels = orch[0].row_labels if orch else ()
    return CorpusStats(activation_ratio(counted), labels, composer_shares(records, rolls, event_level))


# --------------------------------------------------------------------------
# concatenated export

@dataclass(frozen=True)
class ManifestRow:
    score_id: str
    start_frame: int
    end_frame: int


def export_concatenated(rolls, out_dir, name: str = "matrix") -> list[ManifestRow]:
    """Write ``(score_id, roll)`` items as one matrix CSV plus a frame-range manifest.

    Files: ``<name>.csv`` in the piano-roll CSV format and
    ``<name>_manifest.csv`` with ``score_id,start_frame,end_frame``.
    """
    items = list(rolls)
    labels = items[0][1].row_labels if items else ()
    if any(r.row_labels != labels for _, r in items):
        raise ValueError("all rolls must share row labels")
    manifest, start = [], 0
    for score_id, roll in items:
        manifest.append(ManifestRow(str(score_id), start, start + roll.n_frames))
        start += roll.n_frames
    if items:
        values = np.concatenate([r.values for _, r in items], axis=1)
        matrix = items[0][1].replace(values=values)
    else:
        matrix = PianoRoll(np.zeros((0, 0)), ())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["score_id", "start_frame", "end_frame"])
    writer.writerows((m.score_id, m.start_frame, m.end_frame) for m in manifest)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{name}.csv").write_text(roll_to_csv(matrix), encoding="utf-8")
        (out_dir / f"{name}_manifest.csv").write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise WriteFailure(f"cannot write export to {out_dir}: {exc}") from exc
    return manifest


def load_concatenated(out_dir, name: str = "matrix", frames_per_quarter: int = 8, binary: bool = False):
    """Read back an export as ``(matrix_roll, manifest_rows)``."""
    out_dir = Path(out_dir)
    matrix = parse_roll_csv((out_dir / f"{name}.csv").read_text(encoding="utf-8"), frames_per_quarter, binary)
    with open(out_dir / f"{name}_manifest.csv", newline="", encoding="utf-8") as f:
        manifest = [ManifestRow(r["score_id"], int(r["start_frame"]), int(r["end_frame"]))
                    for r in csv.DictReader(f)]
    return matrix, manifest


def slice_by_manifest(matrix: PianoRoll, manifest) -> dict[str, PianoRoll]:
    return {m.score_id: matrix.frames(range(m.start_frame, m.end_frame)) for m in manifest}
