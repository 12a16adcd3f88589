"""Standard MIDI File reading and writing, reduced to note events.

Only what a piano roll needs survives parsing: note on/off pairs per track,
the track name and the tick resolution. Tempo, controllers, pitch bend and
sysex data are skipped.
"""
from __future__ import annotations

import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DanglingNoteOn, MalformedFile, UnsupportedFormat

MAX_TICK = 2**31 - 1

# data byte counts for channel voice messages, keyed by status high nibble
_CHANNEL_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


@dataclass(frozen=True)
class NoteEvent:
    pitch: int
    onset: int
    duration: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch out of range: {self.pitch}")
        if self.onset < 0:
            raise ValueError(f"negative onset: {self.onset}")
        if self.duration < 1:
            raise ValueError(f"duration must be positive: {self.duration}")
        if self.onset + self.duration > MAX_TICK:
            raise ValueError("note end overflows the tick domain")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity out of range: {self.velocity}")

    @property
    def end(self) -> int:
        return self.onset + self.duration


def sort_events(events) -> tuple[NoteEvent, ...]:
    """Order by onset, then pitch; remaining fields only break exact ties."""
    return tuple(sorted(events, key=lambda e: (e.onset, e.pitch, e.duration, e.velocity)))


@dataclass(frozen=True)
class Track:
    name: str
    events: tuple[NoteEvent, ...] = ()

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("track name must not be blank")
        object.__setattr__(self, "name", self.name.strip())
        object.__setattr__(self, "events", sort_events(self.events))


@dataclass(frozen=True)
class MidiScore:
    tracks: tuple[Track, ...] = field(default_factory=tuple)
    ticks_per_quarter: int = 480

    def __post_init__(self):
        if self.ticks_per_quarter < 1:
            raise ValueError("ticks_per_quarter must be positive")
        object.__setattr__(self, "tracks", tuple(self.tracks))

    @property
    def note_count(self) -> int:
        return sum(len(t.events) for t in self.tracks)

    @property
    def end_tick(self) -> int:
        return max((e.end for t in self.tracks for e in t.events), default=0)

    def track_names(self) -> list[str]:
        return [t.name for t in self.tracks]


# --------------------------------------------------------------------------
# reading

def _read_varlen(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise MalformedFile("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MalformedFile("variable-length quantity longer than 4 bytes")


def _iter_chunks(data: bytes):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MalformedFile(f"truncated chunk header at byte {pos}")
        kind = data[pos:pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        start = pos + 8
        if start + length > len(data):
            raise MalformedFile(f"chunk {kind!r} at byte {pos} runs past end of file")
        yield kind, start, start + length
        pos = start + length


class _TrackParse:
    """Accumulates note on/off messages of one MTrk chunk."""

    def __init__(self, index: int):
        self.index = index
        self.name: str | None = None
        # (channel, pitch) -> tick -> [note-on velocities], [off count]
        self.ons = defaultdict(lambda: defaultdict(list))
        self.offs = defaultdict(lambda: defaultdict(int))

    def note_on(self, tick, channel, pitch, velocity):
        if velocity == 0:
            self.offs[channel, pitch][tick] += 1
        else:
            self.ons[channel, pitch][tick].append(velocity)

    def note_off(self, tick, channel, pitch):
        self.offs[channel, pitch][tick] += 1

    @property
    def label(self) -> str:
        return self.name if self.name else f"Track {self.index}"

    def pair_notes(self) -> list[NoteEvent]:
        notes = []
        for key in set(self.ons) | set(self.offs):
            channel, pitch = key
            ons, offs = self.ons.get(key, {}), self.offs.get(key, {})
            sounding: deque[tuple[int, int]] = deque()
            for tick in sorted(set(ons) | set(offs)):
                n_off = offs.get(tick, 0)
                # offs before ons at a shared tick
                while n_off and sounding:
                    onset, velocity = sounding.popleft()
                    n_off -= 1
                    if tick > onset:
                        notes.append(NoteEvent(pitch, onset, tick - onset, velocity))
                new = ons.get(tick, [])
                # leftover offs cancel same-tick ons: zero-length notes are dropped
                new = new[n_off:]
                sounding.extend((tick, v) for v in new)
            if sounding:
                raise DanglingNoteOn(self.label, sounding[0][0], pitch)
        return notes


def _parse_track(data: bytes, start: int, end: int, index: int) -> _TrackParse:
    track = _TrackParse(index)
    pos = start
    tick = 0
    status = None
    while pos < end:
        delta, pos = _read_varlen(data, pos, end)
        tick += delta
        if tick > MAX_TICK:
            raise MalformedFile(f"track {index}: tick overflow")
        if pos >= end:
            raise MalformedFile(f"track {index}: event truncated at tick {tick}")
        byte = data[pos]
        if byte == 0xFF:
            if pos + 2 > end:
                raise MalformedFile(f"track {index}: truncated meta event")
            meta_type = data[pos + 1]
            length, pos = _read_varlen(data, pos + 2, end)
            if pos + length > end:
                raise MalformedFile(f"track {index}: meta event runs past chunk")
            payload = data[pos:pos + length]
            pos += length
            if meta_type == 0x03 and track.name is None:
                name = payload.decode("utf-8", errors="replace").strip()
                track.name = name or None
            elif meta_type == 0x2F:
                break
            status = None
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos + 1, end)
            if pos + length > end:
                raise MalformedFile(f"track {index}: sysex runs past chunk")
            pos += length
            status = None
            continue
        if byte & 0x80:
            if byte >= 0xF0:
                raise MalformedFile(f"track {index}: unexpected system message 0x{byte:02X}")
            status = byte
            pos += 1
        elif status is None:
            raise MalformedFile(f"track {index}: running status with no prior status byte")
        kind, channel = status >> 4, status & 0x0F
        n = _CHANNEL_DATA_LEN[kind]
        if pos + n > end:
            raise MalformedFile(f"track {index}: channel message truncated")
        args = data[pos:pos + n]
        pos += n
        if any(b & 0x80 for b in args):
            raise MalformedFile(f"track {index}: data byte with high bit set")
        if kind == 0x9:
            track.note_on(tick, channel, args[0], args[1])
        elif kind == 0x8:
            track.note_off(tick, channel, args[0])
    return track


def parse_midi(data: bytes) -> MidiScore:
    """Parse SMF bytes (format 0 or 1) into a :class:`MidiScore`.

    Tracks without any note are dropped. A track with no name meta event
    is called ``"Track <i>"`` after its chunk index.
    """
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise MalformedFile("missing MThd header")
    (header_len,) = struct.unpack(">I", data[4:8])
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedFile(f"bad header length {header_len}")
    fmt, n_tracks, division = struct.unpack(">HHh", data[8:14])
    if fmt == 2:
        raise UnsupportedFormat("SMF format 2 (independent sequences) is not supported")
    if fmt not in (0, 1):
        raise MalformedFile(f"unknown SMF format {fmt}")
    if division <= 0:
        raise UnsupportedFormat("SMPTE time division is not supported")

    tracks = []
    index = 0
    for kind, start, end in _iter_chunks(data[8 + header_len:]):
        if kind != b"MTrk":
            continue
        offset = 8 + header_len
        parsed = _parse_track(data, start + offset, end + offset, index)
        index += 1
        notes = parsed.pair_notes()
        if notes:
            tracks.append(Track(parsed.label, notes))
    if index != n_tracks:
        raise MalformedFile(f"header announces {n_tracks} tracks, found {index}")
    return MidiScore(tuple(tracks), division)


def read_midi(path) -> MidiScore:
    return parse_midi(Path(path).read_bytes())


# --------------------------------------------------------------------------
# writing

def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(name: str | None, events, channel: int = 0) -> bytes:
    body = bytearray()
    if name is not None:
        raw = name.encode("utf-8")
        body += b"\x00\xff\x03" + _varlen(len(raw)) + raw
    messages = []
    for e in events:
        # sort key puts offs (0) before ons (1) at equal ticks
        messages.append((e.onset, 1, e.pitch, 0x90 | channel, e.velocity))
        messages.append((e.end, 0, e.pitch, 0x80 | channel, 0))
    messages.sort()
    now = 0
    for tick, _, pitch, status, velocity in messages:
        body += _varlen(tick - now) + bytes((status, pitch, velocity))
        now = tick
    body += b"\x00\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(score: MidiScore) -> bytes:
    """Serialize to SMF format 1, one MTrk per track, everything on channel 0.

    Same-pitch notes that overlap inside one track cannot survive a
    write/parse round trip; abutting ones can.
    """
    chunks = [_track_chunk(t.name, t.events) for t in score.tracks]
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), score.ticks_per_quarter)
    return header + b"".join(chunks)


def save_midi(score: MidiScore, path) -> None:
    Path(path).write_bytes(write_midi(score))
