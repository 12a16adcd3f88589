import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from podkit.corpus import (
    MalformedMetadata, activation_ratio, composer_shares, corpus_stats, discover, export_concatenated,
    load_concatenated, slice_by_manifest,
)
from podkit.errors import MissingFile, WriteFailure
from podkit.pianoroll import BinaryRoll, PianoRoll

from conftest import chord_score, random_binary


def labels(n):
    return [("violin", p) for p in range(n)]


def broll(values):
    values = np.asarray(values, dtype=np.uint8)
    return BinaryRoll(values, labels(values.shape[0]))


class TestDiscover:
    def test_two_pairs(self, small_corpus):
        records = discover(small_corpus)
        assert [r.folder_id for r in records] == [1, 2]
        assert records[0].piano_path == "1/piano.mid"
        assert records[1].orch_title.endswith("(orchestration)")

    def test_sorted_numerically(self, tmp_path):
        from podkit.synth import write_pair
        for k in (10, 2, 1):
            write_pair(tmp_path, k, chord_score([(60,)], "Piano RH"), chord_score([(60,)], "Viola"), "A", "B", "t")
        (tmp_path / "notes").mkdir()
        assert [r.folder_id for r in discover(tmp_path)] == [1, 2, 10]

    def test_missing_instrumentation(self, small_corpus):
        (small_corpus / "2" / "orchestra_instrum.csv").unlink()
        with pytest.raises(MissingFile) as info:
            discover(small_corpus)
        assert info.value.folder_id == 2
        assert "orchestra_instrum.csv" in str(info.value)

    def test_missing_midi(self, small_corpus):
        (small_corpus / "1" / "piano.mid").unlink()
        with pytest.raises(MissingFile) as info:
            discover(small_corpus)
        assert info.value.folder_id == 1

    def test_empty_root(self, tmp_path):
        assert discover(tmp_path) == []

    def test_missing_root(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            discover(tmp_path / "nope")

    @pytest.mark.parametrize("text", [
        "role,path,title\npiano,1/piano.mid,x\n",
        "role,path,composer,title\npiano,1/piano.mid,a,b\n",
        "role,path,composer,title\npiano,1/piano.mid,a,b\nviolin,1/orchestra.mid,a,b\n",
        "role,path,composer,title\npiano,1/piano.mid,a,b\npiano,1/piano.mid,a,b\n",
        "role,path,composer,title\npiano,../../etc/passwd,a,b\norchestra,1/orchestra.mid,a,b\n",
    ])
    def test_malformed_metadata(self, small_corpus, text):
        (small_corpus / "1" / "1.csv").write_text(text)
        with pytest.raises(MalformedMetadata):
            discover(small_corpus)

    def test_lenient_mode_collects(self, small_corpus):
        (small_corpus / "1" / "1.csv").unlink()
        records, errors = discover(small_corpus, strict=False)
        assert [r.folder_id for r in records] == [2]
        assert [e.folder_id for e in errors] == [1]


class TestActivation:
    def test_always_and_never(self):
        r = broll([[1, 1, 1], [0, 0, 0]])
        assert activation_ratio([r, r]).tolist() == [1.0, 0.0]

    def test_three_of_fifty(self):
        v = np.zeros((2, 50), dtype=np.uint8)
        v[0, [3, 17, 40]] = 1
        assert activation_ratio([broll(v)])[0] == pytest.approx(0.06, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**16))
    def test_weighted_mean_of_per_score_ratios(self, seed):
        rng = np.random.default_rng(seed)
        rolls = [broll(random_binary(rng, (4, int(rng.integers(1, 30))), 0.2)) for _ in range(4)]
        per_score = np.stack([activation_ratio([r]) for r in rolls])
        weights = np.array([r.n_frames for r in rolls], dtype=float)
        expected = (per_score * weights[:, None]).sum(axis=0) / weights.sum()
        assert np.allclose(activation_ratio(rolls), expected, atol=1e-12)
        assert ((0 <= activation_ratio(rolls)) & (activation_ratio(rolls) <= 1)).all()

    def test_uniform_random(self):
        rng = np.random.default_rng(1)
        rolls = [broll(random_binary(rng, (20, 500), 0.5)) for _ in range(10)]
        assert np.abs(activation_ratio(rolls) - 0.5).max() < 0.05

    def test_mismatched_rows(self):
        with pytest.raises(ValueError):
            activation_ratio([broll(np.zeros((2, 3))), broll(np.zeros((3, 3)))])


class Rec:
    def __init__(self, piano_composer, orch_composer):
        self.piano_composer, self.orch_composer = piano_composer, orch_composer


def changing(n):
    """Roll with ``n`` frames, every frame a new event."""
    return broll(np.arange(n) % 2 == np.arange(2)[:, None])


class TestComposerShares:
    def test_thirty_seventy(self):
        shares = composer_shares([Rec("A", "A"), Rec("B", "B")], [(changing(300),) * 2, (changing(700),) * 2])
        assert [(s.composer, s.piano_percent, s.orch_percent) for s in shares] == [("A", 30.0, 30.0), ("B", 70.0, 70.0)]

    def test_single_composer(self):
        shares = composer_shares([Rec("A", "Z")] * 3, [(changing(5), changing(7))] * 3)
        assert [(s.composer, s.piano_files, s.piano_percent, s.orch_files, s.orch_percent) for s in shares] == \
               [("A", 3, 100.0, 0, 0.0), ("Z", 0, 0.0, 3, 100.0)]

    def test_frames_not_files(self):
        recs = [Rec("Many", "Many")] * 4 + [Rec("One", "One")]
        rolls = [(changing(10),) * 2] * 4 + [(changing(160),) * 2]
        shares = {s.composer: s for s in composer_shares(recs, rolls)}
        assert shares["Many"].piano_files == 4 and shares["One"].piano_files == 1
        assert shares["One"].piano_percent == pytest.approx(80.0)
        assert sum(s.piano_percent for s in shares.values()) == pytest.approx(100.0, abs=0.1)

    def test_event_level_versus_raw_frames(self):
        held = broll(np.ones((2, 90)))
        recs = [Rec("A", "A"), Rec("B", "B")]
        rolls = [(held, held), (changing(10), changing(10))]
        ev = {s.composer: s.piano_percent for s in composer_shares(recs, rolls)}
        raw = {s.composer: s.piano_percent for s in composer_shares(recs, rolls, event_level=False)}
        assert ev["A"] == pytest.approx(100 / 11)
        assert raw["A"] == pytest.approx(90.0)

    def test_stats_csv(self):
        r = broll([[1, 1, 0, 0], [0, 0, 0, 0]])
        stats = corpus_stats([Rec("A", "B")], [(r, r)])
        # event level: two events, row 0 on in one of them
        assert stats.activation.tolist() == [0.5, 0.0]
        assert stats.activation_csv().splitlines() == ["row,activation_ratio", "violin:0,0.5", "violin:1,0.0"]
        assert stats.composer_csv().splitlines()[1:] == ["A,1,100.0000,0,0.0000", "B,0,0.0000,1,100.0000"]


class TestExport:
    def test_two_rolls(self, tmp_path):
        rng = np.random.default_rng(0)
        a = PianoRoll(rng.integers(0, 128, (3, 10)), labels(3))
        b = PianoRoll(rng.integers(0, 128, (3, 15)), labels(3))
        manifest = export_concatenated([("a", a), ("b", b)], tmp_path)
        assert [(m.score_id, m.start_frame, m.end_frame) for m in manifest] == [("a", 0, 10), ("b", 10, 25)]
        matrix, loaded = load_concatenated(tmp_path)
        assert matrix.n_frames == 25 and loaded == manifest
        assert (tmp_path / "matrix_manifest.csv").read_text().splitlines() == \
               ["score_id,start_frame,end_frame", "a,0,10", "b,10,25"]

    def test_empty(self, tmp_path):
        assert export_concatenated([], tmp_path) == []
        matrix, manifest = load_concatenated(tmp_path)
        assert matrix.values.shape == (0, 0) and manifest == []

    def test_write_failure(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(WriteFailure):
            export_concatenated([("a", broll(np.zeros((1, 2))))], blocker / "sub")

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_round_trip(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        rolls = [(str(k), broll(random_binary(rng, (5, int(rng.integers(0, 12))))))
                 for k in range(int(rng.integers(1, 6)))]
        out = tmp_path_factory.mktemp("export")
        export_concatenated(rolls, out)
        matrix, manifest = load_concatenated(out, binary=True)
        assert slice_by_manifest(matrix, manifest) == dict(rolls)
