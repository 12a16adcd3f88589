import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from podkit.errors import DimensionMismatch, EmptyTestSet, OrderTooLarge
from podkit.pianoroll import BinaryRoll, extract_events
from podkit.task import (
    AlignedPair, OraclePredictor, PredictionContext, RandomPredictor, RepeatPredictor, SplitSpec,
    accuracy_frame, evaluate, evaluate_pairs, extract_training_points, generate, random_predictor,
    repeat_predictor, split_ids,
)

from conftest import random_binary
from oracles import set_accuracy


def vec(on, dim=128):
    v = np.zeros(dim, dtype=np.uint8)
    v[list(on)] = 1
    return v


def roll(columns, instrument="violin"):
    values = np.array(columns, dtype=np.uint8).T.reshape(len(columns[0]) if columns else 0, len(columns))
    return BinaryRoll(values, [(instrument, p) for p in range(values.shape[0])])


def pair(score_id, piano_cols, orch_cols, match_starts=None):
    return AlignedPair(score_id, roll(piano_cols, "piano"), roll(orch_cols), match_starts)


def ctx(past, piano=None, order=1, score_id="s", position=0):
    past = tuple(past) if isinstance(past, (list, tuple)) else (past,)
    piano = np.zeros(4, dtype=np.uint8) if piano is None else piano
    return PredictionContext(piano, past, order, score_id, position)


class TestAccuracy:
    def test_perfect(self):
        assert accuracy_frame(vec([60, 64]), vec([60, 64])) == 100.0

    def test_partial(self):
        assert accuracy_frame(vec([60, 64]), vec([60, 67])) == pytest.approx(100 / 3, abs=1e-12)

    def test_silent_prediction(self):
        assert accuracy_frame(vec([1, 2, 3]), vec([])) == 0.0

    def test_both_silent(self):
        assert accuracy_frame(vec([]), vec([])) == 100.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            accuracy_frame(vec([1], 10), vec([1], 11))

    @settings(max_examples=200)
    @given(st.sets(st.integers(0, 29)), st.sets(st.integers(0, 29)))
    def test_matches_set_oracle(self, truth, predicted):
        acc = accuracy_frame(vec(truth, 30), vec(predicted, 30))
        assert abs(acc - set_accuracy(truth, predicted)) <= 1e-9
        assert 0.0 <= acc <= 100.0
        assert acc == accuracy_frame(vec(predicted, 30), vec(truth, 30))
        assert accuracy_frame(vec(truth, 30), vec(truth, 30)) == 100.0

    def test_one_of_five_notes_changes(self):
        # repeat predictor: previous event holds C E G B D, the present swaps D for F
        prev, now = vec([60, 64, 67, 71, 74]), vec([60, 64, 67, 71, 77])
        assert accuracy_frame(now, repeat_predictor(ctx(prev))) == pytest.approx(66.67, abs=0.01)


class TestPredictors:
    def test_repeat_returns_last(self):
        a, b = vec([1, 2], 8), vec([3], 8)
        assert repeat_predictor(ctx([a, b], order=2)).tolist() == a.tolist()

    def test_repeat_on_constant_truth(self):
        col = (1, 0, 1, 0)
        report = evaluate_pairs(RepeatPredictor(), [pair("a", [col] * 6, [col] * 6)], 1, "frame")
        assert [e.accuracy for e in report.per_event] == [100.0] * 5

    def test_context_shape_checked(self):
        with pytest.raises(ValueError):
            ctx([vec([1], 4)], order=2)

    def test_random_reproducible(self):
        c = ctx(vec([], 100), score_id="12", position=7)
        assert random_predictor(c, 3).tolist() == random_predictor(c, 3).tolist()
        assert RandomPredictor(3).predict(c).tolist() == random_predictor(c, 3).tolist()
        assert random_predictor(c, 3).tolist() != random_predictor(c, 4).tolist()

    def test_random_mean_ones(self):
        counts = [random_predictor(ctx(vec([], 100), position=k), 0).sum() for k in range(10_000)]
        assert 49 <= np.mean(counts) <= 51

    def test_random_matches_simulated_expectation(self):
        rho, dim, n = 0.05, 100, 100_000
        rng = np.random.default_rng(123)
        truth = random_binary(rng, (dim, n + 1), rho)
        report = evaluate_pairs(RandomPredictor(9), [pair("long", np.zeros((n + 1, 1)).tolist(), truth.T.tolist())],
                                1, "frame")
        # simulation oracle with an unrelated generator
        sim = np.random.default_rng(7)
        T = sim.random((n, dim)) < rho
        P = sim.random((n, dim)) < 0.5
        inter = (T & P).sum(axis=1)
        union = (T | P).sum(axis=1)
        expected = np.mean(np.where(union == 0, 100.0, 100.0 * inter / np.maximum(union, 1)))
        assert report.K == n
        assert abs(report.mean_accuracy - expected) < 1.0
        assert expected < 10


class TestEvaluate:
    def test_event_count_and_mean(self):
        a = pair("a", [(1, 0)] * 4, [(1, 0, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)])
        b = pair("b", [(1, 0)] * 6, [(1, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 0), (0, 0, 0), (1, 1, 0)])
        report = evaluate_pairs(RepeatPredictor(), [a, b], 1, "event")
        assert report.K == 8
        expected = []
        for p in (a, b):
            O = p.orch.values
            for t in range(1, O.shape[1]):
                expected.append(set_accuracy(set(np.flatnonzero(O[:, t])), set(np.flatnonzero(O[:, t - 1]))))
        assert report.mean_accuracy == pytest.approx(sum(expected) / 8, abs=1e-12)
        assert [e.t_e for e in report.per_event[:3]] == [1, 2, 3]

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**16), st.integers(1, 3), st.sampled_from(["frame", "event"]))
    def test_oracle_is_perfect(self, seed, order, level):
        rng = np.random.default_rng(seed)
        pairs = []
        for k in range(5):
            T = int(rng.integers(order + 10, 40))
            held = np.sort(rng.integers(0, T, T))
            orch = random_binary(rng, (6, T), 0.3)[:, held]
            pairs.append(AlignedPair(f"{k}", BinaryRoll(random_binary(rng, (3, T)), [("piano", p) for p in range(3)]),
                                     BinaryRoll(orch, [("violin", p) for p in range(6)])))
        pairs = [p for p in pairs if len(extract_events(p.orch)) > order]
        if not pairs:
            return
        report = evaluate_pairs(OraclePredictor(pairs, level), pairs, order, level)
        assert report.mean_accuracy == 100.0
        split = SplitSpec(seed=seed, test_fraction=0.4)
        assert evaluate(OraclePredictor(pairs, level), pairs, split, order, level).mean_accuracy == 100.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**16), st.integers(1, 3))
    def test_event_level_equals_frame_level_on_deduplicated(self, seed, order):
        rng = np.random.default_rng(seed)
        T = 30
        orch = random_binary(rng, (5, T), 0.3)[:, np.sort(rng.integers(0, T, T))]
        p = AlignedPair("x", BinaryRoll(random_binary(rng, (3, T)), [("piano", k) for k in range(3)]),
                        BinaryRoll(orch, [("violin", k) for k in range(5)]))
        idx = extract_events(p.orch).event_indices
        if len(idx) <= order:
            return
        dedup = AlignedPair("x", p.piano.frames(idx), p.orch.frames(idx))
        for predictor in (RepeatPredictor(), RandomPredictor(1)):
            ev = evaluate_pairs(predictor, [p], order, "event")
            fr = evaluate_pairs(predictor, [dedup], order, "frame")
            assert [(e.tp, e.fp, e.fn, e.accuracy) for e in ev.per_event] == \
                   [(e.tp, e.fp, e.fn, e.accuracy) for e in fr.per_event]
            assert [e.t_e for e in ev.per_event] == idx[order:].tolist()

    def test_order_too_large(self):
        p = pair("a", [(1,)] * 5, [(1, 0)] * 5)
        with pytest.raises(OrderTooLarge):
            evaluate_pairs(RepeatPredictor(), [p], 2, "event")

    def test_empty_test_set(self):
        with pytest.raises(EmptyTestSet):
            evaluate_pairs(RepeatPredictor(), [], 1, "event")

    def test_bad_level(self):
        with pytest.raises(ValueError):
            evaluate_pairs(RepeatPredictor(), [pair("a", [(1,)] * 3, [(1,)] * 3)], 1, "bar")

    def test_report_csv(self):
        a = pair("a", [(1, 0)] * 3, [(1, 0), (0, 1), (0, 1)])
        text = evaluate_pairs(RepeatPredictor(), [a], 1, "frame").to_csv()
        lines = text.splitlines()
        assert lines[0] == "score_id,t_e,TP,FP,FN,accuracy"
        assert lines[1:] == ["a,1,0,1,1,0.0", "a,2,1,0,0,100.0", "# mean_accuracy=50.0 K=2"]


class TestSplit:
    @settings(max_examples=50)
    @given(st.sets(st.text("abc123", min_size=1, max_size=4), min_size=1, max_size=30),
           st.integers(0, 1000), st.floats(0.05, 0.95))
    def test_disjoint_cover(self, ids, seed, fraction):
        train, test = split_ids(ids, SplitSpec(seed, fraction))
        assert not set(train) & set(test)
        assert set(train) | set(test) == ids
        assert test
        assert (train, test) == split_ids(sorted(ids, reverse=True), SplitSpec(seed, fraction))

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
    def test_fraction_range(self, fraction):
        with pytest.raises(ValueError):
            SplitSpec(0, fraction)


class TestTrainingPoints:
    def test_silent_piano_targets_skipped(self):
        piano = [(1,)] * 10
        piano[0] = piano[5] = (0,)
        orch = [(k % 2, 1 - k % 2) for k in range(10)]
        p = pair("a", piano, orch, np.arange(10))
        points = extract_training_points(p, order=2)
        # t in 2..9 except the silent t = 5
        assert len(points) == 8 - 1
        assert [c.position for c, _ in points] == [2, 3, 4, 6, 7, 8, 9]

    def test_all_silent_piano(self):
        p = pair("a", [(0,)] * 6, [(1, 0)] * 6, np.arange(6))
        assert extract_training_points(p, 1) == []

    def test_silence_stays_in_past(self):
        orch = [(1, 0), (0, 0), (0, 1)]
        p = pair("a", [(1,), (0,), (1,)], orch, np.arange(3))
        (c, target), = [pt for pt in extract_training_points(p, 2) if pt[0].position == 2]
        assert c.orch_past[0].tolist() == [0, 0]
        assert c.orch_past[1].tolist() == [1, 0]
        assert target.tolist() == [0, 1]

    def test_uses_match_starts(self):
        # events held for 3 frames each; only the starts are points
        piano = [(1,)] * 3 + [(1,)] * 3
        orch = [(1, 0)] * 3 + [(0, 1)] * 3
        p = pair("a", piano, orch, np.array([0, 3]))
        points = extract_training_points(p, 1)
        assert len(points) == 1 and points[0][1].tolist() == [0, 1]


class Fixed:
    def __init__(self, v):
        self.v = np.asarray(v, dtype=np.uint8)
        self.calls = 0

    def predict(self, ctx):
        self.calls += 1
        return self.v


ORCH = [("violin", p) for p in range(4)]


class TestGenerate:
    def test_silent_in_silent_out(self):
        piano = roll([(0, 0, 0)] * 8, "piano")
        pred = Fixed([1, 1, 1, 1])
        out = generate(pred, piano, ORCH)
        assert out.values.sum() == 0 and out.n_frames == 8 and pred.calls == 0

    def test_repeat_from_zero_history_is_silent(self):
        rng = np.random.default_rng(0)
        piano = BinaryRoll(random_binary(rng, (5, 30), 0.5), [("piano", p) for p in range(5)])
        for order in (1, 3):
            assert generate(RepeatPredictor(), piano, ORCH, order).values.sum() == 0

    def test_boundaries_follow_piano(self):
        cols = [(1, 0), (1, 0), (0, 1), (0, 0), (0, 0), (1, 1)]
        piano = roll(cols, "piano")
        out = generate(RandomPredictor(2), piano, ORCH)
        assert out.n_frames == 6 and out.row_labels == tuple(ORCH)
        starts = extract_events(piano).event_indices
        durations = extract_events(piano).durations()
        for s, d in zip(starts, durations):
            assert (out.values[:, s:s + d] == out.values[:, [s]]).all()
        assert out.values[:, 3:5].sum() == 0
        assert set(extract_events(out).event_indices) <= set(starts)

    def test_feedback_uses_own_predictions(self):
        class Shift:
            def predict(self, ctx):
                prev = ctx.orch_past[0]
                return np.roll(prev, 1) if prev.any() else np.eye(4, dtype=np.uint8)[0]
        piano = roll([(1, 0), (0, 1), (0, 0), (1, 0)], "piano")
        out = generate(Shift(), piano, ORCH)
        assert out.values.T.tolist() == [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0]]
