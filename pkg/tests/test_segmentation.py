import pytest
from hypothesis import given, settings, strategies as st

from flapnet.data import Label
from flapnet.errors import ParseError, ValidationError
from flapnet.segmentation import (
    Annotation,
    Behavior,
    chunk_span,
    cut_clip,
    load_annotations,
    merge_intervals,
    plan_spans,
)
from flapnet.synth import synth_generate

from conftest import simple_clip


def flap(video_id, start, end):
    return Annotation(video_id, Behavior.FLAP, start, end)


class TestPlanSpans:
    def test_dataset_example(self):
        """Flapping at [1,3] and [5,9] in a 10 s video."""
        plan = plan_spans([flap("v", 1, 3), flap("v", 5, 9)], 10.0)
        assert plan.positives == ((1, 3), (5, 9))
        assert plan.controls == ((3, 5),)

    def test_no_annotations_full_control(self):
        plan = plan_spans([], 4.0)
        assert plan.positives == ()
        assert plan.controls == ((0.0, 4.0),)

    def test_long_span_chunked(self):
        plan = plan_spans([flap("v", 0, 12)], 12.0)
        assert plan.positives == ((0, 5), (5, 10), (10, 12))

    def test_chunk_drops_short_remainder(self):
        assert chunk_span((0.0, 6.5)) == [(0.0, 5.0)]
        assert chunk_span((0.0, 1.5)) == []

    def test_other_behaviors_block_controls(self):
        notes = [flap("v", 1, 3), Annotation("v", Behavior.HEADBANG, 5, 9)]
        plan = plan_spans(notes, 10.0)
        assert plan.positives == ((1, 3),)
        assert plan.controls == ((3, 5),)

    def test_annotation_beyond_duration_rejected(self):
        with pytest.raises(ValidationError):
            plan_spans([flap("v", 1, 11)], 10.0)

    def test_mixed_videos_rejected(self):
        with pytest.raises(ValidationError):
            plan_spans([flap("a", 1, 3), flap("b", 1, 3)], 10.0)

    def test_overlapping_annotations_merged(self):
        plan = plan_spans([flap("v", 1, 4), flap("v", 3, 6)], 10.0)
        assert plan.positives == ((1, 6),)

    @settings(max_examples=200, deadline=None)
    @given(
        spans=st.lists(
            st.tuples(st.floats(0, 50), st.floats(0.1, 8)).map(lambda p: (p[0], p[0] + p[1])),
            max_size=6,
        ),
        duration=st.floats(60, 80),
    )
    def test_properties(self, spans, duration):
        notes = [flap("v", s, e) for s, e in spans]
        plan = plan_spans(notes, duration)
        for start, end in plan.positives + plan.controls:
            assert 2.0 <= end - start <= 5.0
        # positives never overlap controls
        for ps, pe in plan.positives:
            for cs, ce in plan.controls:
                assert pe <= cs or ce <= ps
        # idempotence on its own positives
        if plan.positives:
            again = plan_spans([flap("v", s, e) for s, e in plan.positives], duration)
            assert again.positives == plan.positives


class TestCutClip:
    def test_identity_cut(self):
        clip = simple_clip(n_frames=60)
        cut = cut_clip(clip, (0.0, clip.end_s), Label.FLAP)
        assert len(cut) == len(clip)
        assert cut.label is Label.FLAP
        assert [f.frame_index for f in cut.frames] == list(range(60))
        assert cut.frames[0].left == clip.frames[0].left

    def test_half_open_frame_count(self):
        clip = synth_generate(Label.CONTROL, 150, 30.0, seed=0)
        cut = cut_clip(clip, (1.0, 3.0), Label.CONTROL)
        assert len(cut) == 60
        assert cut.frames[0].timestamp_s == pytest.approx(0.0)
        assert cut.start_s == 1.0 and cut.end_s == 3.0

    def test_empty_span_rejected(self):
        with pytest.raises(ValidationError):
            cut_clip(simple_clip(), (5.0, 5.0), Label.FLAP)

    def test_span_outside_source_rejected(self):
        clip = simple_clip(n_frames=30)
        with pytest.raises(ValidationError):
            cut_clip(clip, (0.0, clip.end_s + 1.0), Label.FLAP)


class TestIntervalHelpers:
    def test_merge_touching(self):
        assert merge_intervals([(0, 5), (5, 10)]) == [(0, 10)]

    def test_merge_disjoint(self):
        assert merge_intervals([(6, 8), (0, 2)]) == [(0, 2), (6, 8)]


def test_load_annotations(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("video_id,behavior,start_s,end_s\nv1,flap,1,3\nv1,headbang,5,9\n")
    notes = load_annotations(path)
    assert len(notes) == 2
    assert notes[0].behavior is Behavior.FLAP
    assert notes[1].behavior is Behavior.HEADBANG

    bad = tmp_path / "bad.csv"
    bad.write_text("video,behavior\n")
    with pytest.raises(ParseError):
        load_annotations(bad)
