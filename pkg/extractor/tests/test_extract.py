import json

import numpy as np
import pytest

from flapnet_extractor.engines import BrightBlobEngine, HandDetection, make_engine
from flapnet_extractor.extract import (
    ExtractionError,
    ExtractionJob,
    _assign_slots,
    batch_extract,
    extract,
)


class TestBlobEngine:
    def test_detects_bright_disc(self):
        import cv2

        frame = np.zeros((96, 96, 3), dtype=np.uint8)
        cv2.circle(frame, (30, 48), 12, (255, 255, 255), -1)
        detections = BrightBlobEngine().process(frame)
        assert len(detections) == 1
        det = detections[0]
        assert det.handedness == "left"  # blob on the left half
        assert det.landmarks.shape == (21, 3)
        assert abs(det.landmarks[:, 0].mean() - 30 / 96) < 0.1

    def test_blank_frame_no_detection(self):
        frame = np.zeros((96, 96, 3), dtype=np.uint8)
        assert BrightBlobEngine().process(frame) == []

    def test_unknown_engine_rejected(self):
        with pytest.raises(ValueError):
            make_engine("kinect")


class TestSlotAssignment:
    def test_distinct_labels(self):
        l = HandDetection("left", 0.9, np.zeros((21, 3)))
        r = HandDetection("right", 0.8, np.zeros((21, 3)))
        slots = _assign_slots([l, r])
        assert slots["left"] is l and slots["right"] is r

    def test_collision_higher_score_keeps_slot(self):
        strong = HandDetection("left", 0.9, np.zeros((21, 3)))
        weak = HandDetection("left", 0.4, np.zeros((21, 3)))
        slots = _assign_slots([weak, strong])
        assert slots["left"] is strong
        assert slots["right"] is weak


class TestExtract:
    def test_fixture_frame_count_and_timestamps(self, fixture_video, tmp_path):
        out = tmp_path / "wave.jsonl"
        summary = extract(ExtractionJob(fixture_video, out, engine="blob"))
        lines = out.read_text().splitlines()
        assert summary.frames == 90
        assert len(lines) == 90
        last = json.loads(lines[-1])
        assert last["frame_index"] == 89
        assert last["t"] == pytest.approx(89 / 30.0, abs=1e-9)
        assert summary.detection_rate == 1.0
        assert summary.engine == "blob"

    def test_blank_video_all_null_hands(self, tmp_path):
        import cv2

        video = tmp_path / "blank.avi"
        writer = cv2.VideoWriter(str(video), cv2.VideoWriter_fourcc(*"MJPG"), 30, (64, 64))
        for _ in range(10):
            writer.write(np.zeros((64, 64, 3), dtype=np.uint8))
        writer.release()

        out = tmp_path / "blank.jsonl"
        summary = extract(ExtractionJob(video, out, engine="blob"))
        assert summary.detection_rate == 0.0
        for line in out.read_text().splitlines():
            obj = json.loads(line)
            assert obj["hands"] == {"left": None, "right": None}

    def test_unreadable_video_is_error(self, tmp_path):
        bad = tmp_path / "corrupt.mp4"
        bad.write_bytes(b"not a video at all")
        with pytest.raises(ExtractionError):
            extract(ExtractionJob(bad, tmp_path / "o.jsonl", engine="blob"))

    def test_fps_resampling(self, fixture_video, tmp_path):
        out = tmp_path / "wave15.jsonl"
        summary = extract(ExtractionJob(fixture_video, out, engine="blob", target_fps=15.0))
        assert summary.fps == 15.0
        assert summary.frames == 45

    def test_deterministic_rerun(self, fixture_video, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        extract(ExtractionJob(fixture_video, a, engine="blob"))
        extract(ExtractionJob(fixture_video, b, engine="blob"))
        assert a.read_bytes() == b.read_bytes()


class TestBatch:
    def test_empty_directory(self, tmp_path):
        videos = tmp_path / "videos"
        videos.mkdir()
        out = tmp_path / "out"
        summaries = batch_extract(videos, out, engine="blob")
        assert summaries == []
        assert (out / "summary.csv").read_text().splitlines()[0].startswith("video_id,")

    def test_one_corrupt_among_two(self, fixture_video, tmp_path):
        import shutil

        videos = tmp_path / "videos"
        videos.mkdir()
        shutil.copy(fixture_video, videos / "good.avi")
        (videos / "bad.avi").write_bytes(b"junk")
        out = tmp_path / "out"
        summaries = batch_extract(videos, out, engine="blob")
        by_id = {s.video_id: s for s in summaries}
        assert by_id["good"].status == "ok"
        assert by_id["bad"].status.startswith("error:")
        assert (out / "good.jsonl").exists()
        assert not (out / "bad.jsonl").exists()
        text = (out / "summary.csv").read_text()
        assert "good" in text and "bad" in text


def test_cli_single_video(fixture_video, tmp_path):
    from click.testing import CliRunner

    from flapnet_extractor.cli import main

    out = tmp_path / "wave.jsonl"
    result = CliRunner().invoke(
        main, [str(fixture_video), "-o", str(out), "--engine", "blob"], catch_exceptions=False
    )
    assert result.exit_code == 0, result.output
    assert "90 frames" in result.output
    assert out.exists()


def test_cli_unreadable_video_nonzero_exit(tmp_path):
    from click.testing import CliRunner

    from flapnet_extractor.cli import main

    bad = tmp_path / "corrupt.mp4"
    bad.write_bytes(b"nope")
    result = CliRunner().invoke(main, [str(bad), "-o", str(tmp_path / "o.jsonl"), "--engine", "blob"])
    assert result.exit_code == 1
    assert "error" in result.output
