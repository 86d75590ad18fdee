import json
import pathlib

import numpy as np
import pytest

from spinekit.synth import patch_frames, skeleton_frame, textured_patch
from spinekit.track import write_pgm

DATA_DIR = pathlib.Path(__file__).resolve().parents[1] / "src" / "spinekit" / "data"


def frame_record(frame):
    return {"t": frame.time_s,
            "landmarks": {name: {"p": [float(v) for v in lm.position],
                                 "c": lm.confidence}
                          for name, lm in frame.landmarks.items()}}


def write_pose_jsonl(path, frames):
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(json.dumps(frame_record(frame)) + "\n")


@pytest.fixture
def write_bow_fixture(tmp_path):
    def _write(name="bow.jsonl", rate=30.0, duration=8.0, mean=30.0, amp=20.0,
               freq=0.25, **kw):
        frames = []
        n = int(rate * duration)
        for i in range(n):
            t = i / rate
            flex = mean + amp * np.sin(2 * np.pi * freq * t)
            frames.append(skeleton_frame(t, flexion_deg=flex, **kw))
        path = tmp_path / name
        write_pose_jsonl(path, frames)
        return path

    return _write


@pytest.fixture
def write_patch_sequence(tmp_path):
    patch = np.round(textured_patch(12, 12) * 255) / 255.0

    def _write(positions, shape=(60, 90), occluded=(), subdir="frames"):
        frame_dir = tmp_path / subdir
        frame_dir.mkdir(exist_ok=True)
        for i, px in enumerate(patch_frames(positions, shape, patch,
                                            occluded=occluded)):
            write_pgm(frame_dir / f"frame_{i:04d}.pgm", px)
        template_path = tmp_path / "template.pgm"
        write_pgm(template_path, patch)
        return frame_dir, template_path

    return _write


def write_toml(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_RESULTS
    except ImportError:
        return
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, label, status, elapsed, budget in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(
            f"{status:>18}  criterion {number:2d} [{elapsed:6.2f}s / {budget:.0f}s]  {label}")
