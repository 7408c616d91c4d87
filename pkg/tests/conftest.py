import json

import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20190418)


def write_png(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")
    return path


def write_jsonl(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


# Hand-tallied scene-descriptor fixture (6 labeled images).
#   positive: 3 images; "fun" in all 3, "party" in 2 (listed twice in one), "protest" in 0
#   neutral:  2 images; "fun" in 1, "meeting" in 2
#   negative: 1 image;  "protest" in 1, "party" in 1
MLE_RECORDS = [
    {"image": "a.png", "label": "positive", "descriptors": ["fun", "party", "party"]},
    {"image": "b.png", "label": "positive", "descriptors": ["Fun ", "party"]},
    {"image": "c.png", "label": "positive", "descriptors": ["fun"]},
    {"image": "d.png", "label": "neutral", "descriptors": ["meeting", "fun"]},
    {"image": "e.png", "label": "neutral", "descriptors": ["meeting"]},
    {"image": "f.png", "label": "negative", "descriptors": ["protest", "party"]},
]
# n_true[descriptor] = (positive, neutral, negative); class counts (3, 2, 1)
MLE_TALLY = {
    "fun": (3, 1, 0),
    "meeting": (0, 2, 0),
    "party": (2, 0, 1),
    "protest": (0, 0, 1),
}
MLE_CLASS_COUNTS = (3, 2, 1)


@pytest.fixture
def mle_manifest(tmp_path):
    return write_jsonl(tmp_path / "mle.jsonl", MLE_RECORDS)


# Preprocessing fixture: 5 records, 12 boxes in total.
#   0 positive 3 boxes, 1 neutral 4 boxes, 2 negative 2 boxes,
#   3 positive 3 boxes, 4 neutral 0 boxes
FACE_FIXTURE = [
    ("positive", [[0, 0, 10, 10], [10, 5, 12, 8], [30, 30, 9, 9]]),
    ("neutral", [[1, 1, 5, 5], [6, 6, 7, 7], [20, 2, 10, 20], [0, 30, 40, 10]]),
    ("negative", [[2, 3, 4, 5], [15, 15, 20, 20]]),
    ("positive", [[0, 0, 40, 40], [5, 5, 3, 3], [35, 0, 5, 40]]),
    ("neutral", []),
]


@pytest.fixture
def face_manifest(tmp_path):
    gen = np.random.default_rng(7)
    objs = []
    for i, (label, boxes) in enumerate(FACE_FIXTURE):
        write_png(tmp_path / f"img{i}.png", gen.integers(0, 256, size=(40, 40, 3)))
        objs.append({"image": f"img{i}.png", "label": label, "faces": boxes,
                     "descriptors": [label[:3]]})
    return write_jsonl(tmp_path / "faces.jsonl", objs)
