import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import FACE_FIXTURE, write_jsonl, write_png
from groupaffect.errors import EmptyDatasetError, ImageReadError, InvalidBoxError, ManifestError
from groupaffect.preprocess import (FaceBox, build_isolated_dataset, crop_faces, load_image, normalize,
                                    parse_record, preprocess_face, read_manifest, scale_to_64)


def test_full_frame_crop(rng):
    img = rng.integers(0, 256, size=(12, 9, 3), dtype=np.uint8)
    (crop,) = crop_faces(img, [FaceBox(0, 0, 9, 12)])
    np.testing.assert_array_equal(crop, img)


def test_empty_box_list(rng):
    assert crop_faces(rng.integers(0, 256, size=(4, 4, 3)), []) == []


def test_crop_matches_slice(rng):
    img = rng.integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
    (crop,) = crop_faces(img, [FaceBox(2, 3, 4, 5)])
    assert crop.shape == (5, 4, 3)
    np.testing.assert_array_equal(crop, img[3:8, 2:6])


def test_box_partially_outside_is_clamped(rng):
    img = rng.integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
    (crop,) = crop_faces(img, [FaceBox(-2, 7, 5, 10)])
    np.testing.assert_array_equal(crop, img[7:10, 0:3])


def test_box_outside_rejected_with_index(rng):
    img = rng.integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
    with pytest.raises(InvalidBoxError) as err:
        crop_faces(img, [FaceBox(0, 0, 2, 2), FaceBox(10, 0, 3, 3)])
    assert err.value.index == 1


def test_box_needs_positive_extent():
    with pytest.raises(ValueError):
        FaceBox(0, 0, 0, 3)


def test_scale_64_identity(rng):
    img = rng.integers(0, 256, size=(64, 64, 3)).astype(float)
    np.testing.assert_array_equal(scale_to_64(img), img)


def test_scale_constant_128():
    out = scale_to_64(np.full((128, 128, 3), 77.0))
    assert out.shape == (64, 64, 3)
    np.testing.assert_allclose(out, 77.0, atol=1e-12)


def test_scale_tall_image_margins():
    out = scale_to_64(np.full((128, 64, 3), 200.0))
    assert out.shape == (64, 64, 3)
    np.testing.assert_array_equal(out[:, :16], 0.0)
    np.testing.assert_array_equal(out[:, 48:], 0.0)
    np.testing.assert_allclose(out[:, 16:48], 200.0, atol=1e-12)


def test_scale_wide_image_margins():
    out = scale_to_64(np.full((32, 128, 3), 9.0))
    np.testing.assert_array_equal(out[:24], 0.0)
    np.testing.assert_array_equal(out[40:], 0.0)
    np.testing.assert_allclose(out[24:40], 9.0, atol=1e-12)


def test_normalize_values():
    out = normalize(np.array([255, 0, 128], dtype=np.uint8))
    assert out[0] == 1.0 and out[1] == 0.0
    assert out[2] == pytest.approx(128 / 255)
    assert out[2] == pytest.approx(0.50196, abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 90), st.integers(1, 90), st.just(3))))
def test_scale_preserves_bounds(img):
    out = scale_to_64(img.astype(float))
    lo, hi = float(img.min()), float(img.max())
    # the zero canvas may introduce 0 in the margins
    assert out.min() >= min(lo, 0.0) - 1e-9 and out.max() <= hi + 1e-9
    face = preprocess_face(img)
    assert face.shape == (64, 64, 3) and face.min() >= 0.0 and face.max() <= 1.0


def test_preprocess_deterministic(rng):
    img = rng.integers(0, 256, size=(37, 51, 3), dtype=np.uint8)
    assert preprocess_face(img).tobytes() == preprocess_face(img.copy()).tobytes()


def test_dataset_hand_count(face_manifest):
    ds = build_isolated_dataset(read_manifest(face_manifest))
    assert len(ds.labels) == 12
    # positive 3 + 3, neutral 4 + 0, negative 2
    assert ds.class_counts().tolist() == [6, 4, 2]
    assert ds.images.shape == (12, 64, 64, 3)
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0


def test_dataset_provenance_is_total(face_manifest):
    ds = build_isolated_dataset(read_manifest(face_manifest))
    assert len(ds.provenance) == len(ds.labels)
    per_record = np.bincount([r for r, _ in ds.provenance], minlength=len(FACE_FIXTURE))
    assert per_record.tolist() == [len(boxes) for _, boxes in FACE_FIXTURE]
    assert len(set(ds.provenance)) == len(ds.provenance)


def test_label_inheritance(tmp_path, rng):
    write_png(tmp_path / "g.png", rng.integers(0, 256, size=(30, 30, 3)))
    m = write_jsonl(tmp_path / "m.jsonl", [{"image": "g.png", "label": "positive",
                                             "faces": [[0, 0, 5, 5], [5, 5, 5, 5], [10, 10, 5, 5]]}])
    ds = build_isolated_dataset(read_manifest(m))
    assert ds.labels.tolist() == [0, 0, 0]


def test_zero_box_record_in_skip_report(face_manifest):
    ds = build_isolated_dataset(read_manifest(face_manifest))
    assert [r for r, _ in ds.skipped] == [4]


def test_unreadable_image_skipped(tmp_path, face_manifest):
    lines = face_manifest.read_text().splitlines()
    extra = json.dumps({"image": "missing.png", "label": "negative", "faces": [[0, 0, 3, 3]]})
    face_manifest.write_text("\n".join(lines + [extra]) + "\n")
    ds = build_isolated_dataset(read_manifest(face_manifest))
    assert len(ds.labels) == 12
    assert 5 in [r for r, _ in ds.skipped]


def test_rejected_box_reported(tmp_path, rng):
    write_png(tmp_path / "g.png", rng.integers(0, 256, size=(20, 20, 3)))
    m = write_jsonl(tmp_path / "m.jsonl", [{"image": "g.png", "label": "neutral",
                                             "faces": [[0, 0, 5, 5], [50, 50, 5, 5]]}])
    ds = build_isolated_dataset(read_manifest(m))
    assert len(ds.labels) == 1
    assert [(r, j) for r, j, _ in ds.rejected_boxes] == [(0, 1)]


def test_zero_faces_rejected(tmp_path):
    m = write_jsonl(tmp_path / "m.jsonl", [{"image": "x.png", "label": "neutral"}])
    with pytest.raises(EmptyDatasetError):
        build_isolated_dataset(read_manifest(m))


def test_missing_label_rejected(tmp_path, rng):
    write_png(tmp_path / "g.png", rng.integers(0, 256, size=(20, 20, 3)))
    m = write_jsonl(tmp_path / "m.jsonl", [{"image": "g.png", "faces": [[0, 0, 5, 5]]}])
    with pytest.raises(ManifestError):
        build_isolated_dataset(read_manifest(m))


def test_dataset_is_deterministic(face_manifest):
    a = build_isolated_dataset(read_manifest(face_manifest))
    b = build_isolated_dataset(read_manifest(face_manifest))
    assert a.images.tobytes() == b.images.tobytes()


def test_descriptors_cleaned():
    rec = parse_record({"image": "a.png", "descriptors": [" Party", "", "FUN"]})
    assert rec.descriptors == ("party", "fun") or list(rec.descriptors) == ["party", "fun"]


def test_bad_label_rejected():
    with pytest.raises(ManifestError):
        parse_record({"image": "a.png", "label": "happy"})


def test_invalid_json_line_reported(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"image": "a.png"}\n{oops\n')
    with pytest.raises(ManifestError) as err:
        read_manifest(p)
    assert ":2:" in str(err.value)


def test_unsupported_format_rejected(tmp_path, rng):
    from PIL import Image
    Image.fromarray(rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)).save(tmp_path / "a.bmp")
    with pytest.raises(ImageReadError):
        load_image(tmp_path / "a.bmp")


def test_jpeg_accepted(tmp_path, rng):
    from PIL import Image
    Image.fromarray(rng.integers(0, 256, size=(6, 5, 3), dtype=np.uint8)).save(tmp_path / "a.jpg")
    assert load_image(tmp_path / "a.jpg").shape == (6, 5, 3)
