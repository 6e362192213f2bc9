import numpy as np
import pytest
from PIL import Image as PILImage

from bsfa.bas import BBox
from bsfa.data import (
    DatasetError,
    Image,
    PreprocessConfig,
    SplitSpec,
    decode_image,
    hflip,
    load_dataset,
    preprocess,
    preset_split,
    read_boxes,
    resolve_split,
)

from oracles import bilinear_resize


def write_tree(root, classes, per_class=2, size=16):
    rng = np.random.default_rng(0)
    for name in classes:
        (root / name).mkdir(parents=True)
        for i in range(per_class):
            arr = (rng.uniform(size=(size, size, 3)) * 255).astype(np.uint8)
            PILImage.fromarray(arr).save(root / name / f"{i}.png")


def test_toy_tree_split_sizes(tmp_path):
    write_tree(tmp_path, ["d", "c", "b", "a"])
    split = SplitSpec("toy", ("d", "b"), ("a",), ("c",))
    base, val, novel = load_dataset(tmp_path, split)
    assert (len(base), len(val), len(novel)) == (2, 1, 1)
    # labels follow the sorted base-class names
    assert {im.global_label for im in base["b"]} == {0}
    assert {im.global_label for im in base["d"]} == {1}
    assert all(im.global_label is None for im in novel["c"])
    assert base["b"][0].pixels.dtype == np.float32
    assert 0 <= base["b"][0].pixels.min() and base["b"][0].pixels.max() <= 1


def test_overlapping_split_is_rejected():
    with pytest.raises(DatasetError, match="'x'"):
        SplitSpec("bad", ("x", "y"), (), ("x",))


def test_missing_class_folder(tmp_path):
    write_tree(tmp_path, ["a"])
    with pytest.raises(DatasetError, match="missing"):
        load_dataset(tmp_path, SplitSpec("t", ("a", "ghost")))


def test_corrupt_image_named(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "broken.png").write_bytes(b"nope")
    with pytest.raises(DatasetError, match="broken.png"):
        decode_image(tmp_path / "a" / "broken.png")


@pytest.mark.parametrize("preset, counts", [("cub", (100, 50, 50)), ("dogs", (70, 20, 30)),
                                            ("cars", (130, 17, 49))])
def test_presets(preset, counts):
    names = [f"class_{i:03d}" for i in range(sum(counts))]
    split = preset_split(preset, names, seed=0)
    assert split.counts == counts
    assert preset_split(preset, names, seed=0) == split


def test_resolve_split_prefers_files(small_dataset):
    split = resolve_split(small_dataset, "synthetic")
    assert split.counts == (5, 1, 2)


def test_read_boxes(tmp_path):
    (tmp_path / "boxes.txt").write_text("a/0.png 2 3 4 5\n\n")
    assert read_boxes(tmp_path / "boxes.txt")["a/0.png"].as_tuple() == (3, 2, 7, 5)


def test_eval_preprocess_is_plain_resize(rng):
    x = rng.uniform(size=(40, 40, 3)).astype(np.float32)
    out = preprocess(Image(x), PreprocessConfig(target_size=84)).pixels
    assert out.shape == (84, 84, 3)
    np.testing.assert_allclose(out, bilinear_resize(x, 84, 84), atol=1e-6)


def test_flip_involution(rng):
    x = rng.uniform(size=(5, 7, 3))
    assert np.array_equal(hflip(hflip(x)), x)


def test_gt_box_crop_matches_bilinear_oracle(small_pools):
    base = small_pools[0]
    im = next(iter(base.values()))[0]
    b = im.gt_box
    assert b is not None
    out = preprocess(im, PreprocessConfig(use_gt_box=True)).pixels
    crop = im.pixels[b.row_min:b.row_max + 1, b.col_min:b.col_max + 1]
    np.testing.assert_allclose(out, np.clip(bilinear_resize(crop, 84, 84), 0, 1), atol=1e-5)


def test_train_augmentation_is_seeded(rng):
    x = rng.uniform(size=(84, 84, 3)).astype(np.float32)
    cfg = PreprocessConfig()
    a = preprocess(Image(x), cfg, np.random.default_rng(5), train=True).pixels
    b = preprocess(Image(x), cfg, np.random.default_rng(5), train=True).pixels
    assert np.array_equal(a, b)
    assert a.shape == (84, 84, 3)


def test_eval_loads_are_identical(small_dataset):
    split = resolve_split(small_dataset)
    p1, p2 = load_dataset(small_dataset, split), load_dataset(small_dataset, split)
    cfg = PreprocessConfig()
    for name in p1[2]:
        for a, b in zip(p1[2][name], p2[2][name]):
            assert np.array_equal(preprocess(a, cfg).pixels, preprocess(b, cfg).pixels)


def test_bad_target_size():
    with pytest.raises(ValueError):
        PreprocessConfig(target_size=0)


def test_non_rgb_rejected():
    with pytest.raises(DatasetError):
        preprocess(Image(np.zeros((8, 8))), PreprocessConfig())


def test_gt_box_is_in_pixels(small_pools):
    for images in small_pools[0].values():
        for im in images:
            assert isinstance(im.gt_box, BBox)
            assert 0 <= im.gt_box.row_min <= im.gt_box.row_max < im.pixels.shape[0]
