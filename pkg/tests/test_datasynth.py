"""Scene/proposal generator contracts: determinism, counts, labels, splits."""

import numpy as np
import pytest

from featgan.datasynth import (
    Annotation,
    JitterParams,
    PlacementError,
    SceneConfig,
    generate_proposals,
    generate_scene,
    split_by_size,
)
from featgan.evaluation import iou

CFG = SceneConfig(image_size=160, num_classes=3, instances_per_image=(3, 5),
                  small_side_range=(8, 12), large_side_range=(28, 36),
                  clutter_density=0.04, noise_sigma=0.02, seed=42)


def test_determinism_bit_identical():
    img1, anns1 = generate_scene(CFG, 7)
    img2, anns2 = generate_scene(CFG, 7)
    assert np.array_equal(img1, img2)
    assert len(anns1) == len(anns2)
    for a, b in zip(anns1, anns2):
        assert np.array_equal(a.box, b.box) and a.class_id == b.class_id


def test_different_index_different_scene():
    img1, _ = generate_scene(CFG, 0)
    img2, _ = generate_scene(CFG, 1)
    assert not np.array_equal(img1, img2)


def test_forced_instance_count():
    cfg = SceneConfig(image_size=160, num_classes=2, instances_per_image=(3, 3),
                      small_side_range=(8, 12), large_side_range=(28, 36), seed=1)
    for idx in range(5):
        _, anns = generate_scene(cfg, idx)
        assert len(anns) == 3


def test_annotation_wellformedness():
    for idx in range(10):
        img, anns = generate_scene(CFG, idx)
        assert img.dtype == np.uint8 and img.shape == (160, 160)
        for a in anns:
            x1, y1, x2, y2 = a.box
            assert 0 <= x1 < x2 <= 160 and 0 <= y1 < y2 <= 160
            assert 1 <= a.class_id <= 3
            assert a.area == (x2 - x1) * (y2 - y1)


def test_side_ranges_respected_brute_scan():
    # every annotation over many images has sides from one of the two ranges;
    # with ranges [8,12] and [28,36] the areas can never meet in the middle
    for idx in range(30):
        _, anns = generate_scene(CFG, idx)
        for a in anns:
            w = a.box[2] - a.box[0]
            h = a.box[3] - a.box[1]
            assert (8 <= w <= 12 and 8 <= h <= 12) or (28 <= w <= 36 and 28 <= h <= 36)


def test_no_overlapping_instances():
    for idx in range(10):
        _, anns = generate_scene(CFG, idx)
        for i in range(len(anns)):
            for j in range(i + 1, len(anns)):
                assert iou(anns[i].box, anns[j].box) == 0.0


def test_overdense_config_rejected():
    cfg = SceneConfig(image_size=128, num_classes=1, instances_per_image=(30, 30),
                      small_side_range=(20, 24), large_side_range=(28, 32), seed=0)
    with pytest.raises(PlacementError):
        generate_scene(cfg, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(image_size=100, num_classes=0).validate()
    with pytest.raises(ValueError):
        SceneConfig(small_side_range=(30, 100), large_side_range=(90, 120)).validate()
    with pytest.raises(ValueError):  # image too small for 4x the largest side
        SceneConfig(image_size=128, large_side_range=(96, 120)).validate()


# ---------------------------------------------------------------------- split


def test_split_by_size_tabulated():
    mk = lambda area, i: Annotation(0, np.array([0, 0, 1.0, float(area)]), 1)
    anns = [mk(4, 0), mk(16, 1), mk(100, 2)]  # mean area = 40
    small, large = split_by_size(anns)
    assert [a.area for a in small] == [4, 16]
    assert [a.area for a in large] == [100]


def test_split_single_and_equal_go_large():
    a = Annotation(0, np.array([0, 0, 2.0, 2.0]), 1)
    small, large = split_by_size([a])
    assert small == [] and large == [a]
    small, large = split_by_size([a, Annotation(1, np.array([0, 0, 2.0, 2.0]), 2)])
    assert small == [] and len(large) == 2


def test_split_empty_errors():
    with pytest.raises(ValueError):
        split_by_size([])


def test_split_partitions():
    _, anns = generate_scene(CFG, 3)
    small, large = split_by_size(anns)
    assert len(small) + len(large) == len(anns)
    ids = {id(a) for a in small} | {id(a) for a in large}
    assert len(ids) == len(anns)


# ------------------------------------------------------------------ proposals


def test_proposal_count_arithmetic():
    _, anns = generate_scene(CFG, 2)
    anns = anns[:2]
    props = generate_proposals(anns, JitterParams(n_pos=4), 8, seed=(1, 2),
                               image_size=160, image_id=0)
    assert len(props) == 2 * 4 + 8


def test_proposal_determinism():
    _, anns = generate_scene(CFG, 2)
    p1 = generate_proposals(anns, JitterParams(), 10, seed=(9, 9),
                            image_size=160, image_id=2)
    p2 = generate_proposals(anns, JitterParams(), 10, seed=(9, 9),
                            image_size=160, image_id=2)
    assert len(p1) == len(p2)
    for a, b in zip(p1, p2):
        assert np.array_equal(a.box, b.box) and a.label == b.label


def test_label_soundness_iou_rule():
    for idx in range(6):
        _, anns = generate_scene(CFG, idx)
        props = generate_proposals(anns, JitterParams(), 12, seed=(3, idx),
                                   image_size=160, image_id=idx)
        for p in props:
            best = max(iou(p.box, a.box) for a in anns)
            if p.label != 0:
                assert best >= 0.5
                assert p.label == anns[p.matched_gt].class_id
            else:
                assert best < 0.5


def test_negatives_stay_below_03():
    _, anns = generate_scene(CFG, 4)
    props = generate_proposals(anns, JitterParams(), 20, seed=(5, 4),
                               image_size=160, image_id=4)
    negs = [p for p in props if p.label == 0]
    assert len(negs) >= 20
    for p in negs:
        assert max(iou(p.box, a.box) for a in anns) < 0.3


def test_first_positive_is_exact_copy():
    # each annotation contributes its own box as one proposal (IoU 1, its class)
    _, anns = generate_scene(CFG, 1)
    props = generate_proposals(anns, JitterParams(n_pos=3), 5, seed=(2, 1),
                               image_size=160, image_id=1)
    pos = [p for p in props if p.label != 0]
    for a in anns:
        exact = [p for p in pos
                 if np.array_equal(np.asarray(p.box, float), np.asarray(a.box, float))]
        assert len(exact) >= 1


def test_jitter_validation():
    with pytest.raises(ValueError):
        JitterParams(n_pos=0).validate()
    with pytest.raises(ValueError):
        JitterParams(max_shift_frac=0.9).validate()
