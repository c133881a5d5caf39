import numpy as np
import pytest

from sam_adapter.flatten import flatten_masks


def rect(shape, r0, c0, r1, c1):
    m = np.zeros(shape, dtype=bool)
    m[r0:r1, c0:c1] = True
    return m


class TestPaintingRule:
    def test_small_inside_large(self):
        shape = (20, 20)
        large = rect(shape, 0, 0, 20, 20)
        small = rect(shape, 5, 5, 10, 10)
        labels = flatten_masks([large, small], shape)
        # small painted last: its label shows inside, large everywhere else
        assert labels[7, 7] != labels[0, 0]
        assert (labels[5:10, 5:10] == labels[7, 7]).all()
        outside = labels.copy()
        outside[5:10, 5:10] = labels[0, 0]
        assert (outside == labels[0, 0]).all()

    def test_input_order_irrelevant(self):
        shape = (20, 20)
        large = rect(shape, 0, 0, 20, 20)
        small = rect(shape, 5, 5, 10, 10)
        a = flatten_masks([large, small], shape)
        b = flatten_masks([small, large], shape)
        assert np.array_equal(a, b)

    def test_equal_area_ties_by_centroid(self):
        shape = (10, 30)
        left = rect(shape, 2, 2, 6, 6)
        right = rect(shape, 2, 20, 6, 24)
        a = flatten_masks([left, right], shape)
        b = flatten_masks([right, left], shape)
        assert np.array_equal(a, b)
        assert a[3, 3] == 1 and a[3, 21] == 2  # lexicographic centroid order

    def test_labels_dense_after_full_overwrite(self):
        shape = (12, 12)
        buried = rect(shape, 4, 4, 8, 8)
        cover = rect(shape, 3, 3, 9, 9)
        exact_cover = rect(shape, 4, 4, 8, 8)
        labels = flatten_masks([cover, buried, exact_cover], shape)
        values = np.unique(labels)
        nonzero = values[values != 0]
        assert nonzero.tolist() == list(range(1, len(nonzero) + 1))

    def test_empty_input(self):
        labels = flatten_masks([], (8, 8))
        assert labels.dtype == np.uint16
        assert not labels.any()

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            flatten_masks([np.ones((4, 4), dtype=bool)], (8, 8))
