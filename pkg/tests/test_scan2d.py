import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tramba import scan2d
from tramba.scan2d import (GridShape, ScanOrder, baseline_scan, bresenham, cross_scan, dilation_scan,
                           gather, helix_coverage, helix_scan, make_scan, scatter_merge, window_scan)

SHAPES = [(h, w) for h in range(1, 17) for w in range(1, 17)]
POW2 = [(h, w) for h in (1, 2, 4, 8, 16) for w in (1, 2, 4, 8, 16)]


def all_sets(h, w):
    yield "cross", cross_scan((h, w))
    for s in (1, 2, 3, 4):
        yield f"window{s}", window_scan((h, w), s)
    for r in (1, 2, 3):
        yield f"dilation{r}", dilation_scan((h, w), r)
    yield "helix", helix_scan((h, w))
    yield "diagonal", baseline_scan((h, w), "diagonal")
    yield "spiral", baseline_scan((h, w), "central_spiral")



# ---------------------------------------------------------------- examples


def test_cross_examples():
    assert cross_scan((1, 4)).forward_a.order.tolist() == [0, 1, 2, 3]
    assert cross_scan((2, 2)).forward_b.order.tolist() == [0, 2, 1, 3]


def test_window_examples():
    fa = window_scan((4, 4), 2).forward_a.order.tolist()
    assert fa == [0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15]
    assert window_scan((3, 3), 1).forward_a.order.tolist() == list(range(9))
    assert sorted(window_scan((2, 3), 2).forward_a.order) == list(range(6))


def test_window_second_direction_is_column_major():
    fb = window_scan((4, 4), 2).forward_b.order.tolist()
    # windows in column-major order, column-major inside each window
    assert fb == [0, 4, 1, 5, 8, 12, 9, 13, 2, 6, 3, 7, 10, 14, 11, 15]


def test_window_clips_partial_windows():
    # 3x3 with S=2: windows of size 2x2, 2x1, 1x2, 1x1
    fa = window_scan((3, 3), 2).forward_a.order.tolist()
    assert fa == [0, 1, 3, 4, 2, 5, 6, 7, 8]


def test_dilation_examples():
    assert dilation_scan((1, 4), 2).forward_a.order.tolist() == [0, 2, 1, 3]
    assert dilation_scan((2, 2), 1).forward_a.order.tolist() == [0, 1, 2, 3]
    assert sorted(dilation_scan((2, 4), 3).forward_a.order) == list(range(8))


def test_dilation_second_direction_uses_transpose():
    # the 3x2 grid transposed is 2x3; R=2 there visits t = 0,2,4,1,3,5 and
    # t maps back to (row t % 3, col t // 3)
    fb = dilation_scan((3, 2), 2).forward_b.order.tolist()
    assert fb == [0, 4, 3, 2, 1, 5]


def test_helix_examples():
    s = helix_scan((2, 2))
    assert s.forward_a.order.tolist()[:2] == [0, 3]
    assert sorted(s.forward_a.order) == [0, 1, 2, 3]
    assert helix_scan((1, 3)).forward_a.order.tolist() == [0, 1, 2]


def test_helix_follows_bresenham_slices():
    h, w = 8, 8
    fa = helix_scan((h, w)).forward_a.order.tolist()
    first = [r * w + c for r, c in bresenham(0, 0, h - 1, w - 1)]
    assert fa[: len(first)] == first
    second = [r * w + c for r, c in bresenham(h - 1, 0, 0, w - 1) if r * w + c not in first]
    assert fa[len(first): len(first) + len(second)] == second


def test_bresenham_endpoints_and_steps():
    for r0, c0, r1, c1 in [(0, 0, 5, 3), (7, 0, 0, 7), (2, 9, 2, 0), (0, 0, 0, 0), (4, 1, 0, 2)]:
        pts = bresenham(r0, c0, r1, c1)
        assert pts[0] == (r0, c0) and pts[-1] == (r1, c1)
        assert len(pts) == max(abs(r1 - r0), abs(c1 - c0)) + 1
        for (a, b), (c, d) in zip(pts, pts[1:]):
            assert max(abs(a - c), abs(b - d)) == 1


def test_baseline_examples():
    assert baseline_scan((2, 2), "diagonal").forward_a.order.tolist() == [0, 1, 2, 3]
    assert sorted(baseline_scan((2, 2), "central_spiral").forward_a.order) == [0, 1, 2, 3]
    order = baseline_scan((4, 4), "hilbert").forward_a.order
    rc = [divmod(int(i), 4) for i in order]
    for (a, b), (c, d) in zip(rc, rc[1:]):
        assert abs(a - c) + abs(b - d) == 1


def test_spiral_starts_at_centre_and_stays_adjacent_on_square():
    order = baseline_scan((5, 5), "central_spiral").forward_a.order
    assert order[0] == 12
    rc = [divmod(int(i), 5) for i in order]
    for (a, b), (c, d) in zip(rc, rc[1:]):
        assert abs(a - c) + abs(b - d) == 1


def test_hilbert_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="power-of-two"):
        baseline_scan((3, 4), "hilbert")


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_scan("zigzag", (2, 2))
    with pytest.raises(ValueError):
        baseline_scan((2, 2), "zigzag")


def test_invalid_parameters():
    with pytest.raises(ValueError):
        GridShape(0, 3)
    with pytest.raises(ValueError):
        window_scan((3, 3), 0)
    with pytest.raises(ValueError):
        dilation_scan((3, 3), 0)
    with pytest.raises(ValueError):
        ScanOrder((2, 2), [0, 1, 1, 3])
    with pytest.raises(ValueError):
        ScanOrder((2, 2), [0, 1, 2])


# ---------------------------------------------------------------- sweeps


def test_bijectivity_and_reversal_sweep():
    for h, w in SHAPES:
        n = h * w
        for name, s in all_sets(h, w):
            for o in s:
                assert np.array_equal(np.sort(o.order), np.arange(n)), (name, h, w)
                assert np.array_equal(o.inverse[o.order], np.arange(n)), (name, h, w)
            assert np.array_equal(s.backward_a.order, s.forward_a.order[::-1])
            assert np.array_equal(s.backward_b.order, s.forward_b.order[::-1])
    for h, w in POW2:
        s = baseline_scan((h, w), "hilbert")
        for o in s:
            assert np.array_equal(np.sort(o.order), np.arange(h * w))
        assert np.array_equal(s.backward_a.order, s.forward_a.order[::-1])


def test_degenerate_parameters_give_raster():
    for h, w in SHAPES:
        raster = list(range(h * w))
        assert window_scan((h, w), 1).forward_a.order.tolist() == raster
        assert dilation_scan((h, w), 1).forward_a.order.tolist() == raster
        assert window_scan((h, w), max(h, w)).forward_a.order.tolist() == raster
        assert dilation_scan((h, w), 1) == cross_scan((h, w))


def test_helix_coverage_is_tracked():
    square = [helix_coverage((n, n)) for n in (2, 4, 8, 16)]
    assert all(c.slices_cover_grid for c in square)
    assert all(c.completed_a == c.shape.size - c.covered_a for c in square)
    # some shape needs the raster completion step
    exercised = [c for c in (helix_coverage(s) for s in SHAPES) if c.completed_a or c.completed_b]
    assert exercised


# ---------------------------------------------------------------- objects


def test_scan_order_is_immutable():
    o = cross_scan((2, 3)).forward_a
    with pytest.raises(AttributeError):
        o.order = np.arange(6)
    with pytest.raises(ValueError):
        o.order[0] = 5


def test_rank_grid_and_compose():
    o = window_scan((2, 4), 2).forward_a
    grid = o.rank_grid()
    assert grid.shape == (2, 4)
    assert grid.ravel()[o.order].tolist() == list(range(8))
    perm = np.random.default_rng(0).permutation(8)
    assert o.compose(perm).order.tolist() == perm[o.order].tolist()


# ---------------------------------------------------------------- gather / merge


def test_gather_raster_is_identity_layout():
    x = np.random.default_rng(1).normal(size=(2, 3, 4, 5))
    seq = gather(x, cross_scan((4, 5)).forward_a)
    assert np.array_equal(seq, x.reshape(2, 3, 20).transpose(0, 2, 1))


@pytest.mark.parametrize("kind", ["cross", "window", "dilation", "helix", "diagonal", "spiral"])
def test_identity_ssm_merge_is_four_x(kind):
    x = np.random.default_rng(2).normal(size=(1, 2, 5, 7))
    s = make_scan(kind, (5, 7), window=2, rate=3)
    out = scatter_merge([gather(x, o) for o in s], s)
    assert np.allclose(out, 4 * x, rtol=0, atol=1e-15)


def test_all_ones_helix_scatter_is_all_fours():
    s = helix_scan((3, 3))
    out = scatter_merge([np.ones((1, 9, 1))] * 4, s)
    assert np.array_equal(out, np.full((1, 1, 3, 3), 4.0))


def test_gather_shape_mismatch():
    with pytest.raises(ValueError):
        gather(np.zeros((1, 1, 3, 3)), cross_scan((3, 4)).forward_a)
    with pytest.raises(ValueError):
        scatter_merge([np.zeros((1, 5, 1))] * 4, cross_scan((2, 2)))


def test_stack_orders_shape():
    k = scan2d.stack_orders(helix_scan((4, 4)), cross_scan((4, 4)))
    assert k.shape == (8, 16)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 6), st.integers(1, 6))
def test_random_shapes_are_permutations(h, w, s, r):
    for o in list(window_scan((h, w), s)) + list(dilation_scan((h, w), r)) + list(helix_scan((h, w))):
        assert np.array_equal(np.sort(o.order), np.arange(h * w))
