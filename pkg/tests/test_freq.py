import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.fft import dctn, idctn

from tramba.freq import SpectrumMask, dct2, dct_basis, freq_split, idct2, lowpass_operator


def random_maps(n=100, max_size=32, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        h, w = rng.integers(1, max_size + 1, size=2)
        yield rng.normal(size=(2, 3, h, w))


def test_matches_scipy_orthonormal_dct():
    for x in random_maps(20, 17, seed=1):
        assert np.allclose(dct2(x), dctn(x, type=2, norm="ortho", axes=(-2, -1)), atol=1e-12)
        assert np.allclose(idct2(x), idctn(x, type=2, norm="ortho", axes=(-2, -1)), atol=1e-12)


def test_constant_map_has_only_dc():
    spec = dct2(np.full((4, 4), 2.5))
    want = np.zeros((4, 4))
    want[0, 0] = 4 * 2.5
    assert np.allclose(spec, want, atol=1e-14)


def test_zero_map():
    assert np.array_equal(dct2(np.zeros((3, 5))), np.zeros((3, 5)))


def test_round_trip_parseval_split():
    for x in random_maps():
        spec = dct2(x)
        assert np.abs(idct2(spec) - x).max() < 1e-9
        assert abs((x ** 2).sum() - (spec ** 2).sum()) < 1e-9
        lo, hi = freq_split(x, 0.5)
        assert np.abs(lo + hi - x).max() < 1e-9


def test_linearity():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(2, 9, 13))
    assert np.allclose(dct2(1.7 * x - 0.4 * y), 1.7 * dct2(x) - 0.4 * dct2(y), atol=1e-9)


def test_basis_is_orthonormal_and_frozen():
    m = dct_basis(7)
    assert np.allclose(m @ m.T, np.eye(7), atol=1e-14)
    with pytest.raises(ValueError):
        m[0, 0] = 1.0


def test_mask_partition_and_dc():
    for h, w, cut in [(4, 4, 0.5), (5, 3, 0.3), (1, 1, 0.01), (8, 2, 1.0)]:
        m = SpectrumMask((h, w), cut)
        assert m.low_mask[0, 0]
        assert np.array_equal(m.low_mask ^ m.high_mask, np.ones((h, w), bool))
        i, j = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        assert np.array_equal(m.low_mask, np.maximum(i / h, j / w) < cut)


def test_mask_validation():
    with pytest.raises(ValueError):
        SpectrumMask((4, 4), 0.0)
    with pytest.raises(ValueError):
        SpectrumMask((4, 4), 1.5)
    with pytest.raises(ValueError):
        freq_split(np.zeros((4, 4)), SpectrumMask((3, 4), 0.5))


def test_constant_map_is_all_low():
    x = np.full((1, 6, 6), -3.0)
    lo, hi = freq_split(x, 0.25)
    assert np.allclose(lo, x, atol=1e-14) and np.allclose(hi, 0, atol=1e-14)


def test_full_band_cutoff():
    x = np.random.default_rng(3).normal(size=(5, 7))
    lo, hi = freq_split(x, 1.0)
    assert np.allclose(lo, x, atol=1e-13) and np.allclose(hi, 0, atol=1e-13)


def test_checkerboard_is_high():
    x = (np.indices((4, 4)).sum(axis=0) % 2).astype(float) * 2 - 1
    lo, hi = freq_split(x, 0.5)
    assert np.allclose(lo + hi, x, atol=1e-12)
    # direct spectral masking, via scipy
    spec = dctn(x, norm="ortho")
    mask = np.zeros((4, 4), bool)
    mask[:2, :2] = True
    assert np.allclose(lo, idctn(spec * mask, norm="ortho"), atol=1e-12)
    assert np.allclose(hi, idctn(spec * ~mask, norm="ortho"), atol=1e-12)
    assert (hi ** 2).sum() > 0.9 * (x ** 2).sum()
    assert np.isclose((lo ** 2).sum() + (hi ** 2).sum(), (x ** 2).sum())


def test_lowpass_operator_matches_split():
    x = np.random.default_rng(4).normal(size=(2, 8, 12))
    lo, _ = freq_split(x, 0.5)
    assert np.allclose(lowpass_operator(8, 0.5) @ x @ lowpass_operator(12, 0.5).T, lo, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32), st.integers(1, 32), st.floats(0.01, 1.0), st.integers(0, 2 ** 31))
def test_split_is_exact_property(h, w, cutoff, seed):
    x = np.random.default_rng(seed).normal(size=(h, w))
    lo, hi = freq_split(x, cutoff)
    assert np.abs(lo + hi - x).max() < 1e-9
