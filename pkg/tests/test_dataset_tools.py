import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tramba import dataset_tools as dt
from tramba._io import encode_png
from tramba.dataset_tools import (ALPHABETS, NameParseError, SampleMeta, classify_size, compute_stats,
                                  format_name, mask_centroid, parse_name, size_class_of, stratified_split,
                                  synth_dataset)


def random_meta(rng):
    return SampleMeta(*(str(rng.choice(list(ALPHABETS[f]))) for f in dt.FIELDS),
                      id=f"{int(rng.integers(0, 100000)):05d}", ext=str(rng.choice([".jpg", ".png"])))


def names_per_class(counts, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    for cat, n in counts.items():
        for _ in range(n):
            i += 1
            e, w, s = rng.choice(list("CEN")), rng.choice(list("FIL")), rng.choice(list("LS"))
            out.append(f"{e}_{cat}_{w}_{s}_{i:05d}.jpg")
    return out


# ---------------------------------------------------------------- codec


def test_parse_example():
    m = parse_name("C_H_L_S_00042.jpg")
    assert m.describe() == {"emergency": "crisis", "category": "human", "weather": "low-light",
                            "size_class": "small"}
    assert m.id == "00042" and m.ext == ".jpg"
    assert parse_name("some/dir/N_O_F_L_12345.png").category == "O"


@pytest.mark.parametrize("name, field", [
    ("X_H_L_S_00042.jpg", "emergency"),
    ("C_Q_L_S_00042.jpg", "category"),
    ("C_H_R_S_00042.jpg", "weather"),
    ("C_H_L_M_00042.jpg", "size_class"),
    ("C_H_L_S_0042.jpg", "id"),
    ("C_H_L_S_0004a.jpg", "id"),
    ("C_H_L_00042.jpg", "structure"),
])
def test_parse_errors_name_the_field(name, field):
    with pytest.raises(NameParseError) as info:
        parse_name(name)
    assert info.value.field == field
    assert field in str(info.value)


def test_codec_round_trip_10000():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        m = random_meta(rng)
        n = format_name(m)
        assert parse_name(n) == m
        assert format_name(parse_name(n)) == n


@given(st.sampled_from("CEN"), st.sampled_from("HVSO"), st.sampled_from("FIL"), st.sampled_from("LS"),
       st.integers(0, 99999))
def test_codec_round_trip_property(e, c, w, s, i):
    n = f"{e}_{c}_{w}_{s}_{i:05d}.jpg"
    assert format_name(parse_name(n)) == n


def test_meta_validation():
    with pytest.raises(ValueError):
        SampleMeta("C", "H", "L", "S", "123")


# ---------------------------------------------------------------- size class


def test_size_class_examples():
    m = np.zeros((10, 10), bool)
    m.ravel()[:10] = True
    assert size_class_of(m) == "L"
    assert size_class_of(np.ones((4, 4))) == "L"
    m.ravel()[9] = False
    assert size_class_of(m) == "S"
    info = classify_size(np.zeros((5, 5)))
    assert info.size_class == "S" and info.empty and info.ratio == 0.0


# ---------------------------------------------------------------- split


def test_split_ten_per_class():
    names = names_per_class({"H": 10, "V": 10, "S": 10, "O": 10})
    train, test = stratified_split(names, seed=3)
    for cat in "HVSO":
        assert sum(parse_name(n).category == cat for n in train) == 8
        assert sum(parse_name(n).category == cat for n in test) == 2


def test_split_single_and_determinism():
    names = names_per_class({"H": 1, "V": 7, "O": 13})
    train, test = stratified_split(names, seed=5)
    assert [n for n in train if "_H_" in n] and not [n for n in test if "_H_" in n]
    assert stratified_split(names, seed=5) == (train, test)
    assert stratified_split(list(reversed(names)), seed=5) == (train, test)
    assert stratified_split(names, seed=6) != (train, test)


@given(st.lists(st.integers(0, 25), min_size=4, max_size=4), st.integers(0, 1000))
def test_split_partition_property(counts, seed):
    names = names_per_class(dict(zip("HVSO", counts)), seed=seed)
    train, test = stratified_split(names, seed=seed)
    assert not set(train) & set(test)
    assert sorted(train + test) == sorted(names)
    for cat, n in zip("HVSO", counts):
        k = sum(parse_name(x).category == cat for x in train)
        assert k == math.ceil(0.8 * n)
        assert abs(k - 0.8 * n) <= 1


def test_split_reports_bad_names():
    with pytest.raises(ValueError, match="unparseable"):
        stratified_split(["C_H_L_S_00001.jpg", "junk.jpg"])
    with pytest.raises(ValueError):
        stratified_split([], ratio=1.5)


# ---------------------------------------------------------------- stats


def test_stats_emergency_proportions():
    m = np.zeros((4, 4), bool)
    m[1:3, 1:3] = True
    s = compute_stats([("C_H_F_L_00001.jpg", m), ("N_V_F_S_00002.jpg", m)])
    assert s.proportions["emergency"] == {"C": 0.5, "E": 0.0, "N": 0.5}
    for f in dt.FIELDS:
        assert sum(s.proportions[f].values()) == pytest.approx(1.0, abs=1e-9)


def test_centroid_of_centred_square():
    m = np.zeros((10, 10), bool)
    m[3:7, 3:7] = True
    cx, cy = mask_centroid(m)
    assert abs(cx - 0.5) <= 0.05 and abs(cy - 0.5) <= 0.05
    assert mask_centroid(np.zeros((3, 3))) is None


def test_stats_three_hand_built_masks(tmp_path):
    a = np.zeros((10, 10), bool)
    a[:5] = True  # ratio 0.5
    b = np.zeros((10, 10), bool)
    b[0, :3] = True  # ratio 0.03
    c = np.zeros((10, 10), bool)
    c[:2] = True  # ratio 0.2
    p = tmp_path / "c.png"
    p.write_bytes(encode_png(c.astype(np.uint8) * 255))
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"nope")
    s = compute_stats([("E_H_F_L_00001.jpg", a), ("E_V_I_S_00002.jpg", b), ("C_H_L_L_00003.jpg", p),
                       ("N_O_F_S_00004.jpg", bad)])
    assert s.total == 3 and s.skipped == ["N_O_F_S_00004.jpg"]
    assert s.counts["emergency"] == {"C": 1, "E": 2, "N": 0}
    assert s.proportions["category"]["H"] == pytest.approx(2 / 3)
    assert s.size_hist.tolist() == [1, 0, 1, 0, 0, 1, 0, 0, 0, 0]
    assert len(s.centroids) == 3
    tsv = s.to_tsv()
    assert tsv.startswith("section\tkey\tvalue\tcount\n")
    assert "emergency\tE\t0.666667\t2" in tsv


# ---------------------------------------------------------------- synthetic fixtures


def test_synth_dataset_is_deterministic_and_consistent():
    a = synth_dataset(16, seed=11)
    b = synth_dataset(16, seed=11)
    assert [s.name for s in a] == [s.name for s in b]
    assert all(np.array_equal(x.image, y.image) and np.array_equal(x.mask, y.mask) for x, y in zip(a, b))
    for s in a:
        meta = parse_name(s.name)
        assert meta.size_class == size_class_of(s.mask)
        assert s.image.shape == (64, 64, 3) and s.image.dtype == np.uint8
        assert s.mask.any()
    assert len({s.meta.size_class for s in synth_dataset(40, seed=1)}) == 2


def test_synth_dataset_rejects_empty():
    with pytest.raises(ValueError):
        synth_dataset(0)
