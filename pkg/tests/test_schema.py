import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stvqa import schema
from stvqa.errors import AssemblyError, SchemaError
from stvqa.schema import (
    BLOCK_NAMES,
    BLOCK_SIZES,
    FEATURE_NAMES,
    FeatureVector,
    assemble,
    block_range,
    feature_number,
)

RANGES = {
    "chroma": (1, 8),
    "chroma_sigma": (9, 16),
    "gradient": (17, 48),
    "luma_sigma": (49, 56),
    "std_chroma": (57, 64),
    "std_gradient": (73, 104),
    "std_luma_sigma": (105, 112),
    "niqe": (113, 149),
    "stchip": (150, 185),
    "stgradchip": (186, 221),
}


def random_blocks(rng):
    return {name: rng.standard_normal(BLOCK_SIZES[name]) for name in BLOCK_NAMES}


def test_block_sizes():
    sizes = [BLOCK_SIZES[n] for n in BLOCK_NAMES]
    assert sizes == [8, 8, 32, 8, 8, 8, 32, 8, 37, 36, 36]
    assert len(FEATURE_NAMES) == len(set(FEATURE_NAMES)) == 221


@pytest.mark.parametrize("name,rng_", sorted(RANGES.items()))
def test_block_ranges(name, rng_):
    assert block_range(name) == rng_


def test_named_feature_numbers():
    assert feature_number("stchip_ggd_shape_s1") == 150
    assert feature_number("chroma_ggd_shape_s1") == 1
    assert feature_number("niqe_score") == 149
    assert feature_number("stgradchip_d2_sigr2_s2") == 221
    assert FEATURE_NAMES[feature_number("grad_h_nu_s1") - 1] == "grad_h_nu_s1"


@settings(max_examples=20, deadline=None)
@given(st.permutations(list(BLOCK_NAMES)), st.integers(0, 2**20))
def test_assemble_order_independent(order, seed):
    blocks = random_blocks(np.random.default_rng(seed))
    canon = assemble(blocks).values
    shuffled = assemble({k: blocks[k] for k in order}).values
    assert np.array_equal(canon, shuffled)
    start, stop = block_range("niqe")
    assert np.array_equal(canon[start - 1 : stop], blocks["niqe"])


def test_assemble_errors(rng):
    blocks = random_blocks(rng)
    del blocks["stchip"]
    with pytest.raises(AssemblyError, match="stchip"):
        assemble(blocks)
    blocks = random_blocks(rng)
    blocks["chroma"] = np.zeros(7)
    with pytest.raises(AssemblyError, match="chroma"):
        assemble(blocks)
    blocks = random_blocks(rng)
    blocks["luma_sigma"][2] = np.nan
    with pytest.raises(AssemblyError, match="luma_sigma_skew_s1"):
        assemble(blocks)


def test_wrong_length_vector():
    with pytest.raises(SchemaError):
        FeatureVector(np.zeros(220))
    with pytest.raises(SchemaError):
        FeatureVector.from_json_obj({"video_id": "x"})


def test_csv_json_round_trip_bit_exact(tmp_path, rng):
    vecs = [FeatureVector(rng.standard_normal(221) * 10.0 ** rng.integers(-8, 8, 221), f"v{i}") for i in range(3)]
    vecs[0].values[0] = 1 / 3
    schema.write_csv(tmp_path / "f.csv", vecs)
    schema.write_json(tmp_path / "f.json", vecs)
    schema.write_json(tmp_path / "one.json", vecs[1])
    for back in (schema.read_csv(tmp_path / "f.csv"), schema.read_json(tmp_path / "f.json")):
        assert [b.video_id for b in back] == ["v0", "v1", "v2"]
        for a, b in zip(vecs, back):
            assert np.array_equal(a.values, b.values)
    assert np.array_equal(schema.read_features(tmp_path / "one.json")[0].values, vecs[1].values)
    assert len(schema.read_features([tmp_path / "f.csv", tmp_path / "f.json"])) == 6


def test_csv_header_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("video_id,a,b\nx,1,2\n")
    with pytest.raises(SchemaError):
        schema.read_csv(p)


def test_feature_lookup_by_name(rng):
    v = FeatureVector(np.arange(221.0))
    assert v["stchip_ggd_shape_s1"] == 149.0
    assert list(v.as_dict())[:2] == ["chroma_ggd_shape_s1", "chroma_ggd_scale_s1"]
