import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given
from hypothesis import strategies as st

from gateleak.leakmodels import (SBOX, BiasSpec, ByteStream, LeakageVector, TargetSpec, VectorMeta,
                                 aes_encrypt, aes_intermediates, gen_nonspecific_groups, gen_random_vectors,
                                 gf_mul, hamming_weight, interleave, inv_mix_columns, invert_to_plaintext,
                                 key_expansion, load_metadata, mix_columns, plaintexts_keys, save_metadata,
                                 specific_model)

FIPS_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
FIPS_KEY = bytes(range(16))
FIPS_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")


def _reference(pt: bytes, key: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(pt) + enc.finalize()


def test_fips_known_answer():
    ct = aes_encrypt(np.frombuffer(FIPS_PT, np.uint8), np.frombuffer(FIPS_KEY, np.uint8))
    assert bytes(ct[0]) == FIPS_CT


def test_sbox_entries():
    assert SBOX[0x00] == 0x63
    assert SBOX[0x53] == 0xED
    assert sorted(SBOX.tolist()) == list(range(256))


def test_gf_mul():
    assert gf_mul(0x57, 0x83) == 0xC1
    assert gf_mul(0x57, 0x13) == 0xFE


def test_zero_key_zero_plaintext_round0_is_zero():
    iv = aes_intermediates(np.zeros(16, np.uint8), np.zeros(16, np.uint8))
    assert not iv.state(0).any()


def test_key_expansion_last_round_key():
    rk = key_expansion(np.frombuffer(bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c"), np.uint8)[None])
    assert bytes(rk[0, 10]).hex() == "d014f9a8c9ee2589e13f0cc8b6630ca6"


def test_matches_independent_implementation_on_1000_vectors():
    metas = gen_random_vectors(1000, "random", 17)
    pts, keys = plaintexts_keys(metas)
    ct = aes_encrypt(pts, keys)
    for m, c in zip(metas, ct):
        assert bytes(c) == _reference(m.plaintext, m.key)


@given(st.binary(min_size=16, max_size=16))
def test_inverse_mix_columns(data):
    s = np.frombuffer(data, np.uint8)[None]
    assert np.array_equal(inv_mix_columns(mix_columns(s)), s)


def test_hamming_weight():
    assert hamming_weight(np.array([0x00, 0xFF, 0x0F])).tolist() == [0, 8, 4]
    assert hamming_weight(np.array([[0xFF, 0x01]])).tolist() == [9]


@given(st.integers(0, 255))
def test_hamming_distance_to_self_is_zero(a):
    assert hamming_weight(np.array([a ^ a]))[0] == 0


def test_sbox_hw_model_mean_near_four():
    metas = gen_random_vectors(1024, "fixed", 0)
    lv = specific_model(metas, TargetSpec())
    assert lv.values.min() >= 0 and lv.values.max() <= 8
    assert np.all(lv.values == np.round(lv.values))
    assert abs(lv.values.mean() - 4) < 0.25


def test_model_variants():
    metas = gen_random_vectors(64, "fixed", 2)
    pts, keys = plaintexts_keys(metas)
    iv = aes_intermediates(pts, keys)
    bit = specific_model(metas, TargetSpec("round_input", 0, 3, "bit", bit=5)).values
    assert bit.tolist() == ((pts[:, 3] >> 5) & 1).tolist()
    hd = specific_model(metas, TargetSpec("state", 2, 0, "hamming_distance")).values
    assert hd.tolist() == hamming_weight(iv.state(1)[:, 0] ^ iv.state(2)[:, 0]).tolist()
    whole = specific_model(metas, TargetSpec("state", 1, None)).values
    assert whole.tolist() == hamming_weight(iv.state(1)).tolist()
    xk = specific_model(metas, TargetSpec("round_input", 1, 0)).values
    assert xk.tolist() == hamming_weight(pts[:, 0] ^ keys[:, 0]).tolist()


def test_target_spec_validation():
    with pytest.raises(ValueError):
        TargetSpec(round=11)
    with pytest.raises(ValueError):
        TargetSpec(intermediate="mix")
    with pytest.raises(ValueError):
        TargetSpec(model="bit", byte_index=None)
    with pytest.raises(ValueError):
        TargetSpec(algorithm="DES")


def test_random_vectors_are_seeded():
    a = gen_random_vectors(10, "random", 3)
    b = gen_random_vectors(10, "random", 3)
    c = gen_random_vectors(10, "random", 4)
    assert a == b and a != c
    fixed = gen_random_vectors(10, "fixed", 3)
    assert len({m.key for m in fixed}) == 1
    assert len({m.plaintext for m in fixed}) == 10


def test_zero_vectors_rejected():
    with pytest.raises(ValueError):
        gen_random_vectors(0)
    with pytest.raises(ValueError):
        gen_nonspecific_groups(0, BiasSpec())


def test_byte_stream_is_reproducible():
    assert ByteStream(9).bytes(33).tolist() == ByteStream(9).bytes(33).tolist()
    p = ByteStream(1).permutation(50)
    assert sorted(p.tolist()) == list(range(50))
    u = ByteStream(2).uniform(1000)
    assert u.min() >= 0 and u.max() < 1


@pytest.mark.parametrize("bias", [BiasSpec(), BiasSpec(6, (0,)), BiasSpec(3, (1, 7), 0xA5), BiasSpec(10, (15,), 1)])
def test_biased_group_round_trips(bias):
    g1, g2, labels = gen_nonspecific_groups(64, bias, 5)
    pts, keys = plaintexts_keys(g2)
    state = aes_intermediates(pts, keys).state(bias.biased_round)
    assert np.all(state[:, list(bias.biased_bytes)] == bias.biased_value)
    assert labels.kind == "nonspecific"
    ordered = interleave(g1, g2)
    assert [m.vector_id for m in ordered] == list(range(128))
    assert [m.group_label for m in ordered] == labels.values.astype(int).tolist()


def test_random_group_is_unbiased():
    g1, _, _ = gen_nonspecific_groups(512, BiasSpec(6, (0,)), 1)
    pts, keys = plaintexts_keys(g1)
    state = aes_intermediates(pts, keys).state(6)
    assert np.mean(state[:, 0] == 0) < 0.02


def test_invert_to_plaintext_round_zero():
    keys = np.arange(32, dtype=np.uint8).reshape(2, 16)
    s = np.full((2, 16), 7, np.uint8)
    pt = invert_to_plaintext(s, 0, key_expansion(keys))
    assert np.array_equal(pt, s ^ keys)


def test_leakage_vector_labels():
    with pytest.raises(ValueError):
        LeakageVector([0.0, 1.0], "nonspecific")
    assert len(LeakageVector([1, -1], "nonspecific")) == 2


def test_metadata_round_trip(tmp_path):
    metas = gen_random_vectors(5, "random", 0) + [VectorMeta(5, bytes(16), bytes(16), 1)]
    save_metadata(metas, tmp_path / "v.jsonl")
    assert load_metadata(tmp_path / "v.jsonl") == metas
