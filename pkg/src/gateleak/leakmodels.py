"""AES-128 reference, intermediate values, and leakage models.

State bytes follow the usual column-major order: byte ``i`` sits in row
``i % 4`` and column ``i // 4``. ``states[0]`` is the plaintext after the
initial AddRoundKey and ``states[r]`` the output of round ``r``.

Random campaigns draw from numpy's PCG64 bit generator through
``random_raw`` only, so a seed maps to the same vectors on every platform
and numpy version.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


# ---------------------------------------------------------------------------
# GF(2^8) and the S-box

def xtime(a):
    a = np.asarray(a, dtype=np.uint16)
    return (((a << 1) ^ np.where(a & 0x80, 0x1B, 0)) & 0xFF).astype(np.uint8)


def gf_mul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a = int(xtime(a))
        b >>= 1
    return r


def _build_sbox() -> np.ndarray:
    inv = [0] * 256
    for a in range(1, 256):
        for b in range(1, 256):
            if gf_mul(a, b) == 1:
                inv[a] = b
                break
    sbox = np.zeros(256, np.uint8)
    for x in range(256):
        b = inv[x]
        s = b
        for k in range(1, 5):
            s ^= ((b << k) | (b >> (8 - k))) & 0xFF
        sbox[x] = s ^ 0x63
    return sbox


SBOX = _build_sbox()
INV_SBOX = np.argsort(SBOX).astype(np.uint8)
RCON = np.array([0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36], np.uint8)
HW8 = np.array([bin(i).count("1") for i in range(256)], np.uint8)

SHIFT_ROWS = np.array([(i % 4) + 4 * (((i // 4) + (i % 4)) % 4) for i in range(16)])
INV_SHIFT_ROWS = np.argsort(SHIFT_ROWS)


def key_expansion(keys) -> np.ndarray:
    """Round keys, shape (N, 11, 16), for keys of shape (N, 16) or (16,)."""
    keys = np.atleast_2d(np.asarray(keys, dtype=np.uint8))
    n = keys.shape[0]
    w = np.zeros((n, 44, 4), np.uint8)
    w[:, :4] = keys.reshape(n, 4, 4)
    for i in range(4, 44):
        t = w[:, i - 1].copy()
        if i % 4 == 0:
            t = SBOX[np.roll(t, -1, axis=1)]
            t[:, 0] ^= RCON[i // 4 - 1]
        w[:, i] = w[:, i - 4] ^ t
    return w.reshape(n, 11, 16)


def sub_bytes(s):
    return SBOX[s]


def shift_rows(s):
    return s[..., SHIFT_ROWS]


def mix_columns(s):
    c = s.reshape(*s.shape[:-1], 4, 4)
    a0, a1, a2, a3 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    t = a0 ^ a1 ^ a2 ^ a3
    out = np.stack([a0 ^ t ^ xtime(a0 ^ a1), a1 ^ t ^ xtime(a1 ^ a2),
                    a2 ^ t ^ xtime(a2 ^ a3), a3 ^ t ^ xtime(a3 ^ a0)], axis=-1)
    return out.reshape(s.shape)


def inv_mix_columns(s):
    # InvMixColumns = MixColumns applied after a cheap pre-step
    c = s.reshape(*s.shape[:-1], 4, 4).copy()
    u = xtime(xtime(c[..., 0] ^ c[..., 2]))
    v = xtime(xtime(c[..., 1] ^ c[..., 3]))
    c[..., 0] ^= u
    c[..., 1] ^= v
    c[..., 2] ^= u
    c[..., 3] ^= v
    return mix_columns(c.reshape(s.shape))


@dataclass
class AesIntermediates:
    """Batch of AES-128 encryptions; leading axis is the vector index."""

    plaintext: np.ndarray   # (N, 16)
    round_keys: np.ndarray  # (N, 11, 16)
    states: np.ndarray      # (N, 11, 16)
    sbox_outputs: np.ndarray  # (N, 10, 16), row r-1 holds round r

    @property
    def ciphertext(self) -> np.ndarray:
        return self.states[:, 10]

    def sbox_out(self, rnd: int) -> np.ndarray:
        if not 1 <= rnd <= 10:
            raise ValueError(f"sbox_out round {rnd} outside [1, 10]")
        return self.sbox_outputs[:, rnd - 1]

    def state(self, rnd: int) -> np.ndarray:
        if not 0 <= rnd <= 10:
            raise ValueError(f"state round {rnd} outside [0, 10]")
        return self.states[:, rnd]

    def round_input(self, rnd: int) -> np.ndarray:
        """Input of round ``rnd``; round 0 is the raw plaintext."""
        if not 0 <= rnd <= 10:
            raise ValueError(f"round_input round {rnd} outside [0, 10]")
        return self.plaintext if rnd == 0 else self.states[:, rnd - 1]


def aes_intermediates(plaintext, key) -> AesIntermediates:
    pt = np.atleast_2d(np.asarray(plaintext, dtype=np.uint8))
    keys = np.atleast_2d(np.asarray(key, dtype=np.uint8))
    if keys.shape[0] == 1 and pt.shape[0] > 1:
        keys = np.repeat(keys, pt.shape[0], axis=0)
    if pt.shape != keys.shape or pt.shape[1] != 16:
        raise ValueError("plaintext and key must be 16-byte arrays with matching batch size")
    rk = key_expansion(keys)
    n = pt.shape[0]
    states = np.zeros((n, 11, 16), np.uint8)
    sbo = np.zeros((n, 10, 16), np.uint8)
    s = pt ^ rk[:, 0]
    states[:, 0] = s
    for r in range(1, 11):
        s = SBOX[s]
        sbo[:, r - 1] = s
        s = shift_rows(s)
        if r < 10:
            s = mix_columns(s)
        s = s ^ rk[:, r]
        states[:, r] = s
    return AesIntermediates(pt, rk, states, sbo)


def aes_encrypt(plaintext, key) -> np.ndarray:
    return aes_intermediates(plaintext, key).ciphertext


def invert_to_plaintext(state, rnd: int, round_keys) -> np.ndarray:
    """Plaintexts whose encryption reaches ``state`` as the output of round ``rnd``."""
    s = np.atleast_2d(np.asarray(state, dtype=np.uint8)).copy()
    rk = np.asarray(round_keys, dtype=np.uint8)
    if not 0 <= rnd <= 10:
        raise ValueError("round outside [0, 10]")
    for r in range(rnd, 0, -1):
        s = s ^ rk[:, r]
        if r < 10:
            s = inv_mix_columns(s)
        s = INV_SBOX[s[..., INV_SHIFT_ROWS]]
    return s ^ rk[:, 0]


# ---------------------------------------------------------------------------
# Random campaigns

class ByteStream:
    """Seeded byte source built on PCG64 raw 64-bit outputs (little-endian)."""

    def __init__(self, seed: int):
        self._bg = np.random.PCG64(seed)

    def bytes(self, n: int) -> np.ndarray:
        words = self._bg.random_raw((n + 7) // 8).astype("<u8")
        return np.frombuffer(words.tobytes(), np.uint8)[:n].copy()

    def uniform(self, n: int) -> np.ndarray:
        """Floats in [0, 1) from the top 53 bits of each raw word."""
        return (self._bg.random_raw(n) >> np.uint64(11)).astype(np.float64) / float(1 << 53)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")


@dataclass
class VectorMeta:
    vector_id: int
    plaintext: bytes
    key: bytes
    group_label: int | None = None

    def to_json(self) -> str:
        d = {"vector_id": self.vector_id, "plaintext_hex": self.plaintext.hex(), "key_hex": self.key.hex()}
        if self.group_label is not None:
            d["group_label"] = self.group_label
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "VectorMeta":
        d = json.loads(line)
        return cls(int(d["vector_id"]), bytes.fromhex(d["plaintext_hex"]), bytes.fromhex(d["key_hex"]),
                   d.get("group_label"))


def save_metadata(metas: Iterable[VectorMeta], path) -> None:
    with open(path, "w") as fh:
        for m in metas:
            fh.write(m.to_json() + "\n")


def load_metadata(path) -> list[VectorMeta]:
    with open(path) as fh:
        return [VectorMeta.from_json(line) for line in fh if line.strip()]


def plaintexts_keys(metas: Sequence[VectorMeta]) -> tuple[np.ndarray, np.ndarray]:
    pts = np.frombuffer(b"".join(m.plaintext for m in metas), np.uint8).reshape(-1, 16)
    keys = np.frombuffer(b"".join(m.key for m in metas), np.uint8).reshape(-1, 16)
    return pts, keys


def gen_random_vectors(n: int, key_policy: str = "fixed", seed: int = 0,
                       key: bytes | None = None) -> list[VectorMeta]:
    """``n`` vectors with i.i.d. uniform plaintexts; one shared key or a fresh key each."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if key_policy not in ("fixed", "random"):
        raise ValueError("key_policy must be 'fixed' or 'random'")
    rng = ByteStream(seed)
    fixed = key if key is not None else bytes(rng.bytes(16))
    out = []
    for i in range(n):
        pt = bytes(rng.bytes(16))
        k = fixed if key_policy == "fixed" else bytes(rng.bytes(16))
        out.append(VectorMeta(i, pt, k))
    return out


@dataclass(frozen=True)
class BiasSpec:
    biased_round: int = 6
    biased_bytes: tuple[int, ...] = tuple(range(16))
    biased_value: int = 0

    def __post_init__(self):
        if not self.biased_bytes:
            raise ValueError("biased_bytes must be nonempty")
        if not all(0 <= b < 16 for b in self.biased_bytes):
            raise ValueError("biased byte index outside [0, 15]")
        if not 0 <= self.biased_round <= 10:
            raise ValueError("biased_round outside [0, 10]")
        if not 0 <= self.biased_value <= 255:
            raise ValueError("biased_value must be a byte")


@dataclass
class LeakageVector:
    values: np.ndarray
    kind: str = "specific"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in ("specific", "nonspecific"):
            raise ValueError("kind must be 'specific' or 'nonspecific'")
        if self.kind == "nonspecific" and not np.all(np.isin(self.values, (-1.0, 1.0))):
            raise ValueError("non-specific labels must be -1 or +1")

    def __len__(self):
        return len(self.values)


def gen_nonspecific_groups(n_per_group: int, bias: BiasSpec, seed: int = 0
                           ) -> tuple[list[VectorMeta], list[VectorMeta], LeakageVector]:
    """Random group (label -1) and biased group (label +1), interleaved g1, g2, g1, ...

    Vector ids number the interleaved order; ``interleave(g1, g2)`` restores it.
    """
    if n_per_group < 1:
        raise ValueError("n_per_group must be >= 1")
    rng = ByteStream(seed)
    g1, g2 = [], []
    for i in range(n_per_group):
        g1.append(VectorMeta(2 * i, bytes(rng.bytes(16)), bytes(rng.bytes(16)), -1))
    keys = rng.bytes(16 * n_per_group).reshape(n_per_group, 16)
    states = rng.bytes(16 * n_per_group).reshape(n_per_group, 16)
    states[:, list(bias.biased_bytes)] = bias.biased_value
    pts = invert_to_plaintext(states, bias.biased_round, key_expansion(keys))
    for i in range(n_per_group):
        g2.append(VectorMeta(2 * i + 1, bytes(pts[i]), bytes(keys[i]), +1))
    labels = np.tile([-1.0, 1.0], n_per_group)
    return g1, g2, LeakageVector(labels, "nonspecific")


def interleave(g1: Sequence[VectorMeta], g2: Sequence[VectorMeta]) -> list[VectorMeta]:
    out = []
    for a, b in zip(g1, g2):
        out += [a, b]
    return out


# ---------------------------------------------------------------------------
# Specific models

INTERMEDIATES = ("sbox_out", "round_input", "state")
MODELS = ("hamming_weight", "hamming_distance", "bit")


@dataclass(frozen=True)
class TargetSpec:
    """Which AES intermediate leaks and how.

    ``byte_index`` None selects the whole 128-bit value. The ``bit`` model
    returns a single bit of the selected byte. ``from_intermediate`` is
    (intermediate, round, byte_index) for the distance model; it defaults to
    the same intermediate one round earlier.
    """

    intermediate: str = "sbox_out"
    round: int = 1
    byte_index: int | None = 0
    model: str = "hamming_weight"
    from_intermediate: tuple | None = None
    bit: int = 0
    algorithm: str = "AES-128"

    def __post_init__(self):
        if self.algorithm != "AES-128":
            raise ValueError("only AES-128 is supported")
        if self.intermediate not in INTERMEDIATES:
            raise ValueError(f"unknown intermediate {self.intermediate!r}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if not 0 <= self.round <= 10:
            raise ValueError(f"round {self.round} outside [0, 10]")
        if self.byte_index is not None and not 0 <= self.byte_index <= 15:
            raise ValueError(f"byte_index {self.byte_index} outside [0, 15]")
        if not 0 <= self.bit <= 7:
            raise ValueError("bit must be in [0, 7]")
        if self.model == "bit" and self.byte_index is None:
            raise ValueError("the bit model needs a byte_index")

    def source(self) -> tuple:
        if self.from_intermediate is not None:
            return tuple(self.from_intermediate)
        return (self.intermediate, self.round - 1, self.byte_index)


def _select(iv: AesIntermediates, intermediate: str, rnd: int, byte_index) -> np.ndarray:
    vals = getattr(iv, intermediate)(rnd)
    return vals if byte_index is None else vals[:, byte_index:byte_index + 1]


def hamming_weight(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint8)
    return HW8[v].reshape(v.shape[0], -1).sum(axis=1).astype(np.int64) if v.ndim > 1 else HW8[v].astype(np.int64)


def intermediate_values(metas: Sequence[VectorMeta], spec: TargetSpec) -> np.ndarray:
    pts, keys = plaintexts_keys(metas)
    return _select(aes_intermediates(pts, keys), spec.intermediate, spec.round, spec.byte_index)


def specific_model(metas: Sequence[VectorMeta], spec: TargetSpec) -> LeakageVector:
    if not metas:
        raise ValueError("no vectors")
    pts, keys = plaintexts_keys(metas)
    iv = aes_intermediates(pts, keys)
    cur = _select(iv, spec.intermediate, spec.round, spec.byte_index)
    if spec.model == "hamming_weight":
        vals = hamming_weight(cur)
    elif spec.model == "bit":
        vals = (cur[:, 0] >> spec.bit) & 1
    else:
        src, rnd, byte = spec.source()
        if src not in INTERMEDIATES:
            raise ValueError(f"unknown intermediate {src!r}")
        prev = _select(iv, src, rnd, byte)
        if prev.shape != cur.shape:
            raise ValueError("distance operands differ in width")
        vals = hamming_weight(prev ^ cur)
    return LeakageVector(vals.astype(np.float64), "specific")
