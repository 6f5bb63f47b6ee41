"""Binary symmetric channel over the protected region of serialized packets.

Noise streams use numpy's Philox (a counter-based 64-bit generator).  Each
stream is keyed by (master seed, trial index, link index), so trials can run
in any order or in parallel and still replay bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import CodedPacket, PacketLayout, deserialize, serialize


@dataclass(frozen=True)
class ChannelConfig:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon={self.epsilon} outside [0, 1]")


def make_rng(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def flip_positions(nbits: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Positions hit by i.i.d. Bernoulli(epsilon) flips over ``nbits`` bits.

    Drawing a Binomial count and then a uniform subset of that size has the
    same law as flipping each bit independently.
    """
    if epsilon <= 0.0 or nbits == 0:
        return np.zeros(0, dtype=np.int64)
    if epsilon >= 1.0:
        return np.arange(nbits, dtype=np.int64)
    k = int(rng.binomial(nbits, epsilon))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    return np.sort(rng.choice(nbits, size=k, replace=False))


def apply_flips(data: bytes, positions: np.ndarray, offset: int = 0) -> bytes:
    buf = np.frombuffer(data, dtype=np.uint8).copy()
    if positions.size:
        bitpos = positions + offset
        masks = (0x80 >> (bitpos % 8)).astype(np.uint8)
        np.bitwise_xor.at(buf, bitpos // 8, masks)
    return buf.tobytes()


class BinarySymmetricChannel:
    """One noisy link with its own RNG stream."""

    def __init__(self, epsilon: float, rng: np.random.Generator):
        ChannelConfig(epsilon)
        self.epsilon = epsilon
        self.rng = rng
        self.bits_sent = 0
        self.bits_flipped = 0

    def transmit(self, data: bytes, layout: PacketLayout) -> bytes:
        pos = flip_positions(layout.protected_bits, self.epsilon, self.rng)
        self.bits_sent += layout.protected_bits
        self.bits_flipped += pos.size
        return apply_flips(data, pos, layout.protected_offset)

    def send(self, packet: CodedPacket, layout: PacketLayout) -> CodedPacket:
        """Serialize, corrupt the protected region, and parse the result."""
        pos = flip_positions(layout.protected_bits, self.epsilon, self.rng)
        self.bits_sent += layout.protected_bits
        self.bits_flipped += pos.size
        if pos.size == 0:
            return packet.copy()
        raw = apply_flips(serialize(packet), pos, layout.protected_offset)
        return deserialize(raw, layout, packet.seq)


def transmit(data: bytes, layout: PacketLayout, cfg: ChannelConfig) -> bytes:
    """Stateless form: the flip pattern depends only on (data length, cfg.seed)."""
    return BinarySymmetricChannel(cfg.epsilon, make_rng(cfg.seed)).transmit(data, layout)
