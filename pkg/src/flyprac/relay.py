"""Intermediate node: buffer a dependent group, repair it, recode and forward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import CodedPacket, GenerationConfig, recode
from .recovery import PacketBuffers, RecoveryConfig, recover_group

RECODE = "recode-on-valid"
STORE_AND_FORWARD = "store-and-forward"


@dataclass(frozen=True)
class RelayConfig:
    recovery_enabled: bool = True
    recoding_enabled: bool = True
    forward_policy: str = RECODE
    recovery: RecoveryConfig = RecoveryConfig()

    def __post_init__(self):
        if self.forward_policy not in (RECODE, STORE_AND_FORWARD):
            raise ValueError(f"unknown forward policy {self.forward_policy!r}")
        if self.forward_policy == RECODE and not self.recoding_enabled:
            raise ValueError("recode-on-valid needs recoding enabled")


@dataclass
class RelayStats:
    received: int = 0
    corrupted: int = 0
    recovered: int = 0
    forwarded: int = 0


class Relay:
    """Sequential relay state machine for one generation."""

    def __init__(self, gen: GenerationConfig, cfg: RelayConfig, rng: np.random.Generator):
        self.gen = gen
        self.cfg = cfg
        self.rng = rng
        self.buffers = PacketBuffers()
        self.group: list[CodedPacket] = []
        self.group_id: int | None = None
        self.stats = RelayStats()
        self.on_recovered = None  # optional observer called with each repaired packet

    def _recode(self) -> CodedPacket:
        return recode(self.buffers.valid, self.rng, self.gen.field, crc=self.gen.crc)

    def on_receive(self, packet: CodedPacket) -> list[CodedPacket]:
        self.stats.received += 1
        ok = packet.outer_ok(self.gen.crc)
        if not ok:
            self.stats.corrupted += 1
        if self.cfg.forward_policy == STORE_AND_FORWARD:
            self.stats.forwarded += 1
            return [packet]
        out = []
        if self.group_id is not None and packet.group_id != self.group_id:
            out.extend(self._close_group())
        self.group_id = packet.group_id
        self.group.append(packet)
        if ok:
            self.buffers.valid.append(packet)
            out.append(self._recode())
        else:
            self.buffers.invalid.append(packet)
        if len(self.group) >= self.gen.group_size:
            out.extend(self._close_group())
        self.stats.forwarded += len(out)
        return out

    def _close_group(self) -> list[CodedPacket]:
        out = []
        if self.cfg.recovery_enabled and self.buffers.invalid and self.gen.R is not None:
            recovered = recover_group(self.group, self.buffers, self.cfg.recovery,
                                      self.gen.field, self.gen.crc)
            self.stats.recovered += len(recovered)
            for p in recovered:
                if self.on_recovered is not None:
                    self.on_recovered(p)
                out.append(self._recode())
        self.buffers.clear()
        self.group = []
        self.group_id = None
        return out
