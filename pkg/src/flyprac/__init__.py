"""On-the-fly partial packet recovery for random linear and sparse network coding."""
from .codec import CodedPacket, Decoder, Encoder, GenerationConfig
from .galois import GF2, GF256, FieldSpec
from .harness import MetricsRow, ScenarioConfig, run

__all__ = ["CodedPacket", "Decoder", "Encoder", "GenerationConfig", "GF2", "GF256",
           "FieldSpec", "MetricsRow", "ScenarioConfig", "run"]
__version__ = "0.1.0"
