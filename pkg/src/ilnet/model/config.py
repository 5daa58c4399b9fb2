"""Model configuration and the three channel presets (S, M, L)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

Triple = Tuple[int, int, int]

STAGE_NAMES = (
    "encoder0", "encoder1", "encoder2", "encoder3", "encoder4",
    "decoder4", "decoder3", "decoder2", "decoder1", "decoder0", "decoderO",
)

# (input, intermediate, output) channels per stage, in STAGE_NAMES order.
PRESETS: Dict[str, List[Triple]] = {
    "L": [
        (3, 16, 64), (64, 16, 64), (64, 32, 64), (64, 32, 128), (128, 32, 128),
        (128, 64, 128), (256, 64, 128), (256, 32, 64), (128, 32, 64), (128, 16, 64), (128, 16, 64),
    ],
    "M": [
        (3, 16, 64), (64, 16, 64), (64, 16, 64), (64, 16, 64), (64, 16, 64),
        (64, 16, 64), (128, 16, 64), (128, 16, 64), (128, 16, 64), (128, 16, 64), (128, 16, 64),
    ],
    "S": [
        (3, 4, 8), (8, 4, 8), (8, 4, 8), (8, 4, 8), (8, 4, 8),
        (8, 4, 8), (16, 4, 8), (16, 4, 8), (16, 4, 8), (16, 4, 8), (16, 4, 8),
    ],
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    name: str = "S"
    stage_channels: Tuple[Triple, ...] = field(default_factory=lambda: tuple(PRESETS["S"]))
    n: int = 2
    b: int = 2
    t: float = 1.0
    num_ipof_stages: int = 5
    use_rb: bool = True
    input_size: Tuple[int, int] = (64, 64)
    seed: int = 0

    def __post_init__(self):
        validate(self)

    @classmethod
    def preset(cls, name: str, **kw) -> "ModelConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        return cls(name=name, stage_channels=tuple(PRESETS[name]), **kw)

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)

    def triple(self, stage: str) -> Triple:
        return self.stage_channels[STAGE_NAMES.index(stage)]


def validate(cfg: ModelConfig) -> None:
    ch = cfg.stage_channels
    if len(ch) != 11 or any(len(t) != 3 or min(t) < 1 for t in ch):
        raise ConfigError("stage_channels needs exactly 11 positive (Cin, Cmid, Cout) triples")
    enc = ch[:5]
    dec = ch[5:]  # decoder4 .. decoder0, decoderO
    if enc[0][0] != 3:
        raise ConfigError("encoder0 must take 3 input channels")
    for i in range(1, 5):
        if enc[i][0] != enc[i - 1][2]:
            raise ConfigError(f"encoder{i} Cin {enc[i][0]} != encoder{i-1} Cout {enc[i-1][2]}")
    if dec[0][0] != enc[4][2]:
        raise ConfigError(f"decoder4 Cin {dec[0][0]} != encoder4 Cout {enc[4][2]}")
    # the decoder after stage k concatenates the up-sampled deeper decoder with (fused) E_k
    for j in range(1, 6):
        k = 5 - j
        if dec[j - 1][2] != enc[k][2]:
            raise ConfigError(f"{STAGE_NAMES[4 + j]} Cout {dec[j-1][2]} != encoder{k} Cout {enc[k][2]}; cannot fuse")
        want = dec[j - 1][2] + enc[k][2]
        if dec[j][0] != want:
            raise ConfigError(f"{STAGE_NAMES[5 + j]} Cin {dec[j][0]} != {want} (concatenated channels)")
    if cfg.n < 1 or cfg.b < 1:
        raise ConfigError("n and b must be positive integers")
    if not cfg.t > 0:
        raise ConfigError("t must be positive")
    if not 0 <= cfg.num_ipof_stages <= 5:
        raise ConfigError("num_ipof_stages must be in 0..5")
    h, w = cfg.input_size
    if h < 32 or w < 32 or h % 16 or w % 16:
        raise ConfigError(f"input_size {cfg.input_size} must be multiples of 16 and at least 32")


def parse_triples(text: str) -> Tuple[Triple, ...]:
    nums = [int(v) for v in text.replace("(", " ").replace(")", " ").replace(",", " ").split()]
    if len(nums) != 33:
        raise ConfigError("stage_channels override needs 11 comma-separated triples")
    return tuple(tuple(nums[i : i + 3]) for i in range(0, 33, 3))
