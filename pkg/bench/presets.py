"""
bench/presets.py
Named environment configs and the desk / paper scale presets.
"""
import logging
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from env.config_parser import parse_config
from env.network import NetworkConfig
from parl.train import ParlHyper

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

NAMED_CONFIGS: Dict[str, str] = {
    "1s3r": "1s3r.cfg",
    "1s3r-high": "1s3r_high.cfg",
    "1s10r": "1s10r.cfg",
    "1s20r": "1s20r.cfg",
    "1s2w3r": "1s2w3r.cfg",
    "1s2w3r-ds": "1s2w3r_ds.cfg",
    "1sinf2w3r": "1sinf2w3r.cfg",
    "1sinf1r-backorder": "1sinf1r_backorder.cfg",
    "1s1r-smoke": "1s1r_smoke.cfg",
}

# the seven benchmark networks
BENCHMARK_CONFIGS = ("1s3r", "1s3r-high", "1s10r", "1s20r", "1s2w3r", "1s2w3r-ds", "1sinf2w3r")

PresetName = Literal["desk", "paper"]


class Preset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: PresetName
    # cap on every link's max order; None keeps the config's values
    max_order: Optional[int] = Field(None, ge=0)
    runs: int = Field(10, ge=1)
    episodes: int = Field(20, ge=1)
    steps: int = Field(256, ge=1)
    iterations: int = Field(10, ge=1)
    paths: int = Field(8, ge=1)
    train_steps: int = Field(256, ge=1)


PRESETS: Dict[str, Preset] = {
    "desk": Preset(name="desk", max_order=10, runs=5, episodes=4, steps=64, iterations=5, paths=4, train_steps=64),
    "paper": Preset(name="paper"),
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name}; choose from {sorted(PRESETS)}")
    preset = PRESETS[name]
    if name == "paper":
        logger.warning("Preset 'paper' uses full benchmark sizes; PARL training runs for hours to days "
                       "with the built-in solver")
    return preset


def resolve_config_path(name_or_path: Union[str, Path]) -> Path:
    key = str(name_or_path)
    if key in NAMED_CONFIGS:
        return CONFIG_DIR / NAMED_CONFIGS[key]
    path = Path(key)
    if not path.exists():
        raise FileNotFoundError(f"no config named {key}; known names: {', '.join(NAMED_CONFIGS)}")
    return path


def load_named(name_or_path: Union[str, Path]) -> Tuple[NetworkConfig, str]:
    """(config, source text) for a named config or a config file path."""
    path = resolve_config_path(name_or_path)
    logger.info(f"Loading network config from {path}")
    text = path.read_text()
    return parse_config(text), text


def apply_preset(config: NetworkConfig, preset: Preset) -> NetworkConfig:
    """Cap link max orders at the preset's limit."""
    if preset.max_order is None:
        return config
    links = tuple(
        link.model_copy(update={
            "max_order": min(link.max_order, preset.max_order),
            "min_order": min(link.min_order, preset.max_order),
        })
        for link in config.links
    )
    return config.model_copy(update={"links": links})


def preset_hyper(preset: Preset, **overrides) -> ParlHyper:
    base = {"iterations": preset.iterations, "paths": preset.paths, "steps": preset.train_steps}
    base.update(overrides)
    return ParlHyper(**base)
