"""
store.py - Run directory utilities.
Uses PARL_RUNS_DIR from .env as the root for every run's artifacts
(config snapshot, critic checkpoints, CSV reports, JSON documents).
"""
import os
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd
from dotenv import load_dotenv

from valuenet.relu_net import ReLUNet
from valuenet.serialization import load_net, save_net

load_dotenv(override=True)

logger = logging.getLogger(__name__)

RUNS_DIR = os.environ.get("PARL_RUNS_DIR", "runs")

PathLike = Union[str, Path]


def get_run_dir(name: str, root: Optional[PathLike] = None) -> Path:
    run_dir = Path(root if root is not None else RUNS_DIR) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def save_config_text(run_dir: PathLike, text: str, filename: str = "config.cfg") -> Path:
    path = Path(run_dir) / filename
    path.write_text(text)
    return path


def checkpoint_path(run_dir: PathLike, iteration: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"critic_{iteration:03d}.txt"


def save_checkpoint(run_dir: PathLike, net: ReLUNet, iteration: int) -> Path:
    path = checkpoint_path(run_dir, iteration)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_net(net, path)
    logger.info(f"Saved critic checkpoint {path}")
    return path


def load_checkpoint(run_dir: PathLike, iteration: Optional[int] = None) -> ReLUNet:
    """Given iteration, or the latest one when omitted."""
    if iteration is not None:
        return load_net(checkpoint_path(run_dir, iteration))
    found = sorted((Path(run_dir) / "checkpoints").glob("critic_*.txt"))
    if not found:
        raise FileNotFoundError(f"no critic checkpoints under {run_dir}")
    return load_net(found[-1])


def save_frame(run_dir: PathLike, name: str, frame: pd.DataFrame) -> Path:
    path = Path(run_dir) / f"{name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def load_frame(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def save_json(run_dir: PathLike, name: str, doc: Dict) -> Path:
    path = Path(run_dir) / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def append_jsonl(path: PathLike, records: Iterable[Dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def read_jsonl(path: PathLike) -> List[Dict]:
    with Path(path).open() as f:
        return [json.loads(line) for line in f if line.strip()]
