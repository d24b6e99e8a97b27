"""
valuenet/serialization.py
Text checkpoint format for ReLUNet.

    parl-relu-net v1
    dims <input> <hidden_1> ... <hidden_K>
    scale <hex floats>
    W1 <hex floats, row-major>
    b1 <hex floats>
    ...
    c <hex floats>

Floats are written with float.hex so a reload is bit-exact.
"""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from env.errors import NetworkShapeError
from valuenet.relu_net import ReLUNet

logger = logging.getLogger(__name__)

HEADER = "parl-relu-net v1"


def _row(tag: str, values: np.ndarray) -> str:
    return " ".join([tag] + [float(v).hex() for v in np.asarray(values, dtype=float).ravel()])


def dumps(net: ReLUNet) -> str:
    lines = [HEADER, " ".join(["dims", str(net.input_dim)] + [str(d) for d in net.hidden_dims])]
    lines.append(_row("scale", net.scale))
    for k, (w, b) in enumerate(zip(net.weights, net.biases), start=1):
        lines.append(_row(f"W{k}", w))
        lines.append(_row(f"b{k}", b))
    lines.append(_row("c", net.c))
    return "\n".join(lines) + "\n"


def _floats(line: str, tag: str, count: int) -> np.ndarray:
    parts = line.split()
    if not parts or parts[0] != tag:
        raise NetworkShapeError(f"expected '{tag}' row, got '{parts[0] if parts else ''}'")
    if len(parts) - 1 != count:
        raise NetworkShapeError(f"row {tag} has {len(parts) - 1} values, expected {count}")
    return np.array([float.fromhex(p) for p in parts[1:]], dtype=float)


def loads(text: str) -> ReLUNet:
    lines: List[str] = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != HEADER:
        raise NetworkShapeError(f"not a '{HEADER}' document")
    dims_row = lines[1].split()
    if dims_row[0] != "dims" or len(dims_row) < 2:
        raise NetworkShapeError("missing dims row")
    dims = [int(d) for d in dims_row[1:]]
    expected_rows = 3 + 2 * (len(dims) - 1) + 1
    if len(lines) != expected_rows:
        raise NetworkShapeError(f"expected {expected_rows} rows, got {len(lines)}")

    scale = _floats(lines[2], "scale", dims[0])
    weights, biases = [], []
    row = 3
    for k in range(1, len(dims)):
        w = _floats(lines[row], f"W{k}", dims[k] * dims[k - 1]).reshape(dims[k], dims[k - 1])
        b = _floats(lines[row + 1], f"b{k}", dims[k])
        weights.append(w)
        biases.append(b)
        row += 2
    c = _floats(lines[row], "c", dims[-1])
    return ReLUNet(weights, biases, c, scale)


def save_net(net: ReLUNet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(net))
    logger.debug(f"Saved critic to {path}")
    return path


def load_net(path: Union[str, Path]) -> ReLUNet:
    return loads(Path(path).read_text())
