"""
env/config_parser.py
Parser for network configuration documents.

Document grammar (INI-like, one key = value per line, '#' or ';' comments):

    [network]                   name, initial_inventory, gamma
    [node.<id>]                 one node
    [link.<from>.<to>]          one link
    [nodes.<label>]             ids = A, B, C   plus keys applied to every id
    [links.<label>]             pairs = S>A, S>B plus keys applied to every pair

Inside group sections a bracketed list value ([1, 2, 4]) is repeated cyclically
over the members, so lead_time = [1,2,3] over ten links gives 1,2,3,1,2,3,1,2,3,1.
"""
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from env.distributions import parse_distribution
from env.errors import ConfigError
from env.network import LinkSpec, NetworkConfig, NodeSpec

logger = logging.getLogger(__name__)

NODE_KEYS = {
    "kind", "holding_cost", "capacity", "spillage_cost", "price", "demand", "production",
    "demand_type", "backorder_cost", "infinite_supply", "initial_inventory",
}
LINK_KEYS = {"lead_time", "fixed_cost", "variable_cost", "max_order", "min_order", "initial_inventory"}
NETWORK_KEYS = {"name", "initial_inventory", "gamma"}
DIST_KEYS = {"demand", "production", "initial_inventory"}
INT_KEYS = {"lead_time", "max_order", "min_order"}

_SECTION_RE = re.compile(r"^\[\s*([^\]]+?)\s*\]$")
_ID_RE = re.compile(r"^[A-Za-z0-9_\-]+$")

# value plus the line it was read from
Entry = Tuple[str, int]


def _split_top_level(text: str) -> List[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    return parts


def _convert(key: str, raw: str, line: int):
    raw = raw.strip()
    if key in DIST_KEYS:
        return parse_distribution(raw, line)
    if key in ("kind", "demand_type", "name"):
        return raw
    if key == "infinite_supply":
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected boolean for {key}, got '{raw}'", line)
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected number for {key}, got '{raw}'", line)
    if key in INT_KEYS:
        if not value.is_integer():
            raise ConfigError(f"{key} must be an integer, got '{raw}'", line)
        return int(value)
    if math.isnan(value):
        raise ConfigError(f"{key} must not be NaN", line)
    return value


def _expand(raw: str, count: int, line: int) -> List[str]:
    raw = raw.strip()
    if raw.startswith("["):
        if not raw.endswith("]"):
            raise ConfigError(f"unterminated list '{raw}'", line)
        items = _split_top_level(raw[1:-1])
        if not items:
            raise ConfigError("empty parameter list", line)
        return [items[k % len(items)] for k in range(count)]
    return [raw] * count


class _Section:
    def __init__(self, header: str, line: int):
        self.header = header
        self.line = line
        self.entries: Dict[str, Entry] = {}


def _read_sections(text: str) -> List[_Section]:
    sections: List[_Section] = []
    current: Optional[_Section] = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        match = _SECTION_RE.match(line)
        if match:
            current = _Section(match.group(1), lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current.entries:
            raise ConfigError(f"duplicate key '{key}'", lineno)
        current.entries[key] = (value, lineno)
    return sections


def _check_id(node_id: str, line: int) -> str:
    if not _ID_RE.match(node_id):
        raise ConfigError(f"invalid node identifier '{node_id}'", line)
    return node_id


def _check_keys(section: _Section, allowed: set, extra: set = frozenset()) -> None:
    for key, (_, line) in section.entries.items():
        if key not in allowed and key not in extra:
            raise ConfigError(f"unknown key '{key}' in [{section.header}]", line)


def parse_config(text: str) -> NetworkConfig:
    """Parse a configuration document into a validated NetworkConfig."""
    node_fields: Dict[str, Dict[str, Entry]] = {}
    node_lines: Dict[str, int] = {}
    link_fields: Dict[Tuple[str, str], Dict[str, Entry]] = {}
    link_lines: Dict[Tuple[str, str], int] = {}
    network_fields: Dict[str, Entry] = {}

    def add_node(node_id, key, entry, line):
        node_fields.setdefault(node_id, {})
        node_lines.setdefault(node_id, line)
        node_fields[node_id][key] = entry

    def add_link(pair, key, entry, line):
        link_fields.setdefault(pair, {})
        link_lines.setdefault(pair, line)
        link_fields[pair][key] = entry

    for section in _read_sections(text):
        parts = section.header.split(".")
        head = parts[0]

        if head == "network" and len(parts) == 1:
            _check_keys(section, NETWORK_KEYS)
            network_fields.update(section.entries)

        elif head == "node" and len(parts) == 2:
            _check_keys(section, NODE_KEYS)
            node_id = _check_id(parts[1], section.line)
            node_fields.setdefault(node_id, {})
            node_lines.setdefault(node_id, section.line)
            for key, entry in section.entries.items():
                add_node(node_id, key, entry, section.line)

        elif head == "link" and len(parts) == 3:
            _check_keys(section, LINK_KEYS)
            pair = (_check_id(parts[1], section.line), _check_id(parts[2], section.line))
            link_fields.setdefault(pair, {})
            link_lines.setdefault(pair, section.line)
            for key, entry in section.entries.items():
                add_link(pair, key, entry, section.line)

        elif head == "nodes" and len(parts) == 2:
            _check_keys(section, NODE_KEYS, {"ids"})
            if "ids" not in section.entries:
                raise ConfigError(f"[{section.header}] needs an 'ids' key", section.line)
            raw_ids, ids_line = section.entries["ids"]
            ids = [_check_id(i, ids_line) for i in _split_top_level(raw_ids)]
            for node_id in ids:
                node_fields.setdefault(node_id, {})
                node_lines.setdefault(node_id, section.line)
            for key, (raw, line) in section.entries.items():
                if key == "ids":
                    continue
                for node_id, value in zip(ids, _expand(raw, len(ids), line)):
                    add_node(node_id, key, (value, line), section.line)

        elif head == "links" and len(parts) == 2:
            _check_keys(section, LINK_KEYS, {"pairs"})
            if "pairs" not in section.entries:
                raise ConfigError(f"[{section.header}] needs a 'pairs' key", section.line)
            raw_pairs, pairs_line = section.entries["pairs"]
            pairs = []
            for item in _split_top_level(raw_pairs):
                if ">" not in item:
                    raise ConfigError(f"link pair '{item}' must look like FROM>TO", pairs_line)
                src, dst = (p.strip() for p in item.split(">", 1))
                pairs.append((_check_id(src, pairs_line), _check_id(dst, pairs_line)))
            for pair in pairs:
                link_fields.setdefault(pair, {})
                link_lines.setdefault(pair, section.line)
            for key, (raw, line) in section.entries.items():
                if key == "pairs":
                    continue
                for pair, value in zip(pairs, _expand(raw, len(pairs), line)):
                    add_link(pair, key, (value, line), section.line)

        else:
            raise ConfigError(f"unknown section [{section.header}]", section.line)

    if not node_fields:
        raise ConfigError("no nodes declared")

    nodes = [_build(NodeSpec, {"id": nid}, node_fields[nid], node_lines[nid]) for nid in node_fields]

    declared = set(node_fields)
    links = []
    for pair, fields in link_fields.items():
        for end in pair:
            if end not in declared:
                raise ConfigError(f"link {pair[0]}>{pair[1]} references undeclared node {end}", link_lines[pair])
        links.append(_build(LinkSpec, {"source": pair[0], "target": pair[1]}, fields, link_lines[pair]))

    network_kwargs = {"nodes": tuple(nodes), "links": tuple(links)}
    for key, (raw, line) in network_fields.items():
        network_kwargs[key] = _convert(key, raw, line)
    try:
        config = NetworkConfig(**network_kwargs)
    except ValidationError as e:
        raise ConfigError(_first_message(e), None)

    logger.info(f"Parsed network '{config.name}': {len(config.nodes)} nodes, {len(config.links)} links")
    return config


def _first_message(error: ValidationError) -> str:
    err = error.errors()[0]
    msg = err.get("msg", str(error))
    return msg.replace("Value error, ", "")


def _build(model, base: dict, fields: Dict[str, Entry], section_line: int):
    kwargs = dict(base)
    for key, (raw, line) in fields.items():
        kwargs[key] = _convert(key, raw, line)
    try:
        return model(**kwargs)
    except ValidationError as e:
        err = e.errors()[0]
        loc = err.get("loc") or ()
        field = loc[0] if loc else None
        line = fields[field][1] if field in fields else section_line
        if err.get("type") == "missing":
            raise ConfigError(f"missing mandatory field {field}", line)
        if field in fields:
            raise ConfigError(f"{field}: {_first_message(e)}", line)
        raise ConfigError(_first_message(e), line)


def load_config(path: Union[str, Path]) -> NetworkConfig:
    path = Path(path)
    logger.info(f"Loading network config from {path}")
    return parse_config(path.read_text())
