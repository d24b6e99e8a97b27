"""
env/network.py
Declarative supply-chain description (NodeSpec, LinkSpec, NetworkConfig) and
the derived, index-based Network used by the simulator and the optimizers.
"""
import logging
import math
from collections import deque
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from env.distributions import Const, Distribution

logger = logging.getLogger(__name__)

# Periods of worst-case demand a backlog may pile up before it leaves the
# critic input scale. The MILP never relies on it: every sample copy bounds its
# backlog by the owed units of that sample (see build_step_problem).
BACKLOG_CAP_PERIODS = 10.0

NodeKind = Literal["supplier", "warehouse", "retailer"]
DemandType = Literal["lost-sales", "backorder"]


class NodeSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    id: str
    kind: NodeKind
    holding_cost: float = Field(0.0, ge=0)
    capacity: Optional[float] = Field(None, ge=0)
    spillage_cost: float = Field(0.0, ge=0)
    price: float = Field(0.0, ge=0)
    demand: Optional[Distribution] = None
    production: Optional[Distribution] = None
    demand_type: DemandType = "lost-sales"
    backorder_cost: float = Field(0.0, ge=0)
    infinite_supply: bool = False
    initial_inventory: Optional[Distribution] = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        if self.kind == "retailer":
            if self.demand is None:
                raise ValueError(f"retailer {self.id}: missing mandatory field demand")
            if self.production is not None or self.infinite_supply:
                raise ValueError(f"retailer {self.id}: production belongs to suppliers")
        else:
            if self.demand is not None or self.price > 0:
                raise ValueError(f"{self.kind} {self.id}: demand and price belong to retailers")
            if self.demand_type != "lost-sales" or self.backorder_cost > 0:
                raise ValueError(f"{self.kind} {self.id}: only retailers can backorder")

        if self.kind == "supplier":
            if self.production is None and not self.infinite_supply:
                raise ValueError(f"supplier {self.id}: missing mandatory field production")
        elif self.production is not None or self.infinite_supply:
            raise ValueError(f"{self.kind} {self.id}: production belongs to suppliers")

        if self.capacity is None and not self.infinite_supply:
            raise ValueError(f"node {self.id}: missing mandatory field capacity")
        if self.capacity is not None and math.isinf(self.capacity) and not self.infinite_supply:
            raise ValueError(f"node {self.id}: infinite capacity requires infinite_supply")
        return self

    @property
    def is_backorder(self) -> bool:
        return self.demand_type == "backorder"


class LinkSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    source: str
    target: str
    lead_time: int = Field(0, ge=0)
    fixed_cost: float = Field(0.0, ge=0)
    variable_cost: float = Field(0.0, ge=0)
    max_order: int = Field(..., ge=0)
    min_order: int = Field(0, ge=0)
    initial_inventory: Optional[Distribution] = None

    @model_validator(mode="after")
    def _check_link(self):
        if self.source == self.target:
            raise ValueError(f"self-link on node {self.source}")
        if self.min_order > self.max_order:
            raise ValueError(f"link {self.name}: min_order {self.min_order} > max_order {self.max_order}")
        return self

    @property
    def name(self) -> str:
        return f"{self.source}>{self.target}"


class NetworkConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    name: str = "network"
    nodes: Tuple[NodeSpec, ...]
    links: Tuple[LinkSpec, ...] = ()
    initial_inventory: Distribution = Const(0.0)
    gamma: Optional[float] = Field(None, gt=0, lt=1)

    @model_validator(mode="after")
    def _check_topology(self):
        if not self.nodes:
            raise ValueError("no nodes declared")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node id")
        by_id = {n.id: n for n in self.nodes}
        seen = set()
        for link in self.links:
            for end in (link.source, link.target):
                if end not in by_id:
                    raise ValueError(f"link {link.name} references undeclared node {end}")
            if (link.source, link.target) in seen:
                raise ValueError(f"duplicate link {link.name}")
            seen.add((link.source, link.target))
            if by_id[link.target].infinite_supply:
                raise ValueError(f"link {link.name} feeds an infinite-supply node")

        downstream: Dict[str, List[str]] = {i: [] for i in ids}
        for link in self.links:
            downstream[link.source].append(link.target)
        reached = set()
        queue = deque(n.id for n in self.nodes if n.kind == "supplier")
        while queue:
            node = queue.popleft()
            if node in reached:
                continue
            reached.add(node)
            queue.extend(downstream[node])
        for node in self.nodes:
            if node.kind == "retailer" and node.id not in reached:
                raise ValueError(f"retailer {node.id} is not reachable from any supplier")
        return self

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


class Network:
    """
    Index-based view of a NetworkConfig.

    Nodes and links keep their declaration order; every array below is
    indexed by node position or link position.
    """

    def __init__(self, config: NetworkConfig):
        self.config = config
        self.node_ids: List[str] = [n.id for n in config.nodes]
        self.index: Dict[str, int] = {nid: i for i, nid in enumerate(self.node_ids)}
        self.n_nodes = len(self.node_ids)
        self.n_links = len(config.links)

        nodes = config.nodes
        self.kind = [n.kind for n in nodes]
        self.holding = np.array([n.holding_cost for n in nodes], dtype=float)
        self.capacity = np.array([math.inf if n.capacity is None else n.capacity for n in nodes], dtype=float)
        self.spillage = np.array([n.spillage_cost for n in nodes], dtype=float)
        self.price = np.array([n.price for n in nodes], dtype=float)
        self.backorder_cost = np.array([n.backorder_cost for n in nodes], dtype=float)
        self.is_backorder = np.array([n.is_backorder for n in nodes], dtype=bool)
        self.infinite = np.array([n.infinite_supply for n in nodes], dtype=bool)

        links = config.links
        self.link_names = [link.name for link in links]
        self.src = np.array([self.index[link.source] for link in links], dtype=np.int64)
        self.dst = np.array([self.index[link.target] for link in links], dtype=np.int64)
        self.lead = np.array([link.lead_time for link in links], dtype=np.int64)
        self.fixed_cost = np.array([link.fixed_cost for link in links], dtype=float)
        self.variable_cost = np.array([link.variable_cost for link in links], dtype=float)
        self.max_order = np.array([link.max_order for link in links], dtype=np.int64)
        self.min_order = np.array([link.min_order for link in links], dtype=np.int64)

        self.in_links: List[List[int]] = [[] for _ in nodes]
        self.out_links: List[List[int]] = [[] for _ in nodes]
        for e in range(self.n_links):
            self.out_links[self.src[e]].append(e)
            self.in_links[self.dst[e]].append(e)

        self.max_lead = np.array(
            [max((int(self.lead[e]) for e in self.in_links[i]), default=0) for i in range(self.n_nodes)],
            dtype=np.int64,
        )
        self.pipeline_len = self.max_lead + 1

        self.demand_nodes = [i for i, n in enumerate(nodes) if n.demand is not None]
        self.production_nodes = [i for i, n in enumerate(nodes) if n.production is not None]
        # production known before shipping decisions are made
        self.guaranteed_production = np.array(
            [n.production.value if n.production is not None and n.production.is_constant else 0.0 for n in nodes]
        ).astype(np.int64)

        logger.debug(f"Network '{config.name}': {self.n_nodes} nodes, {self.n_links} links")

    # -- state layout -------------------------------------------------

    @cached_property
    def tracked_nodes(self) -> List[int]:
        """Nodes whose inventory is part of the state vector."""
        return [i for i in range(self.n_nodes) if not self.infinite[i]]

    @cached_property
    def backorder_nodes(self) -> List[int]:
        return [i for i in range(self.n_nodes) if self.is_backorder[i]]

    @cached_property
    def state_labels(self) -> List[str]:
        labels = []
        for i in self.tracked_nodes:
            labels.extend(f"{self.node_ids[i]}.I{j}" for j in range(self.pipeline_len[i]))
        labels.extend(f"{self.node_ids[i]}.backlog" for i in self.backorder_nodes)
        return labels

    @property
    def state_dim(self) -> int:
        return len(self.state_labels)

    @cached_property
    def state_offsets(self) -> Dict[int, int]:
        """Position of slot 0 of each tracked node inside the state vector."""
        offsets, pos = {}, 0
        for i in self.tracked_nodes:
            offsets[i] = pos
            pos += int(self.pipeline_len[i])
        return offsets

    @cached_property
    def backlog_offsets(self) -> Dict[int, int]:
        start = sum(int(self.pipeline_len[i]) for i in self.tracked_nodes)
        return {i: start + k for k, i in enumerate(self.backorder_nodes)}

    def initial_distribution(self, node: int, slot: int) -> Distribution:
        spec = self.config.nodes[node]
        if slot > 0:
            feeding = sorted(
                (int(self.lead[e]), e) for e in self.in_links[node]
                if self.lead[e] >= slot and self.config.links[e].initial_inventory is not None
            )
            if feeding:
                return self.config.links[feeding[0][1]].initial_inventory
        if spec.initial_inventory is not None:
            return spec.initial_inventory
        return self.config.initial_inventory

    def state_box(self, backlog_cap: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Static box over the state vector, used for the critic input scale.

        On-hand is capped by capacity (or the initial draw), pipeline slot j by
        the initial draw plus the max orders of links with lead >= j.
        Backlog has no static bound, so its entry is a nominal cap.
        """
        lower = np.zeros(self.state_dim)
        upper = np.zeros(self.state_dim)
        for i, off in self.state_offsets.items():
            for j in range(int(self.pipeline_len[i])):
                init_max = self.initial_distribution(i, j).support_max()
                if j == 0:
                    upper[off] = max(self.capacity[i], init_max)
                else:
                    inflow = sum(int(self.max_order[e]) for e in self.in_links[i] if self.lead[e] >= j)
                    upper[off + j] = init_max + inflow
        for i, pos in self.backlog_offsets.items():
            if backlog_cap is None:
                dist = self.config.nodes[i].demand
                cap = BACKLOG_CAP_PERIODS * max(1.0, dist.upper())
            else:
                cap = backlog_cap
            upper[pos] = cap
        return lower, upper

    def state_scale(self) -> np.ndarray:
        """Fixed per-dimension input scale for the critic."""
        _, upper = self.state_box()
        return np.maximum(upper, 1.0)

    def action_space_size(self) -> int:
        size = 1
        for e in range(self.n_links):
            size *= int(self.max_order[e] - self.min_order[e] + 1)
        return size
