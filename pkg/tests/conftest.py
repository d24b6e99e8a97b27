"""
tests/conftest.py
Shared network fixtures built from small configuration documents.
"""
import numpy as np
import pytest

from env.config_parser import parse_config
from env.network import Network
from env.simulator import PipelineState


def line_text(demand="normal(3,2)", production="const(5)", price=50, holding=1, capacity=20,
              lead=1, max_order=10, fixed_cost=10, variable_cost=0, init="uniform(0,4)"):
    """One supplier feeding one lost-sales retailer."""
    return f"""
[network]
name = line
initial_inventory = {init}

[node.S1]
kind = supplier
production = {production}
capacity = 20
spillage_cost = 10

[node.R1]
kind = retailer
demand = {demand}
price = {price}
holding_cost = {holding}
capacity = {capacity}
spillage_cost = 10

[link.S1.R1]
lead_time = {lead}
fixed_cost = {fixed_cost}
variable_cost = {variable_cost}
max_order = {max_order}
"""


def make_network(**kwargs) -> Network:
    return Network(parse_config(line_text(**kwargs)))


def make_state(*pipelines, backlog=None) -> PipelineState:
    pipes = tuple(np.asarray(p, dtype=np.int64) for p in pipelines)
    if backlog is None:
        backlog = np.zeros(len(pipes), dtype=np.int64)
    return PipelineState(pipes, np.asarray(backlog, dtype=np.int64), 0)


@pytest.fixture
def smoke():
    return make_network()


@pytest.fixture
def zero_demand():
    """No demand, no prices and no retailer costs."""
    return make_network(demand="const(0)", price=0, holding=0, fixed_cost=0, init="uniform(0,0)")


@pytest.fixture
def two_retailers():
    text = """
[node.S1]
kind = supplier
production = const(0)
capacity = 20

[nodes.retailers]
ids = R1, R2
kind = retailer
demand = normal(2,1)
price = 10
holding_cost = 1
capacity = 20

[links.supply]
pairs = S1>R1, S1>R2
lead_time = 1
max_order = 5
"""
    return Network(parse_config(text))
