from heuristics.analytic import analytic_order_up_to, critical_ratio
from heuristics.base_stock import (
    BaseStockChoice,
    BaseStockParams,
    BaseStockPolicy,
    base_stock_action,
    default_grid,
    dump_params,
    grid_search_base_stock,
    load_params,
    surrogate_config,
    tune_base_stock,
)
from heuristics.decomposition import (
    DALevels,
    DAPolicy,
    da_action,
    da_levels,
    expected_shortfall,
    shortfall_inverse,
)
