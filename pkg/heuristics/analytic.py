"""
heuristics/analytic.py
Closed-form order-up-to level for a single backordering retailer with
infinite supply and normal demand.
"""
import math

from scipy import stats

from env.errors import HeuristicError


def critical_ratio(b: float, h: float) -> float:
    if b + h <= 0:
        raise HeuristicError(f"b + h must be positive, got b={b}, h={h}")
    ratio = b / (b + h)
    if not 0.0 < ratio < 1.0:
        raise HeuristicError(f"critical ratio {ratio} outside (0, 1)")
    return ratio


def analytic_order_up_to(mu: float, sigma: float, lead: int, b: float, h: float) -> float:
    """S = F^-1(b / (b + h)) for lead-time demand N(mu (L+1), sigma sqrt(L+1))."""
    if sigma <= 0:
        raise HeuristicError(f"sigma must be positive, got {sigma}")
    if lead < 0:
        raise HeuristicError(f"lead time must be >= 0, got {lead}")
    horizon = lead + 1
    return float(stats.norm.ppf(critical_ratio(b, h), loc=mu * horizon, scale=sigma * math.sqrt(horizon)))
