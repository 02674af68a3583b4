"""Volume delay functions for bidirectional walking links and route travel times.

The symmetric form charges both directions of a sidewalk the same congestion
delay, driven by the combined two-way flow.  The asymmetric form adds a
bell-shaped bidirectional term that peaks when the two directional flow ratios
sit at configured trouble spots (e.g. balanced counterflow).  Route times come
in two flavours: the pre-trip estimate summing link costs frozen at the
departure instant, and the experienced time accumulated sequentially from the
loaded network state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

MODES = ("symmetric", "asymmetric")


@dataclass(frozen=True)
class PvdfParams:
    """Coefficients of the walking volume delay function.

    alpha and beta shape the congestion term; mu scales the bidirectional bump
    and (eta_r, lambda_r, eta_c, lambda_c) place and widen it over the
    (reference flow ratio, counterflow ratio) plane.  eta_r and eta_c must be
    nonpositive so the exponential term is a bounded bell rather than an
    unbounded blow-up.
    """

    alpha: float = 0.5
    beta: float = 2.0
    mode: str = "symmetric"
    mu: float = 0.0
    eta_r: float = 0.0
    lambda_r: float = 0.0
    eta_c: float = 0.0
    lambda_c: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.eta_r > 0 or self.eta_c > 0:
            raise ValueError(
                "eta_r and eta_c must be <= 0 for a bounded bidirectional term, "
                f"got ({self.eta_r}, {self.eta_c})"
            )


def link_cost(link, params: PvdfParams, u: float, u_opp: float) -> float:
    """Travel time of one link in seconds given directional inflows in ped/s.

    `link` only needs `free_flow_time` and `capacity` attributes, so plain
    stubs work in tests.
    """
    if u < 0 or u_opp < 0:
        raise ValueError(f"flows must be nonnegative, got ({u}, {u_opp})")
    tau = link.free_flow_time
    cap = link.capacity
    if cap <= 0:
        raise ValueError(f"link capacity must be positive, got {cap}")
    cost = tau * (1.0 + params.alpha * ((u + u_opp) / cap) ** params.beta)
    if params.mode == "asymmetric":
        exponent = params.eta_r * (u / cap - params.lambda_r) ** 2 + params.eta_c * (
            u_opp / cap - params.lambda_c
        ) ** 2
        cost += tau * params.mu * math.exp(exponent)
    return cost


def link_cost_profile(
    tau: np.ndarray,
    capacity: np.ndarray,
    params: PvdfParams,
    u: np.ndarray,
    u_opp: np.ndarray,
) -> np.ndarray:
    """Vectorized link costs: tau/capacity per link (column vectors) against
    directional inflow trajectories u, u_opp of shape (n_links, n_bins)."""
    tau = tau[:, None]
    capacity = capacity[:, None]
    cost = tau * (1.0 + params.alpha * ((u + u_opp) / capacity) ** params.beta)
    if params.mode == "asymmetric":
        exponent = params.eta_r * (u / capacity - params.lambda_r) ** 2 + params.eta_c * (
            u_opp / capacity - params.lambda_c
        ) ** 2
        cost = cost + tau * params.mu * np.exp(exponent)
    return cost


def instantaneous_route_time(path, costs_at_k: Mapping[int, float]) -> float:
    """Pre-trip route time: the sum of link costs all frozen at the departure bin.

    `costs_at_k` maps link id to the link cost evaluated at the traveller's
    departure instant.
    """
    return sum(costs_at_k[link_id] for link_id in path.link_ids)


def experienced_route_time(
    path,
    fd_time_fn: Callable[[int, float], float | None],
    k: float,
    horizon: float | None = None,
) -> float | None:
    """Route time accumulated link by link from the loaded traversal times.

    Each link's traversal time is evaluated at the instant the traveller
    reaches it: entering link i at time t costs fd_time_fn(link_id, t) and the
    next link is entered at t plus that cost.  Returns None when the trip
    cannot be completed within the horizon (an incomplete trip, deliberately
    distinct from any numeric result).
    """
    t = float(k)
    for link_id in path.link_ids:
        c = fd_time_fn(link_id, t)
        if c is None or not math.isfinite(c):
            return None
        t += c
        if horizon is not None and t > horizon:
            return None
    return t - float(k)
