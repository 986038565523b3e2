"""Allocation policies: profit-optimal search, square-root staffing (QED),
Grassmann's variance-hedged staffing, and the two baselines (static
fleet, utilization-thresholded reactive stepping).

Every decision function is pure and deterministic: the same inputs
always yield the same PolicyDecision, and ties between equally
profitable fleet sizes are broken toward the smaller (cheaper) one.
"""

import math
from dataclasses import dataclass

from scipy.special import ndtri

from .billing import BillingModel
from .queueing import (
    QueueParams,
    profit_rate,
    throughput_scale_up,
    throughput_steady,
)


class DegenerateEconomicsError(ValueError):
    """Cost per server exceeds the revenue it can generate; run zero servers."""


@dataclass
class PolicyDecision:
    """Target fleet size for the next epoch with its expected economics.

    Invariants: n_next = n_current + n_plus - n_minus, at most one of
    n_plus / n_minus is nonzero, and 0 <= n_next <= n_max.
    """

    n_next: int
    n_plus: int
    n_minus: int
    predicted_profit: float | None = None
    predicted_blocking: float | None = None


def _decision(n_current: int, n_next: int,
              profit: float | None = None,
              blocking: float | None = None) -> PolicyDecision:
    delta = n_next - n_current
    return PolicyDecision(
        n_next=n_next,
        n_plus=max(delta, 0),
        n_minus=max(-delta, 0),
        predicted_profit=profit,
        predicted_blocking=blocking,
    )


def candidate_profit(params: QueueParams, billing: BillingModel,
                     n_current: int, n: int, hayward: bool = True) -> float:
    """Modeled next-epoch profit (cents/hour) of running n servers.

    Candidates above n_current are scored with the scale-up throughput
    (the added servers boot for t_up hours); candidates at or below
    n_current are scored with steady-state throughput, deliberately
    ignoring the short teardown interval.
    """
    if n > n_current:
        t = throughput_scale_up(params, n_current, n - n_current,
                                billing.t_up, billing.k, hayward)
        return profit_rate(params, billing, n, t, n_plus=n - n_current)
    t = throughput_steady(params, n, hayward)
    return profit_rate(params, billing, n, t, n_minus=n_current - n)


def _predicted_blocking(params: QueueParams, throughput: float) -> float:
    if params.lam <= 0:
        return 0.0
    return max(0.0, 1.0 - throughput / params.lam)


def optimal_decide(params: QueueParams, billing: BillingModel,
                   n_current: int, hayward: bool = True) -> PolicyDecision:
    """Profit-maximizing fleet size found by scanning outward from n_current.

    The modeled profit is unimodal in n, so the scan walks up and down
    from the current size and stops a direction after the profit has
    declined for 3 consecutive candidates (with a tiny relative margin
    so that float noise on a flat peak does not stop the walk early),
    bounded by n_max. Ties go to the smaller fleet.
    """
    if n_current < 0:
        raise ValueError(f"current server count must be >= 0, got {n_current}")
    n_current = min(n_current, billing.n_max)

    def score(n: int) -> float:
        return candidate_profit(params, billing, n_current, n, hayward)

    p_start = score(n_current)
    best_n, best_p = n_current, p_start

    for direction in (+1, -1):
        declines = 0
        prev = p_start
        n = n_current
        while True:
            n += direction
            if n < 0 or n > billing.n_max:
                break
            p = score(n)
            if p > best_p or (p == best_p and n < best_n):
                best_n, best_p = n, p
            margin = 1e-9 * (1.0 + abs(prev))
            declines = declines + 1 if p < prev - margin else 0
            if declines >= 3:
                break
            prev = p

    if best_n > n_current:
        t = throughput_scale_up(params, n_current, best_n - n_current,
                                billing.t_up, billing.k, hayward)
    else:
        t = throughput_steady(params, best_n, hayward)
    return _decision(n_current, best_n, best_p, _predicted_blocking(params, t))


def alpha_star(c: float, d: float, mu: float) -> float:
    """Optimal all-servers-busy probability alpha = d / (c * mu).

    c is cents per job, d cents per server-hour and mu jobs per second;
    the two rates are put on a common per-hour basis before dividing.

    Raises:
        DegenerateEconomicsError: alpha >= 1, meaning a server's hourly
            cost exceeds the revenue it can possibly produce; the only
            sensible allocation is zero servers.
    """
    if c <= 0:
        raise ValueError(f"revenue per job must be positive, got {c}")
    if mu <= 0:
        raise ValueError(f"service rate must be positive, got {mu}")
    if d < 0:
        raise ValueError(f"cost per server-hour must be >= 0, got {d}")
    alpha = d / (c * mu * 3600.0)
    if alpha >= 1.0:
        raise DegenerateEconomicsError(
            f"cost {d} cents/h exceeds the maximum revenue rate "
            f"{c * mu * 3600.0:.4f} cents/h per server (alpha={alpha:.4f})")
    return alpha


def z_from_alpha(alpha: float) -> float:
    """Safety-staffing quantile z_alpha = Phi^-1(1 - alpha).

    Phi is the standard normal CDF; the inverse is evaluated with a
    rational approximation accurate well beyond 1e-8. Negative values
    are legitimate (staffing below the offered load, the
    efficiency-driven regime).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly in (0, 1), got {alpha}")
    return float(ndtri(1.0 - alpha))


def round_g(x: float, params: QueueParams, billing: BillingModel,
            hayward: bool = True) -> int:
    """Profit-aware rounding of a fractional staffing level.

    Returns ceil(x) if the modeled steady-state profit at ceil(x) is at
    least that at floor(x), else floor(x).
    """
    if x < 0:
        raise ValueError(f"staffing level must be >= 0, got {x}")
    lo = int(math.floor(x))
    hi = int(math.ceil(x))
    if lo == hi:
        return lo
    p_lo = profit_rate(params, billing, lo, throughput_steady(params, lo, hayward))
    p_hi = profit_rate(params, billing, hi, throughput_steady(params, hi, hayward))
    return hi if p_hi >= p_lo else lo


def _staffing_decision(params: QueueParams, billing: BillingModel,
                       n_current: int, hedge_term: float,
                       hayward: bool) -> PolicyDecision:
    """Shared tail of the square-root staffing policies."""
    rho = params.rho()
    if rho == 0.0:
        return _decision(n_current, 0, 0.0, 0.0)
    try:
        alpha = alpha_star(billing.c, billing.d, params.mu)
    except DegenerateEconomicsError:
        return _decision(n_current, 0,
                         profit_rate(params, billing, 0, 0.0),
                         _predicted_blocking(params, 0.0))
    if alpha == 0.0:
        # free servers: hedge is unbounded, provision at the cap
        n = billing.n_max
    else:
        target = rho + z_from_alpha(alpha) * hedge_term
        n = round_g(max(target, 0.0), params, billing, hayward)
    n = max(0, min(n, billing.n_max))
    t = throughput_steady(params, n, hayward)
    return _decision(n_current, n,
                     profit_rate(params, billing, n, t),
                     _predicted_blocking(params, t))


def qed_decide(params: QueueParams, billing: BillingModel,
               n_current: int, hayward: bool = True) -> PolicyDecision:
    """Square-root safety staffing: n = G(rho + z_alpha * sqrt(rho)).

    The base capacity rho covers the mean load and the hedge
    z_alpha * sqrt(rho) covers its stochastic variability; degenerate
    economics (alpha >= 1) map to an empty fleet.
    """
    return _staffing_decision(params, billing, n_current,
                              math.sqrt(params.rho()), hayward)


def grassmann_decide(params: QueueParams, billing: BillingModel,
                     var_rho: float, n_current: int,
                     hayward: bool = True) -> PolicyDecision:
    """Variance-hedged staffing: n = G(rho + z_alpha * sqrt(rho + Var(rho))).

    Var(rho) = Var(lambda) / mu^2 widens the hedge to absorb errors in
    the forecasted load; var_rho = 0 reduces exactly to qed_decide.
    """
    if var_rho < 0:
        raise ValueError(f"load variance must be >= 0, got {var_rho}")
    return _staffing_decision(params, billing, n_current,
                              math.sqrt(params.rho() + var_rho), hayward)


def always_on_decide(n_fixed: int, n_current: int | None = None) -> PolicyDecision:
    """Static provisioning: always run n_fixed servers, whatever the traffic."""
    if n_fixed < 0:
        raise ValueError(f"fixed fleet size must be >= 0, got {n_fixed}")
    if n_current is None:
        n_current = n_fixed
    return _decision(n_current, n_fixed)


@dataclass
class ReactiveConfig:
    """Thresholds for the utilization-driven reactive stepper.

    One server is added after the fleet utilization has stayed above
    ``scale_up_util`` for a full evaluation window, and one is removed
    after it has stayed below ``scale_down_util`` for a full window.
    The window resets after every action (cooldown).
    """

    scale_up_util: float = 0.70
    scale_down_util: float = 0.60
    window_minutes: int = 15
    n_min: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.scale_down_util < self.scale_up_util <= 1.0:
            raise ValueError("need 0 <= scale_down_util < scale_up_util <= 1")
        if self.window_minutes < 1:
            raise ValueError("evaluation window must cover at least one sample")


def reactive_step(window: list[float], n_current: int,
                  config: ReactiveConfig, n_max: int = 1000) -> PolicyDecision:
    """One evaluation of the reactive rule against a full sample window.

    `window` holds the most recent per-minute fleet utilization samples
    (busy-server time over running-server time) and must cover at least
    the configured evaluation period. The caller owns the window and
    resets it whenever the returned decision changes the fleet.
    """
    if len(window) < config.window_minutes:
        raise ValueError(
            f"window holds {len(window)} samples, need >= {config.window_minutes}")
    recent = window[-config.window_minutes:]
    if all(u > config.scale_up_util for u in recent) and n_current < n_max:
        return _decision(n_current, n_current + 1)
    if all(u < config.scale_down_util for u in recent) and n_current > config.n_min:
        return _decision(n_current, n_current - 1)
    return _decision(n_current, n_current)
