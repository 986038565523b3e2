"""Analytical core: Erlang-B loss formula, its continuous extension,
peakedness-based blocking for G/GI/n/n fleets, and throughput / profit
estimators for steady state and for epochs with servers booting or
draining.

The blocking model is the classic loss-system chain: for Poisson
arrivals the Erlang-B recurrence is exact; for general arrivals the
fleet and the offered load are both scaled by the peakedness z of the
arrival process (Hayward's approximation), which requires the Erlang-B
function at non-integer order.

Internal unit conventions: rates in jobs/second, times in seconds,
except that epoch length and boot/teardown times enter the transient
throughput estimators in hours (they only appear as ratios). Money is
in cents; profit rates are cents per hour.
"""

import math
from dataclasses import dataclass
from enum import Enum

from .billing import BillingModel


class ServiceModel(Enum):
    """Shape assumed for the service-time distribution.

    EXPONENTIAL and DETERMINISTIC admit closed forms; NORMAL_APPROX
    treats the service time as N(1/mu, sigma_s^2) and integrates its
    survival function numerically (the untruncated normal is used even
    though it places some mass at negative times).
    """

    EXPONENTIAL = "exponential"
    NORMAL_APPROX = "normal"
    DETERMINISTIC = "deterministic"


@dataclass
class QueueParams:
    """Arrival/service process summary feeding the blocking math.

    Attributes:
        lam: arrival rate (jobs/second).
        mu: per-server service rate (jobs/second).
        ca2: squared coefficient of variation of interarrival intervals.
        sigma_s: standard deviation of the service time (seconds).
        service_model: shape used when evaluating the eta integral.
    """

    lam: float
    mu: float
    ca2: float = 1.0
    sigma_s: float | None = None
    service_model: ServiceModel = ServiceModel.EXPONENTIAL

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"arrival rate must be >= 0, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"service rate must be positive, got {self.mu}")
        if self.ca2 < 0:
            raise ValueError(f"ca2 must be >= 0, got {self.ca2}")
        if self.sigma_s is None:
            # exponential default: std dev equals the mean service time
            self.sigma_s = 1.0 / self.mu
        if self.sigma_s < 0:
            raise ValueError(f"sigma_s must be >= 0, got {self.sigma_s}")

    def rho(self) -> float:
        """Offered load in Erlangs (lambda / mu); derived, never stored."""
        return self.lam / self.mu


@dataclass
class Peakedness:
    """Peakedness z of the arrival process and the eta factor behind it."""

    z: float
    eta: float


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge within the refinement budget.

    Carries the best available estimate in ``partial``.
    """

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial


# Quadrature tolerances: blocking values are needed to ~1e-6 for the
# reference-table tests, so the integral is resolved well past that.
_QUAD_ABS_TOL = 1e-10
_QUAD_REL_TOL = 1e-8
_QUAD_MAX_DEPTH = 20

# Peakedness is clamped away from zero so n/z stays finite for
# pathological ca2 ~ 0 estimates; values this small never arise from
# real traces.
_Z_FLOOR = 1e-3


# 15-point Gauss-Kronrod pair: abscissae on [-1, 1] (symmetric; the odd
# positions are the embedded 7-point Gauss nodes) with Kronrod and Gauss
# weights. |K15 - G7| serves as the local error estimate.
_GK_X = (0.991455371120813, 0.949107912342759, 0.864864423359769,
         0.741531185599394, 0.586087235467691, 0.405845151377397,
         0.207784955007898, 0.0)
_GK_WK = (0.022935322010529, 0.063092092629979, 0.104790010322250,
          0.140653259715525, 0.169004726639267, 0.190350578064785,
          0.204432940075298, 0.209482141084728)
_GK_WG = (0.129484966168870, 0.279705391489277, 0.381830050505119,
          0.417959183673469)


def _gk15(f, lo: float, hi: float) -> tuple[float, float]:
    """One Gauss-Kronrod 15/7 panel: (integral, error estimate)."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    fc = f(center)
    kron = _GK_WK[7] * fc
    gauss = _GK_WG[3] * fc
    for i in range(7):
        x = half * _GK_X[i]
        pair = f(center - x) + f(center + x)
        kron += _GK_WK[i] * pair
        if i % 2 == 1:
            gauss += _GK_WG[i // 2] * pair
    return half * kron, abs(half * (kron - gauss))


def _adaptive_quadrature(f, a: float, b: float,
                         abs_tol: float = _QUAD_ABS_TOL,
                         rel_tol: float = _QUAD_REL_TOL,
                         max_depth: int = _QUAD_MAX_DEPTH) -> tuple[float, bool]:
    """Adaptive Gauss-Kronrod integration over [a, b].

    Returns (estimate, converged). The error budget is the larger of the
    absolute tolerance and the relative tolerance applied to the whole
    integral, halved at each bisection level so that per-interval
    acceptances sum to the requested global budget. Panels that still
    miss their share of the budget at the depth cap mark the result as
    non-converged.
    """
    whole, _ = _gk15(f, a, b)
    budget = max(abs_tol, rel_tol * abs(whole))
    failures: list[int] = []

    def recurse(lo, hi, tol, depth):
        value, err = _gk15(f, lo, hi)
        if err <= tol:
            return value
        if depth >= max_depth:
            failures.append(depth)
            return value
        mid = 0.5 * (lo + hi)
        half_tol = 0.5 * tol
        return (recurse(lo, mid, half_tol, depth + 1)
                + recurse(mid, hi, half_tol, depth + 1))

    estimate = recurse(a, b, budget, 0)
    return estimate, not failures


def erlang_b(n: int, rho: float) -> float:
    """Blocking probability of an M/M/n/n loss system.

    Evaluated with the numerically stable recurrence
    B(0) = 1,  B(k) = rho * B(k-1) / (k + rho * B(k-1)).

    Args:
        n: server count (>= 0).
        rho: offered load in Erlangs (>= 0).
    """
    if n < 0:
        raise ValueError(f"server count must be >= 0, got {n}")
    if rho < 0:
        raise ValueError(f"offered load must be >= 0, got {rho}")
    b = 1.0
    for k in range(1, n + 1):
        b = rho * b / (k + rho * b)
    return b


def erlang_b_real(x: float, a: float) -> float:
    """Erlang-B blocking at real (non-integer) order x and load a.

    Continuous extension through the integral identity
        1 / B(x, a) = a * int_0^inf exp(-a t) (1 + t)^x dt.
    The fractional part of the order is integrated by adaptive
    quadrature; integration by parts of the same integral gives the
    exact one-step recurrence
        1 / B(x+1, a) = 1 + (x+1)/a * 1/B(x, a),
    which lifts the result to the requested order without overflow at
    large x. Agrees with erlang_b at integer orders to within 1e-9.

    Raises:
        QuadratureError: the quadrature did not converge; the error
            carries the partial estimate.
    """
    if x < 0:
        raise ValueError(f"order must be >= 0, got {x}")
    if a < 0:
        raise ValueError(f"offered load must be >= 0, got {a}")
    if a == 0.0:
        return 0.0 if x > 0 else 1.0

    steps = int(math.floor(x))
    y = x - steps

    # Truncate where exp(-a t)(1+t)^y drops ~1e-18 below its peak; the
    # integrand is decreasing for y < 1 once a*t dominates.
    upper = 1.0
    for _ in range(64):
        new_upper = (45.0 + y * math.log1p(upper)) / a
        if abs(new_upper - upper) < 1e-9 * max(upper, 1.0):
            upper = new_upper
            break
        upper = new_upper

    def integrand(t: float) -> float:
        return math.exp(-a * t) * (1.0 + t) ** y

    integral, converged = _adaptive_quadrature(integrand, 0.0, upper)
    inv_b = a * integral
    for k in range(1, steps + 1):
        inv_b = 1.0 + (y + k) / a * inv_b
        if math.isinf(inv_b):
            # blocking underflows to zero long before inv_b overflows
            return 0.0
    value = min(max(1.0 / inv_b, 0.0), 1.0)
    if not converged:
        raise QuadratureError(
            f"fractional-order quadrature did not converge for x={x}, a={a}",
            partial=value,
        )
    return value


def eta(mu: float, sigma_s: float, service_model: ServiceModel) -> float:
    """Service-time factor eta = mu * int_0^inf [1 - G(t)]^2 dt.

    G is the service-time CDF with mean 1/mu. Exponential service gives
    exactly 1/2 and deterministic service gives 1; the normal
    approximation integrates the squared survival function of
    N(1/mu, sigma_s^2) over [0, inf), truncated where the integrand
    falls below 1e-12.
    """
    if mu <= 0:
        raise ValueError(f"service rate must be positive, got {mu}")
    if sigma_s < 0:
        raise ValueError(f"sigma_s must be >= 0, got {sigma_s}")
    if service_model is ServiceModel.EXPONENTIAL:
        return 0.5
    if service_model is ServiceModel.DETERMINISTIC:
        return 1.0
    if sigma_s == 0.0:
        # normal approximation degenerates to a point mass at the mean
        return 1.0

    mean = 1.0 / mu
    sqrt2 = math.sqrt(2.0)

    def survival_sq(t: float) -> float:
        s = 0.5 * math.erfc((t - mean) / (sigma_s * sqrt2))
        return s * s

    # survival^2 < 1e-12 once survival < 1e-6, i.e. beyond ~4.76 sigma
    upper = mean + 4.8 * sigma_s
    integral, converged = _adaptive_quadrature(survival_sq, 0.0, upper)
    value = mu * integral
    if not converged:
        raise QuadratureError(
            f"eta quadrature did not converge for mu={mu}, sigma_s={sigma_s}",
            partial=value,
        )
    return value


def peakedness(ca2: float, mu: float, sigma_s: float,
               service_model: ServiceModel) -> Peakedness:
    """Asymptotic peakedness z = 1 + (ca2 - 1) * eta of the arrival process.

    z is the variance-to-mean ratio of busy servers in the
    infinite-server reference system; z = 1 for Poisson arrivals. The
    result is clamped to z >= 1e-3 for numerical safety.
    """
    if ca2 < 0:
        raise ValueError(f"ca2 must be >= 0, got {ca2}")
    e = eta(mu, sigma_s, service_model)
    z = 1.0 + (ca2 - 1.0) * e
    return Peakedness(z=max(z, _Z_FLOOR), eta=e)


def blocking_probability(params: QueueParams, n: int, hayward: bool = True) -> float:
    """Blocking probability of the fleet under the configured traffic model.

    With hayward=True (default) the G/GI/n/n blocking is approximated by
    B(n/z, rho/z) with z the peakedness; the same expression reduces to
    the exact Erlang-B value when ca2 = 1 (z = 1, integer path, no
    quadrature). hayward=False forces plain Erlang-B regardless of ca2.
    """
    if n < 0:
        raise ValueError(f"server count must be >= 0, got {n}")
    rho = params.rho()
    if not hayward or params.ca2 == 1.0:
        return erlang_b(n, rho)
    z = peakedness(params.ca2, params.mu, params.sigma_s, params.service_model).z
    if z == 1.0:
        return erlang_b(n, rho)
    return erlang_b_real(n / z, rho / z)


def throughput_steady(params: QueueParams, n: int, hayward: bool = True) -> float:
    """Steady-state accepted-job rate T = lambda * (1 - p_n), jobs/second."""
    return params.lam * (1.0 - blocking_probability(params, n, hayward))


def throughput_scale_up(params: QueueParams, n: int, n_plus: int,
                        t_up: float, k: float, hayward: bool = True) -> float:
    """Mean throughput of the next epoch while n_plus servers boot.

    The new servers join at the epoch boundary and become usable after
    t_up hours, so the epoch mixes the blocking levels of the old and
    the new fleet size:
        T+ = (t_up/k) * lambda*(1 - p(n)) + ((k - t_up)/k) * lambda*(1 - p(n + n_plus)).
    The blocking model (Hayward or plain Erlang-B) is applied uniformly
    to both terms.
    """
    if not 0 <= t_up <= k:
        raise ValueError(f"boot time must lie in [0, k], got t_up={t_up}, k={k}")
    if n < 0 or n_plus < 0:
        raise ValueError("server counts must be >= 0")
    if n_plus == 0:
        return throughput_steady(params, n, hayward)
    low = throughput_steady(params, n, hayward)
    high = throughput_steady(params, n + n_plus, hayward)
    return (t_up / k) * low + ((k - t_up) / k) * high


def throughput_scale_down(params: QueueParams, n: int, n_minus: int,
                          t_down: float, k: float, hayward: bool = True) -> float:
    """Mean throughput of the current epoch while n_minus servers drain.

    Removal is initiated t_down hours before the boundary, so the tail
    of the epoch runs at the reduced size:
        T- = ((k - t_down)/k) * lambda*(1 - p(n)) + (t_down/k) * lambda*(1 - p(n - n_minus)).
    The following epoch then runs at lambda*(1 - p(n - n_minus)).
    """
    if not 0 <= t_down <= k:
        raise ValueError(f"teardown time must lie in [0, k], got t_down={t_down}, k={k}")
    if n < 0:
        raise ValueError("server count must be >= 0")
    if not 0 <= n_minus <= n:
        raise ValueError(f"cannot remove {n_minus} of {n} servers")
    if n_minus == 0:
        return throughput_steady(params, n, hayward)
    high = throughput_steady(params, n, hayward)
    low = throughput_steady(params, n - n_minus, hayward)
    return ((k - t_down) / k) * high + (t_down / k) * low


def profit_rate(params: QueueParams, billing: BillingModel, n: int,
                throughput: float, n_plus: int = 0, n_minus: int = 0) -> float:
    """Mean profit in cents per hour for a fleet of n servers.

    P = c * T * 3600 - d * n, with two optional extensions switched on
    by the billing model: a denial-of-service penalty on the rejected
    rate, and one-off acquisition / release costs amortized over the
    epoch.
    """
    if n < 0:
        raise ValueError(f"server count must be >= 0, got {n}")
    if throughput > params.lam * (1.0 + 1e-12):
        raise ValueError("throughput cannot exceed the arrival rate")
    profit = billing.c * throughput * 3600.0 - billing.d * n
    if billing.penalty is not None:
        profit -= (params.lam - throughput) * 3600.0 * billing.penalty
    if billing.add_cost is not None and n_plus:
        profit -= billing.add_cost * n_plus / billing.k
    if billing.remove_cost is not None and n_minus:
        profit -= billing.remove_cost * n_minus / billing.k
    return profit
