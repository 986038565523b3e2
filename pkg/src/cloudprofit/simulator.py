"""Discrete-event simulation of an elastic server fleet behind a
load balancer with no queue: arrivals are admitted iff a running server
has a free slot, otherwise counted as blocked and lost. Policies are
invoked at epoch boundaries (the reactive baseline every simulated
minute), added servers boot for t_up, removals start t_down before the
boundary and drain rather than kill jobs, and billing charges every
started server-hour.

One run is strictly single-threaded and deterministic: identical
configurations (including the seed) produce bit-identical reports.
Event ties at an instant resolve in a fixed order: departures, boot
completions, acquisitions, policy action, then arrivals.
"""

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .billing import BillingModel
from .forecast import InsufficientDataError, fit_ets, forecast_next
from .policies import (
    PolicyDecision,
    ReactiveConfig,
    grassmann_decide,
    optimal_decide,
    qed_decide,
    reactive_step,
)
from .queueing import QueueParams, ServiceModel
from .workload import (
    ServiceTimeModel,
    WorkloadTrace,
    compute_epoch_stats,
    generate_arrivals,
)

PREDICTIVE_POLICIES = ("optimal", "qed", "grassmann")
ALL_POLICIES = PREDICTIVE_POLICIES + ("always_on", "reactive")

# event ordering at equal timestamps (departures are flushed before any
# control event fires)
_ORD_BOOT = 0
_ORD_ACQUIRE = 1
_ORD_DECIDE = 2
_ORD_BOUNDARY = 3
_ORD_MINUTE = 4

# sojourn histogram: 0.5 ms resolution up to 60 s plus an overflow bucket
_SOJ_BINS = 120_000
_SOJ_RANGE = (0.0, 60.0)

_SOJOURN_PERCENTILES = (25, 50, 75, 90, 95, 99)


@dataclass
class ServerRecord:
    """Lifecycle of one server, the unit of billing."""

    sid: int
    acquired_at: float
    boot_done_at: float
    removal_at: float | None = None
    terminated_at: float | None = None


@dataclass
class SimConfig:
    """Everything a simulation run depends on.

    The epoch length is billing.k (hours). The policy sees the service
    rate 1/service.mean_s as its configured mu; in connection mode each
    of the m slots serves one job at that rate and policies size the
    fleet at slot granularity.
    """

    trace: WorkloadTrace
    service: ServiceTimeModel
    billing: BillingModel
    policy: str = "optimal"
    n_fixed: int = 20
    reactive: ReactiveConfig = field(default_factory=ReactiveConfig)
    mode: str = "server"  # server | connection
    m: int = 1
    seed: int = 0
    arrival_ca2: float = 1.0
    season_len: int = 24
    history_cap_seasons: int = 14
    hayward: bool = True
    n_initial: int | None = None
    grassmann_var: str = "minute_var"  # minute_var | residual_var

    def __post_init__(self) -> None:
        if self.policy not in ALL_POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}, "
                             f"expected one of {ALL_POLICIES}")
        if self.mode not in ("server", "connection"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "connection" and self.m < 1:
            raise ValueError("connection mode needs m >= 1 slots per server")
        if self.mode == "server" and self.m != 1:
            raise ValueError("server mode is one job per server (m = 1)")
        if self.grassmann_var not in ("minute_var", "residual_var"):
            raise ValueError(f"unknown grassmann_var {self.grassmann_var!r}")
        epoch_s = self.billing.k * 3600.0
        if epoch_s <= max(self.billing.t_up, self.billing.t_down) * 3600.0:
            raise ValueError("epoch length must exceed both boot and teardown times")
        if self.season_len < 2:
            raise ValueError("season length must be >= 2 epochs")
        if not 0 <= self.n_fixed <= self.billing.n_max:
            raise ValueError("n_fixed must lie in [0, n_max]")
        if self.n_initial is not None and not 0 <= self.n_initial <= self.billing.n_max:
            raise ValueError("n_initial must lie in [0, n_max]")


@dataclass
class EpochRecord:
    """Per-epoch slice of the report."""

    epoch: int
    n: int
    n_plus: int
    n_minus: int
    forecast_lambda: float | None
    actual_lambda: float
    accepted: int
    blocked: int
    profit_cents: float


@dataclass
class ReportAggregate:
    total_profit_cents: float
    server_hours: int
    jobs_arrived: int
    jobs_lost: int
    mean_sojourn_s: float
    sojourn_scv: float


@dataclass
class SimulationReport:
    policy: str
    epochs: list[EpochRecord]
    aggregate: ReportAggregate
    sojourn_cdf: list[tuple[int, float]]
    manifest: dict | None = None


def _service_model_enum(kind: str) -> ServiceModel:
    if kind == "exponential":
        return ServiceModel.EXPONENTIAL
    if kind == "deterministic":
        return ServiceModel.DETERMINISTIC
    return ServiceModel.NORMAL_APPROX


def billing_settle(records: list[ServerRecord], horizon_s: float,
                   d_cents: float) -> tuple[int, float]:
    """Total started server-hours across the fleet and their cost.

    A server acquired at time a and terminated at time e (capped at the
    horizon) is billed ceil((e - a) / 3600) hours: every started hour is
    charged in full.
    """
    total = 0
    for rec in records:
        end = rec.terminated_at if rec.terminated_at is not None else horizon_s
        end = min(end, horizon_s)
        active = end - rec.acquired_at
        if active > 0:
            total += int(math.ceil(active / 3600.0 - 1e-12))
    return total, d_cents * total


def _hours_by_epoch(records: list[ServerRecord], horizon_s: float,
                    epoch_s: float, n_epochs: int) -> np.ndarray:
    """Billed hours attributed to the epoch in which each hour started."""
    hours = np.zeros(n_epochs, dtype=np.int64)
    for rec in records:
        end = rec.terminated_at if rec.terminated_at is not None else horizon_s
        end = min(end, horizon_s)
        active = end - rec.acquired_at
        if active <= 0:
            continue
        n_hours = int(math.ceil(active / 3600.0 - 1e-12))
        for j in range(n_hours):
            idx = int((rec.acquired_at + j * 3600.0) // epoch_s)
            hours[min(idx, n_epochs - 1)] += 1
    return hours


def _serve_span(arr, svc, heap, cap, admitted):
    """Admit arrivals against the in-flight departure heap.

    arr / svc are aligned python lists for this span, heap holds the
    departure times of jobs on running servers, cap is the running
    slot capacity. Admitted local indices are appended to `admitted`.
    """
    hpush, hpop = heapq.heappush, heapq.heappop
    append = admitted.append
    for i, t in enumerate(arr):
        while heap and heap[0] <= t:
            hpop(heap)
        if len(heap) < cap:
            hpush(heap, t + svc[i])
            append(i)


def _serve_span_util(arr, svc, heap, cap, admitted, t0, t1):
    """_serve_span plus the exact busy-server time integral over [t0, t1)."""
    hpush, hpop = heapq.heappush, heapq.heappop
    append = admitted.append
    busy = 0.0
    t_last = t0
    for i, t in enumerate(arr):
        while heap and heap[0] <= t:
            d = heap[0]
            busy += len(heap) * (d - t_last)
            t_last = d
            hpop(heap)
        if len(heap) < cap:
            busy += len(heap) * (t - t_last)
            t_last = t
            hpush(heap, t + svc[i])
            append(i)
    while heap and heap[0] <= t1:
        d = heap[0]
        busy += len(heap) * (d - t_last)
        t_last = d
        hpop(heap)
    busy += len(heap) * (t1 - t_last)
    return busy


def _flush(heap, t: float) -> None:
    while heap and heap[0] <= t:
        heapq.heappop(heap)


class _BaseEngine:
    """Shared orchestration: epochs, forecasting, billing, reporting."""

    def __init__(self, config: SimConfig):
        self.cfg = config
        self.billing = config.billing
        self.epoch_s = config.billing.k * 3600.0
        self.horizon = config.trace.duration_seconds
        self.n_epochs = int(math.ceil(self.horizon / self.epoch_s))
        seq = np.random.SeedSequence(config.seed)
        arrival_seed, service_seed = seq.spawn(2)
        self.arrival_rng = np.random.default_rng(arrival_seed)
        self.service_rng = np.random.default_rng(service_seed)
        self.records: list[ServerRecord] = []
        self.next_sid = 0

        self.arrivals = generate_arrivals(config.trace, config.arrival_ca2,
                                          self.arrival_rng)
        self.admitted = np.zeros(len(self.arrivals), dtype=bool)

        # full per-epoch observed mean rates are policy-independent
        edges = [min(e * self.epoch_s, self.horizon)
                 for e in range(self.n_epochs + 1)]
        self.epoch_edges = np.asarray(edges)
        idx = np.searchsorted(self.arrivals, self.epoch_edges)
        self.epoch_arrival_span = list(zip(idx[:-1], idx[1:]))
        lengths = np.diff(self.epoch_edges)
        counts = np.diff(idx)
        self.full_means = counts / lengths

        # per-epoch action counters and decisions
        self.n_plus_by_epoch = np.zeros(self.n_epochs, dtype=np.int64)
        self.n_minus_by_epoch = np.zeros(self.n_epochs, dtype=np.int64)
        self.forecast_by_epoch: list[float | None] = [None] * self.n_epochs
        self.target_by_epoch: list[int | None] = [None] * self.n_epochs
        self.residuals: list[float] = []  # settled forecast - actual, per epoch

        # current-epoch accumulators for the policy's world view
        self.cur_svc_chunks: list[np.ndarray] = []

        # sojourn accounting
        self.soj_hist = np.zeros(_SOJ_BINS + 1, dtype=np.int64)
        self.soj_sum = 0.0
        self.soj_sumsq = 0.0
        self.soj_n = 0

    # -- fleet bookkeeping ------------------------------------------------

    def new_server(self, acquired_at: float, boot_done_at: float) -> ServerRecord:
        rec = ServerRecord(self.next_sid, acquired_at, boot_done_at)
        self.next_sid += 1
        self.records.append(rec)
        epoch = min(int(acquired_at // self.epoch_s), self.n_epochs - 1)
        self.n_plus_by_epoch[epoch] += 1
        return rec

    def count_removal(self, at: float, decided_epoch: int | None = None) -> None:
        epoch = (decided_epoch if decided_epoch is not None
                 else min(int(at // self.epoch_s), self.n_epochs - 1))
        self.n_minus_by_epoch[epoch] += 1

    # -- traffic statistics ------------------------------------------------

    def observe_admitted(self, services: np.ndarray) -> None:
        if len(services) == 0:
            return
        self.cur_svc_chunks.append(services)
        hist, _ = np.histogram(services, bins=_SOJ_BINS, range=_SOJ_RANGE)
        self.soj_hist[:_SOJ_BINS] += hist
        self.soj_hist[_SOJ_BINS] += int((services >= _SOJ_RANGE[1]).sum())
        self.soj_sum += float(services.sum())
        self.soj_sumsq += float(services @ services)
        self.soj_n += len(services)

    def reset_epoch_accumulators(self) -> None:
        self.cur_svc_chunks = []

    def window_stats(self, epoch: int, until: float):
        """Observed stats of `epoch` over [start, until)."""
        start = epoch * self.epoch_s
        i0, i1 = np.searchsorted(self.arrivals, [start, until])
        window = self.arrivals[i0:i1]
        services = (np.concatenate(self.cur_svc_chunks)
                    if self.cur_svc_chunks else np.empty(0))
        return compute_epoch_stats(window, services, self.admitted[i0:i1],
                                   start, max(until - start, 1e-9))

    def forecast_rate(self, deciding_for: int, partial_mean: float) -> float:
        """Next-epoch arrival-rate forecast from the observed history.

        Fits the seasonal smoother once at least two seasons of epoch
        means exist (capped to the most recent history_cap_seasons);
        before that, falls back to the most recent observed epoch mean.
        """
        cfg = self.cfg
        series = [float(v) for v in self.full_means[:deciding_for - 1]]
        series.append(partial_mean)
        min_len = 2 * cfg.season_len
        if len(series) >= min_len and all(v > 0 for v in series):
            cap = cfg.history_cap_seasons * cfg.season_len
            tail = series[-cap:]
            try:
                model = fit_ets(tail, cfg.season_len)
                # align the seasonal phase with the absolute epoch index
                offset = len(series) - len(tail)
                model = replace(model, n_obs=model.n_obs + offset)
                return forecast_next(model, 1)
            except (InsufficientDataError, ValueError):
                pass
        return partial_mean

    def policy_params(self, lam_hat: float, stats) -> QueueParams:
        cfg = self.cfg
        mu = self.policy_mu()
        if stats is not None and stats.service_mean_hat > 0:
            sigma_s = stats.service_mean_hat * math.sqrt(max(stats.service_scv_hat, 0.0))
        else:
            sigma_s = cfg.service.sigma_s
        ca2 = stats.ca2_hat if stats is not None else cfg.arrival_ca2
        return QueueParams(lam=lam_hat, mu=mu, ca2=ca2, sigma_s=sigma_s,
                           service_model=_service_model_enum(cfg.service.kind))

    def policy_mu(self) -> float:
        return self.cfg.service.rate

    def policy_billing(self) -> BillingModel:
        return self.billing

    def decide(self, epoch: int, t_now: float, n_current: int) -> PolicyDecision:
        """Invoke the configured predictive policy for `epoch`."""
        cfg = self.cfg
        stats = self.window_stats(epoch - 1, t_now)
        # settle the previous forecast against its now-observed epoch
        prev = self.forecast_by_epoch[epoch - 1]
        if prev is not None:
            self.residuals.append(prev - float(self.full_means[epoch - 1]))
        lam_hat = self.forecast_rate(epoch, stats.mean_lambda)
        self.forecast_by_epoch[epoch] = lam_hat
        params = self.policy_params(lam_hat, stats)
        billing = self.policy_billing()
        if cfg.policy == "optimal":
            return optimal_decide(params, billing, n_current, cfg.hayward)
        if cfg.policy == "qed":
            return qed_decide(params, billing, n_current, cfg.hayward)
        mu = self.policy_mu()
        if cfg.grassmann_var == "residual_var" and len(self.residuals) >= 2:
            var_lam = float(np.var(np.asarray(self.residuals), ddof=1))
        else:
            var_lam = stats.lambda_variance
        return grassmann_decide(params, billing, var_lam / mu ** 2,
                                n_current, cfg.hayward)

    def initial_fleet_size(self) -> int:
        cfg = self.cfg
        if cfg.policy == "always_on":
            return cfg.n_fixed
        if cfg.n_initial is not None:
            return cfg.n_initial
        lam0 = float(cfg.trace.counts[0]) / 60.0
        params = QueueParams(lam=lam0, mu=self.policy_mu(), ca2=cfg.arrival_ca2,
                             sigma_s=cfg.service.sigma_s,
                             service_model=_service_model_enum(cfg.service.kind))
        n0 = qed_decide(params, self.policy_billing(), 0, cfg.hayward).n_next
        return self.slots_to_servers(n0)

    def slots_to_servers(self, n_slots: int) -> int:
        return n_slots

    # -- report assembly ----------------------------------------------------

    def build_report(self, fleet_at_start) -> SimulationReport:
        cfg = self.cfg
        horizon = self.horizon
        epoch_s = self.epoch_s
        accepted = np.array([int(self.admitted[i0:i1].sum())
                             for i0, i1 in self.epoch_arrival_span])
        arrived = np.array([i1 - i0 for i0, i1 in self.epoch_arrival_span])
        blocked = arrived - accepted
        hours = _hours_by_epoch(self.records, horizon, epoch_s, self.n_epochs)
        total_hours, _ = billing_settle(self.records, horizon, self.billing.d)

        epochs = []
        total_profit = 0.0
        for e in range(self.n_epochs):
            profit = self.billing.c * int(accepted[e]) - self.billing.d * int(hours[e])
            if self.billing.penalty is not None:
                profit -= self.billing.penalty * int(blocked[e])
            if self.billing.add_cost is not None:
                profit -= self.billing.add_cost * int(self.n_plus_by_epoch[e])
            if self.billing.remove_cost is not None:
                profit -= self.billing.remove_cost * int(self.n_minus_by_epoch[e])
            total_profit += profit
            n_col = (self.target_by_epoch[e] if self.target_by_epoch[e] is not None
                     else fleet_at_start[e])
            epochs.append(EpochRecord(
                epoch=e,
                n=int(n_col),
                n_plus=int(self.n_plus_by_epoch[e]),
                n_minus=int(self.n_minus_by_epoch[e]),
                forecast_lambda=self.forecast_by_epoch[e],
                actual_lambda=float(self.full_means[e]),
                accepted=int(accepted[e]),
                blocked=int(blocked[e]),
                profit_cents=profit,
            ))

        if self.soj_n > 0:
            mean_soj = self.soj_sum / self.soj_n
            var_soj = max(self.soj_sumsq / self.soj_n - mean_soj ** 2, 0.0)
            scv_soj = var_soj / mean_soj ** 2 if mean_soj > 0 else 0.0
        else:
            mean_soj, scv_soj = 0.0, 0.0

        aggregate = ReportAggregate(
            total_profit_cents=total_profit,
            server_hours=int(total_hours),
            jobs_arrived=int(len(self.arrivals)),
            jobs_lost=int(len(self.arrivals) - self.admitted.sum()),
            mean_sojourn_s=mean_soj,
            sojourn_scv=scv_soj,
        )
        return SimulationReport(policy=cfg.policy, epochs=epochs,
                                aggregate=aggregate,
                                sojourn_cdf=self.sojourn_percentiles())

    def sojourn_percentiles(self) -> list[tuple[int, float]]:
        """(percent, seconds) pairs from the sojourn histogram.

        Values are the right edge of the bin where the CDF crosses the
        level, so they are accurate to the 0.5 ms histogram resolution.
        """
        out = []
        total = int(self.soj_hist.sum())
        if total == 0:
            return [(p, 0.0) for p in _SOJOURN_PERCENTILES]
        cum = np.cumsum(self.soj_hist)
        width = (_SOJ_RANGE[1] - _SOJ_RANGE[0]) / _SOJ_BINS
        for p in _SOJOURN_PERCENTILES:
            idx = int(np.searchsorted(cum, p / 100.0 * total))
            value = _SOJ_RANGE[1] if idx >= _SOJ_BINS else (idx + 1) * width
            out.append((p, value))
        return out


class _ServerEngine(_BaseEngine):
    """Fast engine for server-level mode (one job per server).

    Server identity is observationally irrelevant to admission here, so
    the in-flight jobs live in a single departure heap and the fleet is
    a running-server counter. Removals take idle servers first, then
    drain the jobs finishing soonest (the one-job-per-server analogue of
    least busy); records pair removals with the oldest acquisitions.
    """

    def __init__(self, config: SimConfig):
        super().__init__(config)
        self.heap: list[float] = []
        self.running = 0
        self.active_fifo: list[ServerRecord] = []

    def add_servers(self, count: int, now: float, boot_hours: float) -> None:
        boot_done = now + boot_hours * 3600.0
        for _ in range(count):
            rec = self.new_server(now, boot_done)
            self.active_fifo.append(rec)
        if count:
            heapq.heappush(self.agenda, (boot_done, _ORD_BOOT, self.seq, "boot", count))
            self.seq += 1

    def remove_servers(self, count: int, now: float,
                       decided_epoch: int | None = None) -> None:
        count = min(count, self.running)
        if count <= 0:
            return
        _flush(self.heap, now)
        idle = self.running - len(self.heap)
        n_drain = max(0, count - idle)
        term_times = [now + self.billing.t_down * 3600.0] * min(count, idle)
        for _ in range(n_drain):
            dep = heapq.heappop(self.heap)
            term_times.append(dep + self.billing.t_down * 3600.0)
        term_times.sort()
        self.running -= count
        # oldest still-running servers leave first
        victims = [rec for rec in self.active_fifo if rec.boot_done_at <= now][:count]
        if len(victims) < count:
            victims = self.active_fifo[:count]
        for rec, term in zip(victims, term_times):
            rec.removal_at = now
            rec.terminated_at = term
            self.active_fifo.remove(rec)
            self.count_removal(now, decided_epoch)

    def run(self) -> SimulationReport:
        cfg = self.cfg
        epoch_s = self.epoch_s
        t_down_s = self.billing.t_down * 3600.0
        reactive = cfg.policy == "reactive"
        predictive = cfg.policy in PREDICTIVE_POLICIES

        self.agenda: list = []
        self.seq = 0

        def push(time, order, kind, payload=None):
            heapq.heappush(self.agenda, (time, order, self.seq, kind, payload))
            self.seq += 1

        n0 = self.initial_fleet_size()
        for _ in range(n0):
            rec = self.new_server(0.0, 0.0)
            self.active_fifo.append(rec)
        self.n_plus_by_epoch[0] = 0  # the initial fleet is not a scaling action
        self.running = n0
        self.target_by_epoch[0] = n0
        if predictive:
            self.forecast_by_epoch[0] = float(cfg.trace.counts[0]) / 60.0

        fleet_at_start = np.zeros(self.n_epochs, dtype=np.int64)
        fleet_at_start[0] = n0

        for e in range(1, self.n_epochs):
            if predictive:
                push(e * epoch_s - t_down_s, _ORD_DECIDE, "decide", e)
            push(e * epoch_s, _ORD_BOUNDARY, "boundary", e)
        if reactive:
            n_minutes = int(self.horizon // 60.0)
            for k in range(1, n_minutes + 1):
                push(k * 60.0, _ORD_MINUTE, "minute", k)
        push(self.horizon, _ORD_BOUNDARY, "end", None)

        window: list[float] = []
        minute_busy = 0.0
        minute_run = 0.0
        cursor = 0.0
        i_next = 0
        arrivals = self.arrivals

        while self.agenda:
            t_ev, order, _, kind, payload = heapq.heappop(self.agenda)
            t_ev = min(t_ev, self.horizon)
            if t_ev > cursor:
                j = int(np.searchsorted(arrivals, t_ev, side="left"))
                if j > i_next:
                    span = arrivals[i_next:j]
                    svc = self.cfg.service.sample(self.service_rng, j - i_next)
                    admitted_local: list[int] = []
                    if reactive:
                        minute_busy += _serve_span_util(
                            span.tolist(), svc.tolist(), self.heap,
                            self.running, admitted_local, cursor, t_ev)
                    else:
                        _serve_span(span.tolist(), svc.tolist(), self.heap,
                                    self.running, admitted_local)
                    if admitted_local:
                        loc = np.asarray(admitted_local)
                        self.admitted[i_next + loc] = True
                        self.observe_admitted(svc[loc])
                    i_next = j
                elif reactive:
                    # no arrivals in the span: advance the busy integral
                    tl = cursor
                    while self.heap and self.heap[0] <= t_ev:
                        d = self.heap[0]
                        minute_busy += len(self.heap) * (d - tl)
                        tl = d
                        heapq.heappop(self.heap)
                    minute_busy += len(self.heap) * (t_ev - tl)
                if reactive:
                    minute_run += self.running * (t_ev - cursor)
                cursor = t_ev
            _flush(self.heap, t_ev)

            if kind == "boot":
                self.running += payload
            elif kind == "decide":
                e = payload
                n_current = self.running + sum(
                    1 for r in self.active_fifo if r.boot_done_at > t_ev)
                decision = self.decide(e, t_ev, n_current)
                self.target_by_epoch[e] = decision.n_next
                if decision.n_minus > 0:
                    self.remove_servers(decision.n_minus, t_ev, decided_epoch=e)
                elif decision.n_plus > 0:
                    push(e * epoch_s, _ORD_ACQUIRE, "acquire", decision.n_plus)
            elif kind == "acquire":
                self.add_servers(payload, t_ev, self.billing.t_up)
            elif kind == "boundary":
                fleet_at_start[min(payload, self.n_epochs - 1)] = len(self.active_fifo)
                self.reset_epoch_accumulators()
            elif kind == "minute":
                util = minute_busy / minute_run if minute_run > 0 else 0.0
                window.append(util)
                minute_busy = 0.0
                minute_run = 0.0
                if len(window) >= cfg.reactive.window_minutes:
                    decision = reactive_step(window, self.running, cfg.reactive,
                                             self.billing.n_max)
                    if decision.n_plus > 0:
                        self.add_servers(decision.n_plus, t_ev, self.billing.t_up)
                        window.clear()
                    elif decision.n_minus > 0:
                        self.remove_servers(decision.n_minus, t_ev)
                        window.clear()
                    else:
                        window.pop(0)
            elif kind == "end":
                break

        return self.build_report(fleet_at_start)


class _ConnectionEngine(_BaseEngine):
    """General engine for connection-level mode: m slots per server,
    arrivals routed to the least-occupied running server, removals pick
    idle then least-busy servers and drain them. Tracks the job-server
    binding explicitly; intended for desk-scale comparisons, not for
    multi-million-arrival runs.

    Policies size the fleet at slot granularity (slot service rate is
    the configured per-job rate, slot cost d/m) and the slot target is
    rounded up to whole servers. Reactive utilization is sampled
    instantaneously at each minute mark as busy slots over running
    capacity.
    """

    def __init__(self, config: SimConfig):
        super().__init__(config)
        self.occupancy: dict[int, int] = {}
        self.rec_by_sid: dict[int, ServerRecord] = {}
        self.heap: list[tuple[float, int]] = []
        self.draining: dict[int, int] = {}

    def policy_billing(self) -> BillingModel:
        b = self.billing
        return BillingModel(c=b.c, d=b.d / self.cfg.m, k=b.k, t_up=b.t_up,
                            t_down=b.t_down, penalty=b.penalty,
                            add_cost=b.add_cost, remove_cost=b.remove_cost,
                            n_max=b.n_max * self.cfg.m)

    def slots_to_servers(self, n_slots: int) -> int:
        return int(math.ceil(n_slots / self.cfg.m))

    def _flush_conn(self, t: float) -> None:
        t_down_s = self.billing.t_down * 3600.0
        while self.heap and self.heap[0][0] <= t:
            dep, sid = heapq.heappop(self.heap)
            if sid in self.draining:
                self.draining[sid] -= 1
                if self.draining[sid] == 0:
                    self.rec_by_sid[sid].terminated_at = dep + t_down_s
                    del self.draining[sid]
            else:
                self.occupancy[sid] -= 1

    def run(self) -> SimulationReport:
        cfg = self.cfg
        epoch_s = self.epoch_s
        m = cfg.m
        t_down_s = self.billing.t_down * 3600.0
        predictive = cfg.policy in PREDICTIVE_POLICIES
        reactive = cfg.policy == "reactive"

        agenda: list = []
        seq = [0]

        def push(time, order, kind, payload=None):
            heapq.heappush(agenda, (time, order, seq[0], kind, payload))
            seq[0] += 1

        booting: dict[int, float] = {}

        def add_servers(count: int, now: float) -> None:
            boot_done = now + self.billing.t_up * 3600.0
            for _ in range(count):
                rec = self.new_server(now, boot_done)
                self.rec_by_sid[rec.sid] = rec
                booting[rec.sid] = boot_done
            if count:
                push(boot_done, _ORD_BOOT, "boot", count)

        def remove_servers(count: int, now: float,
                           decided_epoch: int | None = None) -> None:
            live = sorted(self.occupancy.items(), key=lambda kv: (kv[1], kv[0]))
            for sid, occ in live[:count]:
                rec = self.rec_by_sid[sid]
                rec.removal_at = now
                if occ == 0:
                    rec.terminated_at = now + t_down_s
                else:
                    self.draining[sid] = occ
                del self.occupancy[sid]
                self.count_removal(now, decided_epoch)

        n0 = self.initial_fleet_size()
        for _ in range(n0):
            rec = self.new_server(0.0, 0.0)
            self.rec_by_sid[rec.sid] = rec
            self.occupancy[rec.sid] = 0
        self.n_plus_by_epoch[0] = 0
        self.target_by_epoch[0] = n0
        if predictive:
            self.forecast_by_epoch[0] = float(cfg.trace.counts[0]) / 60.0
        fleet_at_start = np.zeros(self.n_epochs, dtype=np.int64)
        fleet_at_start[0] = n0

        for e in range(1, self.n_epochs):
            if predictive:
                push(e * epoch_s - t_down_s, _ORD_DECIDE, "decide", e)
            push(e * epoch_s, _ORD_BOUNDARY, "boundary", e)
        if reactive:
            for k in range(1, int(self.horizon // 60.0) + 1):
                push(k * 60.0, _ORD_MINUTE, "minute", k)
        push(self.horizon, _ORD_BOUNDARY, "end", None)

        arrivals = self.arrivals
        cursor = 0.0
        i_next = 0
        window: list[float] = []

        while agenda:
            t_ev, order, _, kind, payload = heapq.heappop(agenda)
            t_ev = min(t_ev, self.horizon)
            if t_ev > cursor:
                j = int(np.searchsorted(arrivals, t_ev, side="left"))
                if j > i_next:
                    span = arrivals[i_next:j].tolist()
                    svc = cfg.service.sample(self.service_rng, j - i_next)
                    svc_l = svc.tolist()
                    admitted_local = []
                    for i, t in enumerate(span):
                        self._flush_conn(t)
                        free = [sid for sid, occ in self.occupancy.items() if occ < m]
                        if free:
                            sid = min(free, key=lambda s: (self.occupancy[s], s))
                            self.occupancy[sid] += 1
                            heapq.heappush(self.heap, (t + svc_l[i], sid))
                            admitted_local.append(i)
                    if admitted_local:
                        loc = np.asarray(admitted_local)
                        self.admitted[i_next + loc] = True
                        self.observe_admitted(svc[loc])
                    i_next = j
                cursor = t_ev
            self._flush_conn(t_ev)

            if kind == "boot":
                for sid in [s for s, done in booting.items() if done <= t_ev]:
                    self.occupancy[sid] = 0
                    del booting[sid]
            elif kind == "decide":
                e = payload
                n_current_slots = (len(self.occupancy) + len(booting)) * m
                decision = self.decide(e, t_ev, n_current_slots)
                target_servers = self.slots_to_servers(decision.n_next)
                target_servers = min(target_servers, self.billing.n_max)
                self.target_by_epoch[e] = target_servers
                have = len(self.occupancy) + len(booting)
                if target_servers < have:
                    remove_servers(have - target_servers, t_ev, decided_epoch=e)
                elif target_servers > have:
                    push(e * epoch_s, _ORD_ACQUIRE, "acquire", target_servers - have)
            elif kind == "acquire":
                add_servers(payload, t_ev)
            elif kind == "boundary":
                fleet_at_start[min(payload, self.n_epochs - 1)] = (
                    len(self.occupancy) + len(booting))
                self.reset_epoch_accumulators()
            elif kind == "minute":
                busy_now = sum(self.occupancy.values())
                cap_now = len(self.occupancy) * m
                util = busy_now / cap_now if cap_now > 0 else 0.0
                window.append(util)
                if len(window) >= cfg.reactive.window_minutes:
                    decision = reactive_step(window, len(self.occupancy),
                                             cfg.reactive, self.billing.n_max)
                    if decision.n_plus > 0:
                        add_servers(decision.n_plus, t_ev)
                        window.clear()
                    elif decision.n_minus > 0:
                        remove_servers(decision.n_minus, t_ev)
                        window.clear()
                    else:
                        window.pop(0)
            elif kind == "end":
                break

        return self.build_report(fleet_at_start)


def run_simulation(config: SimConfig) -> SimulationReport:
    """Replay the configured trace against the simulated elastic fleet.

    Raises:
        ValueError: configuration inconsistencies, detected before the
            event loop starts.
    """
    if config.mode == "server":
        return _ServerEngine(config).run()
    return _ConnectionEngine(config).run()


# -- serialization -----------------------------------------------------------


def _epoch_row(rec: EpochRecord) -> dict:
    return {
        "epoch": rec.epoch,
        "n": rec.n,
        "n_plus": rec.n_plus,
        "n_minus": rec.n_minus,
        "forecast_lambda": rec.forecast_lambda,
        "actual_lambda": rec.actual_lambda,
        "accepted": rec.accepted,
        "blocked": rec.blocked,
        "profit_cents": round(rec.profit_cents, 4),
    }


def report_to_dict(report: SimulationReport) -> dict:
    agg = report.aggregate
    return {
        "policy": report.policy,
        "per_epoch": [_epoch_row(r) for r in report.epochs],
        "aggregate": {
            "total_profit_cents": round(agg.total_profit_cents, 4),
            "server_hours": agg.server_hours,
            "jobs_arrived": agg.jobs_arrived,
            "jobs_lost": agg.jobs_lost,
            "mean_sojourn_s": agg.mean_sojourn_s,
            "sojourn_scv": agg.sojourn_scv,
        },
        "sojourn_cdf": [[p, v] for p, v in report.sojourn_cdf],
        "manifest": report.manifest,
    }


def emit_report(report: SimulationReport, fmt: str = "json") -> str:
    """Serialize a report as JSON or CSV (one row per epoch plus an
    aggregate footer row). Output is byte-stable for a fixed report."""
    if fmt == "json":
        import json
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    agg = report.aggregate
    lines = ["epoch,n,n_plus,n_minus,forecast_lambda,actual_lambda,"
             "accepted,blocked,profit_cents"]
    for r in report.epochs:
        forecast = "" if r.forecast_lambda is None else repr(r.forecast_lambda)
        lines.append(f"{r.epoch},{r.n},{r.n_plus},{r.n_minus},{forecast},"
                     f"{r.actual_lambda!r},{r.accepted},{r.blocked},"
                     f"{r.profit_cents:.4f}")
    lines.append(f"aggregate,,,,,{agg.total_profit_cents:.4f},"
                 f"{agg.server_hours},{agg.jobs_arrived},{agg.jobs_lost}")
    lines.append("percentile," + ",".join(str(p) for p, _ in report.sojourn_cdf))
    lines.append("sojourn_s," + ",".join(repr(v) for _, v in report.sojourn_cdf))
    return "\n".join(lines) + "\n"
