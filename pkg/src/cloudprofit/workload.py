"""Workload traces: ingestion from counts/timestamp files, a synthetic
diurnal generator, realization of arrival event streams with a chosen
interarrival dispersion, and per-epoch traffic statistics.

A trace is a dense per-minute arrival-count array. All randomness flows
through numpy Generators seeded per run, so identical seeds produce
bit-identical traces and event streams.
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np


class TraceOrigin(Enum):
    COUNTS_FILE = "counts_file"
    TIMESTAMPS_FILE = "timestamps_file"
    SYNTHETIC = "synthetic"


@dataclass
class WorkloadTrace:
    """Gap-free per-minute arrival counts starting at minute 0."""

    counts: np.ndarray
    origin: TraceOrigin

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or len(self.counts) == 0:
            raise ValueError("trace must hold at least one minute of counts")
        if np.any(self.counts < 0):
            raise ValueError("arrival counts must be >= 0")

    @property
    def duration_minutes(self) -> int:
        return len(self.counts)

    @property
    def duration_seconds(self) -> float:
        return 60.0 * len(self.counts)

    @property
    def total_jobs(self) -> int:
        return int(self.counts.sum())

    def minute_rates(self) -> list[tuple[int, int]]:
        """(minute index, arrival count) pairs, strictly increasing minutes."""
        return list(enumerate(int(c) for c in self.counts))

    def scaled(self, factor: float) -> "WorkloadTrace":
        """Trace with all counts multiplied by factor and rounded."""
        if factor <= 0:
            raise ValueError("rate scale factor must be positive")
        return WorkloadTrace(np.rint(self.counts * factor).astype(np.int64),
                             self.origin)


@dataclass
class ServiceTimeModel:
    """Two-moment service-time model used by the simulator's samplers.

    Lognormal parameters come from moment matching:
    sigma_log^2 = ln(1 + scv), mu_log = ln(mean) - sigma_log^2 / 2.
    """

    kind: str = "exponential"  # exponential | lognormal | deterministic
    mean_s: float = 0.035
    scv: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "lognormal", "deterministic"):
            raise ValueError(f"unknown service model kind: {self.kind!r}")
        if self.mean_s <= 0:
            raise ValueError(f"service mean must be positive, got {self.mean_s}")
        if self.scv < 0:
            raise ValueError(f"service scv must be >= 0, got {self.scv}")

    @property
    def rate(self) -> float:
        return 1.0 / self.mean_s

    @property
    def sigma_s(self) -> float:
        return self.mean_s * math.sqrt(self.scv)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(self.mean_s, n)
        if self.kind == "deterministic":
            return np.full(n, self.mean_s)
        sigma2 = math.log1p(self.scv)
        mu_log = math.log(self.mean_s) - 0.5 * sigma2
        return rng.lognormal(mu_log, math.sqrt(sigma2), n)


@dataclass
class EpochStats:
    """Observed traffic statistics of one epoch, the policy's world view."""

    mean_lambda: float
    lambda_variance: float
    ca2_hat: float
    service_mean_hat: float
    service_scv_hat: float
    accepted: int
    blocked: int
    ca2_degenerate: bool = False


def parse_counts_csv(stream) -> WorkloadTrace:
    """Parse "minute,count" lines (optional header) into a trace.

    Minutes are rebased so the earliest one becomes 0; missing minutes
    in between are filled with count 0 and reported with a warning.
    Malformed lines raise immediately with their line number.
    """
    pairs: dict[int, int] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and not line[0].isdigit():
            continue  # header
        parts = line.split(",")
        try:
            minute, count = int(parts[0]), int(parts[1])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {line!r}") from exc
        if minute < 0 or count < 0:
            raise ValueError(f"line {lineno}: negative minute or count in {line!r}")
        if minute in pairs:
            raise ValueError(f"line {lineno}: duplicate minute {minute}")
        pairs[minute] = count
    if not pairs:
        raise ValueError("empty input: no counts parsed")
    lo, hi = min(pairs), max(pairs)
    counts = np.zeros(hi - lo + 1, dtype=np.int64)
    missing = []
    for minute in range(lo, hi + 1):
        if minute in pairs:
            counts[minute - lo] = pairs[minute]
        else:
            missing.append(minute)
    if missing:
        warnings.warn(f"{len(missing)} missing minute(s) filled with 0 "
                      f"(first: {missing[0]})", stacklevel=2)
    return WorkloadTrace(counts, TraceOrigin.COUNTS_FILE)


def parse_timestamps(stream, bucket_minutes: int = 1) -> WorkloadTrace:
    """Bucket one-per-line epoch-second timestamps into per-minute counts.

    Timestamps need not be sorted; each trace minute aggregates
    ``bucket_minutes`` worth of wall time, rebased at the earliest
    timestamp's bucket.
    """
    if bucket_minutes < 1:
        raise ValueError("bucket width must be at least one minute")
    stamps = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: cannot parse timestamp {line!r}") from exc
        if value < 0:
            raise ValueError(f"line {lineno}: negative timestamp {value}")
        stamps.append(value)
    if not stamps:
        raise ValueError("empty input: no timestamps parsed")
    arr = np.asarray(stamps)
    width = 60.0 * bucket_minutes
    buckets = np.floor(arr / width).astype(np.int64)
    buckets -= buckets.min()
    counts = np.bincount(buckets)
    return WorkloadTrace(counts.astype(np.int64), TraceOrigin.TIMESTAMPS_FILE)


def _unit_mean_gaps(rng: np.random.Generator, n: int, ca2: float) -> np.ndarray:
    """Draw n interarrival gaps with mean 1 and squared CV ca2.

    ca2 = 1 is exponential; ca2 < 1 an Erlang-k with k = round(1/ca2);
    ca2 > 1 a balanced two-phase hyperexponential matched to both
    moments.
    """
    if abs(ca2 - 1.0) < 1e-12:
        return rng.exponential(1.0, n)
    if ca2 < 1.0:
        k = max(1, round(1.0 / ca2))
        return rng.gamma(k, 1.0 / k, n)
    p1 = 0.5 * (1.0 + math.sqrt((ca2 - 1.0) / (ca2 + 1.0)))
    scale1, scale2 = 1.0 / (2.0 * p1), 1.0 / (2.0 * (1.0 - p1))
    pick = rng.random(n) < p1
    return rng.exponential(1.0, n) * np.where(pick, scale1, scale2)


def generate_arrivals(trace: WorkloadTrace, ca2_target: float = 1.0,
                      seed: int | np.random.Generator = 0) -> np.ndarray:
    """Realize the trace as sorted arrival times in seconds.

    A unit-rate renewal stream with the requested interarrival
    dispersion is warped through the trace's cumulative-work curve
    (count/60 jobs per second within each minute), so expected
    per-minute totals equal the trace counts and minutes with zero
    count produce no arrivals. Deterministic for a fixed seed.
    """
    if ca2_target <= 0:
        raise ValueError(f"ca2 target must be positive, got {ca2_target}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = trace.counts.astype(float)
    total = counts.sum()
    if total <= 0:
        return np.empty(0)

    active = np.nonzero(counts > 0)[0]
    work_hi = np.cumsum(counts[active])
    work_lo = work_hi - counts[active]

    # draw unit-mean gaps until the cumulative work covers the trace
    chunks = []
    carried = 0.0
    need = int(total + 10.0 * math.sqrt(total) + 10)
    while True:
        gaps = _unit_mean_gaps(rng, need, ca2_target)
        work = carried + np.cumsum(gaps)
        chunks.append(work)
        if work[-1] >= total:
            break
        carried = float(work[-1])
        need = max(1024, int(total - carried) + 64)
    work = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    work = work[work < total]

    seg = np.searchsorted(work_hi, work, side="right")
    minute = active[seg]
    frac = (work - work_lo[seg]) / counts[minute]
    return 60.0 * minute + 60.0 * frac


def synthesize_diurnal(days: int, base_rate: float, amplitude: float,
                       noise_scv: float = 0.0,
                       seed: int | np.random.Generator = 0,
                       spikes: list[tuple[int, float, int]] | None = None) -> WorkloadTrace:
    """Synthetic day/night workload at one-minute granularity.

    The noiseless per-minute rate is
        rate(t) = base_rate + amplitude * sin(2 pi t / 1440 - pi / 2)
    (trough at midnight, peak at noon), scaled by multiplicative
    lognormal noise of the given squared CV. Optional spikes multiply
    the rate by a factor over a minute range: (start_minute, factor,
    duration_minutes).

    Args:
        days: trace length in days.
        base_rate: mean arrivals per minute.
        amplitude: diurnal swing, must be < base_rate.
        noise_scv: squared CV of the per-minute multiplicative noise.
        seed: RNG seed (or generator) for the noise.
        spikes: optional multiplicative rate overrides.
    """
    if days < 1:
        raise ValueError("need at least one day")
    if base_rate <= 0:
        raise ValueError("base rate must be positive")
    if not 0 <= amplitude < base_rate:
        raise ValueError("amplitude must satisfy 0 <= amplitude < base_rate")
    if noise_scv < 0:
        raise ValueError("noise scv must be >= 0")
    t = np.arange(days * 1440, dtype=float)
    rate = base_rate + amplitude * np.sin(2.0 * math.pi * t / 1440.0 - math.pi / 2.0)
    if spikes:
        for start, factor, duration in spikes:
            if duration < 1 or factor < 0:
                raise ValueError(f"bad spike ({start}, {factor}, {duration})")
            rate[start:start + duration] *= factor
    if noise_scv > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        sigma2 = math.log1p(noise_scv)
        noise = rng.lognormal(-0.5 * sigma2, math.sqrt(sigma2), len(rate))
        rate = rate * noise
    counts = np.rint(np.maximum(rate, 0.0)).astype(np.int64)
    return WorkloadTrace(counts, TraceOrigin.SYNTHETIC)


def compute_epoch_stats(arrival_times, service_samples, accepted_flags,
                        epoch_start_s: float, epoch_length_s: float) -> EpochStats:
    """Estimate the traffic parameters observed during one epoch.

    Args:
        arrival_times: all arrival instants inside the epoch (seconds).
        service_samples: service durations of the epoch's completed jobs.
        accepted_flags: admission flag per arrival (same order).
        epoch_start_s / epoch_length_s: the observation window.

    Degenerate windows (fewer than two interarrival gaps, or no
    completions) are flagged rather than raised; downstream consumers
    substitute defaults.
    """
    if epoch_length_s <= 0:
        raise ValueError("epoch length must be positive")
    times = np.asarray(arrival_times, dtype=float)
    flags = np.asarray(accepted_flags, dtype=bool)
    if times.shape != flags.shape:
        raise ValueError("arrival times and flags must align")
    services = np.asarray(service_samples, dtype=float)

    n = len(times)
    accepted = int(flags.sum())
    mean_lambda = n / epoch_length_s

    # per-minute rate variance over the whole minutes of the window
    whole_minutes = int(epoch_length_s // 60.0)
    if whole_minutes >= 2 and n > 0:
        rel = times - epoch_start_s
        idx = np.floor(rel / 60.0).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < whole_minutes)]
        per_min = np.bincount(idx, minlength=whole_minutes) / 60.0
        lambda_variance = float(per_min.var(ddof=1))
    else:
        lambda_variance = 0.0

    ca2_degenerate = False
    if n >= 3:
        gaps = np.diff(times)
        gap_mean = gaps.mean()
        if gap_mean > 0:
            ca2_hat = float(gaps.var(ddof=1) / gap_mean ** 2)
        else:
            ca2_hat, ca2_degenerate = 1.0, True
    else:
        ca2_hat, ca2_degenerate = 1.0, True

    if len(services) >= 2:
        s_mean = float(services.mean())
        service_scv_hat = float(services.var(ddof=1) / s_mean ** 2) if s_mean > 0 else 0.0
        service_mean_hat = s_mean
    elif len(services) == 1:
        service_mean_hat, service_scv_hat = float(services[0]), 0.0
    else:
        service_mean_hat, service_scv_hat = 0.0, 0.0

    return EpochStats(mean_lambda=mean_lambda,
                      lambda_variance=lambda_variance,
                      ca2_hat=ca2_hat,
                      service_mean_hat=service_mean_hat,
                      service_scv_hat=service_scv_hat,
                      accepted=accepted,
                      blocked=n - accepted,
                      ca2_degenerate=ca2_degenerate)
