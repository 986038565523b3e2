"""Economic constants of the hosting contract.

Conventions used throughout the package: money is in currency cents,
revenue `c` is cents per completed job, cost `d` is cents per started
server-hour, and the epoch length `k` plus the boot / teardown times
`t_U` / `t_D` are expressed in hours at this interface.
"""

from dataclasses import dataclass


@dataclass
class BillingModel:
    """Per-job revenue, per-server-hour cost and timing constants.

    Attributes:
        c: revenue per completed job (cents). Sub-cent values are normal.
        d: cost per server-hour (cents).
        k: epoch length between allocation decisions (hours).
        t_up: mean server boot time (hours), charged from acquisition.
        t_down: worst-case server teardown time (hours).
        penalty: optional denial-of-service penalty per lost job (cents).
        add_cost: optional one-off cost per acquired server (cents).
        remove_cost: optional one-off cost per released server (cents).
        n_max: hard cap on fleet size.
    """

    c: float
    d: float
    k: float = 1.0
    t_up: float = 0.0
    t_down: float = 0.0
    penalty: float | None = None
    add_cost: float | None = None
    remove_cost: float | None = None
    n_max: int = 1000

    def __post_init__(self) -> None:
        if self.c < 0:
            raise ValueError(f"revenue per job must be >= 0, got {self.c}")
        if self.d < 0:
            raise ValueError(f"cost per server-hour must be >= 0, got {self.d}")
        if self.k <= 0:
            raise ValueError(f"epoch length must be positive, got {self.k}")
        if not 0 <= self.t_up <= self.k:
            raise ValueError(f"boot time must lie in [0, k], got {self.t_up}")
        if not 0 <= self.t_down <= self.k:
            raise ValueError(f"teardown time must lie in [0, k], got {self.t_down}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
