"""Window-growth convergence study over one stored realization.

For a sweep of lateral window sizes N and margin exponents alpha, the
study carves a centered analysis window with plus-sampling margins of
``ceil(N**alpha)`` voxels out of a fixed volume and records the
tortuosity and constrictivity estimates.  With a large enough window the
estimates stop moving, and the margin exponent stops mattering; the
stabilization metrics below quantify both.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, fields

from .constrict import estimate_r_max, estimate_r_min, volume_fraction
from .grid import VoxelGrid, WindowSpec
from .morph import erosion_sqdist
from .rngmodel import Box, generate_multiphase
from .tortuosity import tortuosity_estimate

ESTIMATOR_NAMES = ("tau_hat", "r_min", "r_max", "beta", "p_hat")

CONVERGENCE_CSV_HEADER = "N,alpha,margin,tau_hat,r_min,r_max,beta,p_hat"


@dataclass(frozen=True)
class RunConfig:
    """Configuration of a convergence run (JSON keys match field names)."""

    lambda1: float
    lambda2: float
    box: Box
    l: float
    n_values: tuple[int, ...]
    alphas: tuple[float, ...]
    seed: int
    h: float = 1.0
    phase: int = 1
    point_margin: float = 50.0
    out_csv: str | None = None
    out_volume: str | None = None
    in_volume: str | None = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly ascending")
        if not self.n_values or not self.alphas:
            raise ValueError("n_values and alphas must be non-empty")
        height_slices(self.l, self.h)  # reject non-integral l/h early

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        raw = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("lambda1", "lambda2", "box", "l", "n_values", "alphas", "seed"):
            if key not in raw:
                raise ValueError(f"missing config key: {key}")
        box = raw.pop("box")
        if len(box) != 6:
            raise ValueError("box must be [x0, y0, z0, x1, y1, z1]")
        raw["box"] = Box(lo=tuple(box[:3]), hi=tuple(box[3:]))
        raw["n_values"] = tuple(int(v) for v in raw["n_values"])
        raw["alphas"] = tuple(float(v) for v in raw["alphas"])
        return cls(**raw)


@dataclass(frozen=True)
class ConvergenceRow:
    """One (N, alpha) sweep entry; margin is the nominal ceil(N**alpha)."""

    n: int
    alpha: float
    margin: int
    tau_hat: float
    r_min: float
    r_max: float
    beta: float
    p_hat: float
    runtime_ms: float = 0.0

    def estimate(self, name: str) -> float:
        return getattr(self, name)


def height_slices(l: float, h: float) -> int:
    """Transport height in voxel steps; l must be an integer multiple of h."""
    n = l / h
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError(f"transport length {l} is not a positive integer multiple of h={h}")
    return int(round(n))


def margin_voxels(n_lateral: int, alpha: float) -> int:
    return int(math.ceil(n_lateral ** alpha))


def centered_window(
    dims: tuple[int, int, int],
    height_n: int,
    n_lateral: int,
    margin: int,
    margin_below: int | None = None,
) -> WindowSpec:
    """Centered core window of lateral size N (N+1 voxel columns per axis).

    Margins are clamped to the space the stored grid actually offers;
    voxels beyond the grid are background anyway, so a clamped margin
    yields the same estimate the padded grid would.
    """
    nx, ny, nz = dims
    wx = n_lateral + 1
    if wx > nx or wx > ny:
        raise ValueError(f"lateral window size {n_lateral} does not fit dims {dims}")
    if height_n > nz - 1:
        raise ValueError(f"transport height {height_n} does not fit dims {dims}")
    ox = (nx - wx) // 2
    oy = (ny - wx) // 2
    oz = (nz - 1 - height_n) // 2
    m = min(margin, ox, nx - ox - wx, oy, ny - oy - wx)
    mb = min(margin if margin_below is None else margin_below, oz)
    return WindowSpec(
        lateral=(wx, wx),
        height_n=height_n,
        origin=(ox, oy, oz),
        margin_lateral=m,
        margin_below=mb,
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def convergence_csv_line(row: ConvergenceRow) -> str:
    return ",".join(
        _fmt(v)
        for v in (
            row.n, row.alpha, row.margin,
            row.tau_hat, row.r_min, row.r_max, row.beta, row.p_hat,
        )
    )


def run_convergence(config: RunConfig, volume: VoxelGrid | None = None) -> list[ConvergenceRow]:
    """Run the full (alpha, N) sweep on one realization.

    The analyzed volume comes from, in order of precedence: the ``volume``
    argument, ``config.in_volume`` (an MV1 file), or a fresh realization of
    the two-phase model with the config's intensities and seed.  Rows are
    ordered by (alpha, N) and written incrementally to ``config.out_csv``
    when set.
    """
    from .grid import PhaseVolume, load_volume, save_volume

    if volume is None:
        if config.in_volume is not None:
            loaded = load_volume(config.in_volume)
        else:
            result = generate_multiphase(
                (config.lambda1, config.lambda2),
                config.box,
                config.h,
                config.seed,
                point_margin=config.point_margin,
            )
            loaded = result.volume
            if config.out_volume:
                save_volume(loaded, config.out_volume)
        volume = loaded.select_phase(config.phase) if isinstance(loaded, PhaseVolume) else loaded

    n_height = height_slices(config.l, config.h)
    rows: list[ConvergenceRow] = []
    eff = erosion_sqdist(volume)  # window-independent, shared across the sweep
    r_max_by_n: dict[int, float] = {}  # r_max carries no margin dependence
    out = open(config.out_csv, "w", newline="") if config.out_csv else None
    try:
        if out:
            out.write(CONVERGENCE_CSV_HEADER + "\n")
        for alpha in sorted(config.alphas):
            for n_lateral in config.n_values:
                w = centered_window(
                    volume.dims, n_height, n_lateral, margin_voxels(n_lateral, alpha)
                )
                t0 = time.perf_counter()
                tort = tortuosity_estimate(volume, w)
                if n_lateral not in r_max_by_n:
                    r_max_by_n[n_lateral] = estimate_r_max(volume, w, _eff=eff)
                r_max = r_max_by_n[n_lateral]
                r_min = estimate_r_min(volume, w, _eff=eff)
                if r_min == -math.inf:
                    beta = 0.0
                elif r_max > 0:
                    beta = (r_min / r_max) ** 2
                else:
                    beta = 1.0 if r_min == 0 else 0.0
                runtime_ms = (time.perf_counter() - t0) * 1e3
                row = ConvergenceRow(
                    n=n_lateral,
                    alpha=alpha,
                    margin=margin_voxels(n_lateral, alpha),
                    tau_hat=tort.tau_hat,
                    r_min=r_min,
                    r_max=r_max,
                    beta=beta,
                    p_hat=volume_fraction(volume, w),
                    runtime_ms=runtime_ms,
                )
                rows.append(row)
                if out:
                    out.write(convergence_csv_line(row) + "\n")
                    out.flush()
    finally:
        if out:
            out.close()
    return rows


@dataclass(frozen=True)
class StabilizationReport:
    """Windowed stabilization metrics of a convergence sweep.

    ``rel_change[est][alpha]`` is the maximum relative step between
    consecutive entries among the last k values of N; ``spread[est]`` is
    the cross-alpha relative spread (max-min over min) at the largest N.
    """

    k: int
    rel_change: dict[str, dict[float, float]]
    spread: dict[str, float]


def _series(rows: list[ConvergenceRow]) -> dict[float, list[ConvergenceRow]]:
    by_alpha: dict[float, list[ConvergenceRow]] = {}
    for row in rows:
        by_alpha.setdefault(row.alpha, []).append(row)
    for alpha, group in by_alpha.items():
        by_alpha[alpha] = sorted(group, key=lambda r: r.n)
    return by_alpha


def _max_rel_step(values: list[float]) -> float:
    worst = 0.0
    for a, b in zip(values, values[1:]):
        if not (math.isfinite(a) and math.isfinite(b)) or a == 0:
            return math.inf
        worst = max(worst, abs(b - a) / abs(a))
    return worst


def stabilization_metric(rows: list[ConvergenceRow], k: int) -> StabilizationReport:
    """Max relative change over the last k N-values per alpha, plus cross-alpha spread."""
    if k < 2:
        raise ValueError("k must be at least 2")
    by_alpha = _series(rows)
    for alpha, group in by_alpha.items():
        if len(group) < k:
            raise ValueError(f"need at least {k} rows per alpha, got {len(group)} for {alpha}")
    rel_change: dict[str, dict[float, float]] = {name: {} for name in ESTIMATOR_NAMES}
    spread: dict[str, float] = {}
    for name in ESTIMATOR_NAMES:
        for alpha, group in by_alpha.items():
            tail = [row.estimate(name) for row in group[-k:]]
            rel_change[name][alpha] = _max_rel_step(tail)
        at_max_n = [group[-1].estimate(name) for group in by_alpha.values()]
        lo, hi = min(at_max_n), max(at_max_n)
        if not all(math.isfinite(v) for v in at_max_n) or lo <= 0:
            spread[name] = 0.0 if hi == lo else math.inf
        else:
            spread[name] = (hi - lo) / lo
    return StabilizationReport(k=k, rel_change=rel_change, spread=spread)


def stabilization_onset(rows: list[ConvergenceRow], name: str, threshold: float) -> int:
    """Smallest N from which every later relative step stays within threshold.

    Taken over all alphas: the reported N is the largest onset among them.
    """
    by_alpha = _series(rows)
    worst_n = 0
    for group in by_alpha.values():
        values = [row.estimate(name) for row in group]
        ns = [row.n for row in group]
        onset = ns[0]
        for i, (a, b) in enumerate(zip(values, values[1:])):
            bad = not (math.isfinite(a) and math.isfinite(b)) or a == 0 or abs(b - a) / abs(a) > threshold
            if bad:
                onset = ns[i + 1]
        worst_n = max(worst_n, onset)
    return worst_n
