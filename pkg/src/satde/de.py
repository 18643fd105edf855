"""Density evolution for plain BP and the saturated decoders, plus threshold search."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .density import (MIN_SUM, SUM_PRODUCT, GridSpec, QuantizedDensity,
                      battacharyya, delta, degradation_gap, functionals,
                      renormalize, wasserstein)
from .ensembles import DegreeDistribution, lambda_apply, rho_apply
from .saturation import (SaturationConfig, decompose, saturate,
                         symmetric_saturate, two_tier_saturate)

FULL_BP = "fullbp"
SAT_HARD = "sathard"
SAT_SYM = "satsym"
SAT_TWO_TIER = "sattwotier"
VARIANTS = (FULL_BP, SAT_HARD, SAT_SYM, SAT_TWO_TIER)
CHECK_RULES = (SUM_PRODUCT, MIN_SUM)

BP_TARGET = 1e-7
FLOOR_SLACK = 0.1


@dataclass(frozen=True)
class DEMode:
    variant: str = FULL_BP
    check_rule: str = SUM_PRODUCT

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"mode: unknown variant {self.variant!r}")
        if self.check_rule not in CHECK_RULES:
            raise ValueError(f"rule: unknown check rule {self.check_rule!r}")

    @property
    def saturated(self) -> bool:
        return self.variant != FULL_BP


@dataclass(frozen=True)
class StopRule:
    b_target: float | None = None
    stall_window: int | None = 50
    stall_rtol: float = 1e-9
    max_iters: int = 500


@dataclass
class TraceRow:
    iter: int
    B: float
    H: float
    Pe: float
    gamma_p: float | None = None
    gbar_Bm: float | None = None
    wasserstein_to_bp: float | None = None


@dataclass
class DETrace:
    rows: list = field(default_factory=list)
    outcome: str = "max_iters"
    final: QuantizedDensity | None = None
    densities: list | None = None

    @property
    def B(self) -> np.ndarray:
        return np.array([r.B for r in self.rows])

    @property
    def Pe(self) -> np.ndarray:
        return np.array([r.Pe for r in self.rows])

    @property
    def last(self) -> TraceRow:
        return self.rows[-1]

    def to_csv(self) -> str:
        cols = ["iter", "B", "H", "Pe", "gamma_p", "gbar_Bm", "wasserstein_to_bp"]
        lines = [",".join(cols)]
        for r in self.rows:
            lines.append(",".join(_fmt(getattr(r, k)) for k in cols))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def default_config(dd: DegreeDistribution, k_var: float, grid: GridSpec, mode: DEMode,
                   k_channel: float | None = None, tier_ratio: float | None = None) -> SaturationConfig:
    return SaturationConfig.build(k_var, dd.max_check_degree, grid, k_channel,
                                  tier_ratio if mode.variant == SAT_TWO_TIER else None, mode.check_rule)


def prepare_channel(mode: DEMode, c: QuantizedDensity, cfg: SaturationConfig | None) -> QuantizedDensity:
    """Channel density actually fed to the decoder.

    Hard-saturating decoders see the channel clamped at k_channel.  The
    symmetric variant is defined as the symmetric saturation of the plain BP
    update, so it keeps the untouched channel.
    """
    if mode.variant in (SAT_HARD, SAT_TWO_TIER):
        return saturate(c, cfg.k_channel)
    return c


def de_step(mode: DEMode, dd: DegreeDistribution, c: QuantizedDensity, x: QuantizedDensity,
            cfg: SaturationConfig | None = None) -> QuantizedDensity:
    """One DE iteration; c must already be prepared with prepare_channel."""
    y = rho_apply(dd, x, mode.check_rule)
    z = renormalize(lambda_apply(dd, c, y))
    if mode.variant == FULL_BP:
        return z
    if mode.variant == SAT_HARD:
        return saturate(z, cfg.k_var)
    if mode.variant == SAT_SYM:
        return symmetric_saturate(z, cfg.k_var, tol=math.inf)
    return two_tier_saturate(z, cfg)


def success_target(mode: DEMode, cfg: SaturationConfig | None) -> float:
    if mode.saturated:
        return (1 + FLOOR_SLACK) * math.exp(-cfg.k_var / 2)
    return BP_TARGET


def reached(mode: DEMode, B: float, target: float) -> bool:
    return B <= target if mode.saturated else B < target


def _row(i: int, x: QuantizedDensity, mode: DEMode, cfg) -> TraceRow:
    f = functionals(x)
    row = TraceRow(i, f.battacharyya, f.entropy, f.error_prob)
    if mode.saturated and x.max_abs() <= cfg.k_var:
        d = decompose(x, cfg.k_var)
        row.gamma_p, row.gbar_Bm = d.gp, d.gbar_Bm
    return row


def run_de(mode: DEMode, dd: DegreeDistribution, channel, cfg: SaturationConfig | None,
           grid: GridSpec, stop: StopRule | None = None, with_bp: bool = False,
           keep_densities: bool = False) -> DETrace:
    """Iterate from Delta_0 until the target, a stall, or max_iters.

    `channel` is a ChannelFamily or a ready density on `grid`.
    """
    stop = stop or StopRule(b_target=success_target(mode, cfg))
    c = channel if isinstance(channel, QuantizedDensity) else ch.channel_density(channel, grid)
    c_used = prepare_channel(mode, c, cfg)
    x = delta(grid, 0.0)
    x_bp = x
    bp_mode = DEMode(FULL_BP, mode.check_rule)
    trace = DETrace()
    trace.densities = [x] if keep_densities else None
    row = _row(0, x, mode, cfg)
    if with_bp:
        row.wasserstein_to_bp = 0.0
    trace.rows.append(row)
    Bs = [row.B]
    for i in range(1, stop.max_iters + 1):
        x = de_step(mode, dd, c_used, x, cfg)
        row = _row(i, x, mode, cfg)
        if with_bp:
            x_bp = de_step(bp_mode, dd, c, x_bp)
            row.wasserstein_to_bp = wasserstein(x_bp, x)
        trace.rows.append(row)
        if keep_densities:
            trace.densities.append(x)
        Bs.append(row.B)
        if stop.b_target is not None and reached(mode, row.B, stop.b_target):
            trace.outcome = "target"
            break
        w = stop.stall_window
        if w and i >= w:
            old = Bs[i - w]
            if abs(row.B - old) <= stop.stall_rtol * abs(old):
                trace.outcome = "stall"
                break
    trace.final = x
    return trace


# ---------------------------------------------------------------- thresholds

class NonMonotoneError(RuntimeError):
    def __init__(self, lo: float, hi: float):
        super().__init__(f"success region is not monotone inside [{lo:.12g}, {hi:.12g}]")
        self.bracket = (lo, hi)


@dataclass(frozen=True)
class ThresholdResult:
    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


DEFAULT_BRACKETS = {ch.BEC: (0.0, 1.0), ch.BSC: (0.0, 0.5), ch.BIAWGN: (0.4, 2.0)}


def decodes(mode: DEMode, dd: DegreeDistribution, kind: str, param: float, cfg, grid: GridSpec,
            max_iters: int = 5000) -> bool:
    fam = ch.ChannelFamily(kind, param)
    trace = run_de(mode, dd, fam, cfg, grid, StopRule(success_target(mode, cfg), max_iters=max_iters))
    return trace.outcome == "target"


def _probe(args):
    return decodes(*args)


def find_threshold(mode: DEMode, dd: DegreeDistribution, kind: str, cfg, grid: GridSpec,
                   tol: float = 1e-4, bracket: tuple[float, float] | None = None,
                   scan_points: int = 5, jobs: int = 1, max_iters: int = 5000) -> ThresholdResult:
    """Bisection on the channel parameter.

    A coarse scan first checks that successes precede failures; any other
    pattern raises NonMonotoneError with the offending bracket.
    """
    lo, hi = bracket or DEFAULT_BRACKETS[kind]
    pts = list(np.linspace(lo, hi, scan_points))
    if kind == ch.BIAWGN:
        pts = [p for p in pts if p > 0]
    args = [(mode, dd, kind, float(p), cfg, grid, max_iters) for p in pts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            ok = list(ex.map(_probe, args))
    else:
        ok = [_probe(a) for a in args]
    first_fail = next((i for i, o in enumerate(ok) if not o), len(ok))
    if any(ok[first_fail:]):
        j = first_fail + ok[first_fail:].index(True)
        raise NonMonotoneError(pts[first_fail], pts[j])
    if first_fail == 0:
        return ThresholdResult(pts[0], pts[0])
    if first_fail == len(ok):
        return ThresholdResult(pts[-1], pts[-1])
    a, b = pts[first_fail - 1], pts[first_fail]
    while b - a > tol:
        m = 0.5 * (a + b)
        if decodes(mode, dd, kind, m, cfg, grid, max_iters):
            a = m
        else:
            b = m
    return ThresholdResult(a, b)


# ---------------------------------------------------------------- perturbation bounds

@dataclass
class PerturbationRow:
    iter: int
    distance: float
    distance_bound: float
    degradation_gap: float
    B_bp: float
    B_sym: float
    B_bound: float


@dataclass
class PerturbationReport:
    rows: list
    degradation_tol: float
    distance_tol: float

    @property
    def ordering_ok(self) -> bool:
        return all(r.degradation_gap <= self.degradation_tol for r in self.rows)

    @property
    def distance_ok(self) -> bool:
        return all(r.distance <= r.distance_bound + self.distance_tol for r in self.rows)

    @property
    def battacharyya_ok(self) -> bool:
        return all(r.B_sym <= r.B_bound + self.distance_tol for r in self.rows)

    @property
    def ok(self) -> bool:
        return self.ordering_ok and self.distance_ok and self.battacharyya_ok

    def failures(self) -> list[str]:
        out = []
        for r in self.rows:
            if r.degradation_gap > self.degradation_tol:
                out.append(f"iter {r.iter}: ordering gap {r.degradation_gap:.6g} > {self.degradation_tol:.6g}")
            if r.distance > r.distance_bound + self.distance_tol:
                out.append(f"iter {r.iter}: distance {r.distance:.6g} > bound {r.distance_bound:.6g}")
            if r.B_sym > r.B_bound + self.distance_tol:
                out.append(f"iter {r.iter}: B {r.B_sym:.6g} > bound {r.B_bound:.6g}")
        return out


def distance_bound(dd: DegreeDistribution, k_var: float, ell: int) -> float:
    """2 exp(-K + ell*ln(2(d_l-1)(d_r-1))) with edge-perspective average degrees."""
    return 2.0 * math.exp(-k_var + ell * math.log(2 * (dd.d_l_avg - 1) * (dd.d_r_avg - 1)))


def perturbation_check(dd: DegreeDistribution, channel, k_var: float, ell: int,
                       grid: GridSpec | None = None, degradation_tol: float | None = None,
                       distance_tol: float | None = None,
                       rule: str = SUM_PRODUCT) -> PerturbationReport:
    """Run plain BP and symmetric-saturation DE side by side for ell iterations."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    grid = grid or GridSpec.default(k_var)
    k = grid.snap(k_var)
    cfg = SaturationConfig.build(k, dd.max_check_degree, grid, rule=rule)
    c = channel if isinstance(channel, QuantizedDensity) else ch.channel_density(channel, grid)
    if degradation_tol is None:
        degradation_tol = 5 * grid.spacing
    if distance_tol is None:
        distance_tol = grid.spacing * math.exp(-k / 2)
    bp, sym = DEMode(FULL_BP, rule), DEMode(SAT_SYM, rule)
    t = s = delta(grid, 0.0)
    rows = []
    for i in range(1, ell + 1):
        t = de_step(bp, dd, c, t)
        s = de_step(sym, dd, c, s, cfg)
        db = distance_bound(dd, k, i)
        bt, bs = battacharyya(t), battacharyya(s)
        b_slack = 2 * math.sqrt(2) * math.sqrt(db / 2)
        rows.append(PerturbationRow(i, wasserstein(t, s), db, degradation_gap(t, s), bt, bs, bt + b_slack))
    return PerturbationReport(rows, degradation_tol, distance_tol)
