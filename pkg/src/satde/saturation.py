"""Saturation operators and the atom/interior split they induce."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import (MIN_SUM, SUM_PRODUCT, GridSpec, QuantizedDensity,
                      battacharyya, is_symmetric)


class SaturationConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


def check_level(k_var: float, max_check_degree: int, rule: str = SUM_PRODUCT) -> float:
    """Check output magnitude when every other input has magnitude k_var."""
    if rule == MIN_SUM:
        return k_var
    # 2 atanh(tanh(k/2)^(d-1)) in log form: tanh(k/2)^(d-1) = exp((d-1) log tanh(k/2))
    s = (max_check_degree - 1) * (math.log(-math.expm1(-k_var)) - math.log1p(math.exp(-k_var)))
    return math.log1p(math.exp(s)) - math.log(-math.expm1(s))


@dataclass(frozen=True)
class SaturationConfig:
    k_var: float
    k_check: float
    k_channel: float
    k_alt: float | None = None
    tier_ratio: float | None = None

    def __post_init__(self):
        if not self.k_var > 0:
            raise SaturationConfigError("k_var", "must be positive")
        if not 2 * self.k_check > self.k_var:
            raise SaturationConfigError(
                "k_var", f"2*k_check={2 * self.k_check:.6g} must exceed k_var={self.k_var:.6g}; raise k_var")
        if not 0 < self.k_channel <= 2 * self.k_check - self.k_var + 1e-12:
            raise SaturationConfigError(
                "k_channel", f"must lie in (0, 2*k_check - k_var = {2 * self.k_check - self.k_var:.6g}]")
        if self.k_alt is not None:
            if self.tier_ratio is None or not 0.5 < self.tier_ratio <= 1:
                raise SaturationConfigError("tier_ratio", "must lie in (1/2, 1]")
            if not 0 < self.k_alt <= self.k_var:
                raise SaturationConfigError("k_alt", "must lie in (0, k_var]")
            if 2 * self.k_check - self.k_var < self.k_channel + self.k_alt - 1e-12:
                raise SaturationConfigError(
                    "k_alt", "two-tier mode needs 2*k_check - k_var >= k_channel + k_alt")

    @property
    def two_tier(self) -> bool:
        return self.k_alt is not None

    @classmethod
    def build(cls, k_var: float, max_check_degree: int, grid: GridSpec | None = None,
              k_channel: float | None = None, tier_ratio: float | None = None,
              rule: str = SUM_PRODUCT) -> "SaturationConfig":
        """Derive k_check, fill defaults and snap levels to the grid.

        k_channel defaults to its largest admissible value 2*k_check - k_var
        (minus k_alt in two-tier mode), rounded down to a grid point.
        """
        snap = (lambda v: grid.snap(v)) if grid is not None else (lambda v: v)
        floor = (lambda v: math.floor(v / grid.spacing + 1e-9) * grid.spacing) if grid is not None else (lambda v: v)
        if grid is not None and k_var > grid.half_range:
            raise SaturationConfigError("k_var", f"exceeds grid half_range {grid.half_range}")
        kv = snap(k_var)
        kc = check_level(kv, max_check_degree, rule)
        k_alt = snap(tier_ratio * kv) if tier_ratio is not None else None
        room = 2 * kc - kv - (k_alt or 0.0)
        kch = floor(room) if k_channel is None else snap(k_channel)
        return cls(kv, kc, kch, k_alt, tier_ratio)


@dataclass(frozen=True, eq=False)
class MixtureDecomposition:
    gamma: float
    p: float
    level: float
    interior: QuantizedDensity | None  # None when gamma == 1

    @property
    def q(self) -> float:
        return math.exp(self.level / 2) * self.p

    @property
    def q_tilde(self) -> float:
        return math.exp(-self.level / 2) * (1 - self.p)

    @property
    def gp(self) -> float:
        return self.gamma * self.p

    @property
    def gbar_Bm(self) -> float:
        if self.interior is None:
            return 0.0
        return (1 - self.gamma) * battacharyya(self.interior)

    def reconstruct(self, grid: GridSpec) -> QuantizedDensity:
        m = np.zeros(grid.bin_count)
        if self.interior is not None:
            m += (1 - self.gamma) * self.interior.interior_mass
        i_pos = grid.index_of(self.level)
        i_neg = grid.index_of(-self.level)
        m[i_pos] += self.gamma * (1 - self.p)
        m[i_neg] += self.gamma * self.p
        return QuantizedDensity(grid, m)


def _level_index(grid: GridSpec, k: float) -> int:
    if k > grid.half_range * (1 + 1e-12) or k <= 0:
        raise ValueError(f"saturation level {k} outside (0, half_range={grid.half_range}]")
    return int(round(abs(k) / grid.spacing))


def _split_at(a: QuantizedDensity, j: int):
    """(interior mass vector with |v| >= j*h removed, mass at >= +k, mass at <= -k)."""
    M = a.grid.center
    m = a.interior_mass.copy()
    hi = m[M + j:].sum() + a.atom_pos_inf
    lo = m[:M - j + 1].sum() + a.atom_neg_inf
    m[M + j:] = 0.0
    m[:M - j + 1] = 0.0
    return m, float(hi), float(lo)


def saturate(a: QuantizedDensity, k: float) -> QuantizedDensity:
    """Clamp magnitudes to k (snapped to the grid), keeping the sign."""
    j = _level_index(a.grid, k)
    M = a.grid.center
    m, hi, lo = _split_at(a, j)
    m[M + j] += hi
    m[M - j] += lo
    return QuantizedDensity(a.grid, m)


def flip_probability(k: float) -> float:
    return 1.0 / (1.0 + math.exp(k))


def symmetric_saturate(a: QuantizedDensity, k: float, tol: float | None = None) -> QuantizedDensity:
    """Collect all mass at |v| >= k and redistribute it as gamma*D(p, k), p = 1/(1+e^k)."""
    if not is_symmetric(a, tol):
        raise ValueError("symmetric saturation needs a symmetric input density")
    j = _level_index(a.grid, k)
    M = a.grid.center
    m, hi, lo = _split_at(a, j)
    gamma = hi + lo
    p = flip_probability(j * a.grid.spacing)
    m[M + j] += gamma * (1 - p)
    m[M - j] += gamma * p
    return QuantizedDensity(a.grid, m)


def two_tier_saturate(a: QuantizedDensity, cfg: SaturationConfig) -> QuantizedDensity:
    """|v| >= k_var goes to +-k_var; k_alt <= |v| < k_var goes to +-k_alt."""
    if not cfg.two_tier:
        raise SaturationConfigError("k_alt", "two-tier saturation needs k_alt")
    grid = a.grid
    jv = _level_index(grid, cfg.k_var)
    ja = _level_index(grid, cfg.k_alt)
    M = grid.center
    m, hi, lo = _split_at(a, jv)
    mid_pos = m[M + ja:M + jv].sum()
    mid_neg = m[M - jv + 1:M - ja + 1].sum()
    m[M + ja:M + jv] = 0.0
    m[M - jv + 1:M - ja + 1] = 0.0
    m[M + jv] += hi
    m[M - jv] += lo
    m[M + ja] += mid_pos
    m[M - ja] += mid_neg
    return QuantizedDensity(grid, m)


def decompose(a: QuantizedDensity, level: float) -> MixtureDecomposition:
    """Split a density supported on [-level, level] into gamma*D(p, level) + (1-gamma)*m."""
    grid = a.grid
    j = _level_index(grid, level)
    M = grid.center
    beyond = a.atom_pos_inf + a.atom_neg_inf + a.interior_mass[M + j + 1:].sum() + a.interior_mass[:M - j].sum()
    if beyond > 0:
        raise ValueError(f"density has mass {beyond:.3g} beyond level {level}")
    m = a.interior_mass.copy()
    up, down = float(m[M + j]), float(m[M - j])
    m[M + j] = 0.0
    m[M - j] = 0.0
    gamma = up + down
    rest = float(m.sum())
    p = down / gamma if gamma > 0 else 0.0
    interior = QuantizedDensity(grid, m / rest) if rest > 0 else None
    if interior is None:
        gamma = 1.0
    return MixtureDecomposition(gamma, p, j * grid.spacing, interior)
