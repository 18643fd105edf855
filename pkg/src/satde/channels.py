"""Binary-input memoryless symmetric channels and their L-densities."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .density import GridSpec, QuantizedDensity, entropy, symmetric_from_magnitudes

BEC, BSC, BIAWGN = "bec", "bsc", "biawgn"
KINDS = (BEC, BSC, BIAWGN)

TAIL_LIMIT = 1e-9
REFERENCE_SPACING = 1 / 64


class GridTooNarrowError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelFamily:
    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        p = self.param
        if self.kind == BEC and not 0 <= p <= 1:
            raise ValueError("BEC erasure probability must lie in [0, 1]")
        if self.kind == BSC and not 0 <= p <= 0.5:
            raise ValueError("BSC crossover probability must lie in [0, 0.5]")
        if self.kind == BIAWGN and not p > 0:
            raise ValueError("BiAWGN sigma must be positive")

    @property
    def entropy(self) -> float:
        return channel_entropy(self.kind, self.param)

    def llr(self) -> float:
        """Channel LLR magnitude for BSC; mean LLR for BiAWGN."""
        if self.kind == BSC:
            return _bsc_llr(self.param)
        if self.kind == BIAWGN:
            return 2.0 / self.param ** 2
        return math.inf

    def __str__(self):
        return f"{self.kind}:{self.param:.12g}"


def _bsc_llr(eps: float) -> float:
    if eps == 0:
        return math.inf
    return math.log1p(-eps) - math.log(eps)


def _awgn_span(sigma: float) -> float:
    """Half-width that leaves less than TAIL_LIMIT of LLR mass outside."""
    mu = 2.0 / sigma ** 2
    sd = 2.0 / sigma
    return mu + 6.5 * sd


def required_half_range(family: ChannelFamily) -> float:
    if family.kind == BEC:
        return 0.0
    if family.kind == BSC:
        return 0.0 if family.param in (0.0, 0.5) else _bsc_llr(family.param)
    return _awgn_span(family.param)


def channel_density(family: ChannelFamily, grid: GridSpec) -> QuantizedDensity:
    """L-density of the channel output given X=+1."""
    n, M = grid.bin_count, grid.center
    p = family.param
    if family.kind == BEC:
        m = np.zeros(n)
        m[M] = p
        return QuantizedDensity(grid, m, 1.0 - p, 0.0)
    if family.kind == BSC:
        if p == 0:
            return QuantizedDensity(grid, np.zeros(n), 1.0, 0.0)
        if p == 0.5:
            m = np.zeros(n)
            m[M] = 1.0
            return QuantizedDensity(grid, m, 0.0, 0.0)
        L = _bsc_llr(p)
        if L > grid.half_range * (1 + 1e-12):
            raise GridTooNarrowError(
                f"BSC LLR {L:.6g} exceeds grid half_range {grid.half_range:.6g}")
        return symmetric_from_magnitudes(grid, *_batta_split(grid, L))
    sigma = p
    mu = 2.0 / sigma ** 2
    sd = 2.0 / sigma
    h = grid.spacing
    tail = ndtr((-grid.half_range - mu) / sd) + ndtr((mu - grid.half_range) / sd)
    if tail >= TAIL_LIMIT:
        raise GridTooNarrowError(
            f"BiAWGN sigma={sigma:.6g} leaves tail mass {tail:.3g} beyond half_range {grid.half_range:.6g}")
    edges = (np.arange(-M, M + 2) - 0.5) * h
    z = (edges - mu) / sd
    # cdf below the mean, survival function above it, for accurate tails
    lower = ndtr(z)
    upper = ndtr(-z)
    m = np.where(z[1:] <= 0, lower[1:] - lower[:-1], upper[:-1] - upper[1:])
    m = np.maximum(m, 0.0)
    m[0] += lower[0]
    m[-1] += upper[-1]
    m /= m.sum()
    return QuantizedDensity(grid, m, 0.0, 0.0)


def _batta_split(grid: GridSpec, L: float):
    """Two grid magnitudes around L weighted so the Battacharyya value is exact.

    A symmetric pair at magnitude v has B = 1/cosh(v/2), which is monotone,
    so one weight in [0, 1] always matches it.
    """
    h = grid.spacing
    lo = math.floor(L / h + 1e-9) * h
    if L - lo <= 1e-9 * max(1.0, L):
        return [lo], [1.0]
    hi = lo + h
    b = lambda v: 1.0 / math.cosh(v / 2)
    w = (b(L) - b(hi)) / (b(lo) - b(hi))
    return [lo, hi], [w, 1.0 - w]


def reference_grid(family: ChannelFamily, spacing: float = REFERENCE_SPACING) -> GridSpec:
    return GridSpec.build(spacing, max(required_half_range(family) + 1.0, 4.0))


def channel_entropy(kind: str, param: float) -> float:
    """Channel entropy H(X|Y) in bits, evaluated on a fine reference grid."""
    if kind == BEC:
        return float(param)
    fam = ChannelFamily(kind, param)
    if kind == BSC and param == 0:
        return 0.0
    return entropy(channel_density(fam, reference_grid(fam)))


def param_for_entropy(kind: str, h: float, tol: float = 1e-10) -> float:
    """Invert the entropy map by bisection."""
    if not 0 <= h <= 1:
        raise ValueError("entropy must lie in [0, 1]")
    if kind == BEC:
        return float(h)
    if kind == BSC:
        # the entropy map is flat at 1/2, so the endpoints are returned exactly
        if h in (0.0, 1.0):
            return 0.5 * h
        lo, hi = 0.0, 0.5
    elif kind == BIAWGN:
        if h in (0.0, 1.0):
            raise ValueError("BiAWGN entropy must lie strictly inside (0, 1)")
        lo, hi = 0.05, 2.0
        while channel_entropy(kind, hi) < h:
            hi *= 2
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if channel_entropy(kind, mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def battacharyya_closed_form(family: ChannelFamily) -> float:
    p = family.param
    if family.kind == BEC:
        return p
    if family.kind == BSC:
        return 2.0 * math.sqrt(p * (1 - p))
    return math.exp(-1.0 / (2 * p * p))


def parse_channel(text: str) -> tuple[str, float | None]:
    """Parse 'bec:0.45', 'bsc@h:0.469' or a bare kind like 'bec'.

    Returns (kind, param) with param None for a bare kind.
    """
    s = text.strip().lower()
    if ":" not in s:
        if s not in KINDS:
            raise ValueError(f"channel: unknown kind {s!r}")
        return s, None
    head, _, val = s.partition(":")
    by_entropy = head.endswith("@h")
    kind = head[:-2] if by_entropy else head
    if kind not in KINDS:
        raise ValueError(f"channel: unknown kind {kind!r}")
    try:
        x = float(val)
    except ValueError:
        raise ValueError(f"channel: bad parameter {val!r}") from None
    if by_entropy:
        x = param_for_entropy(kind, x)
    ChannelFamily(kind, x)
    return kind, x
