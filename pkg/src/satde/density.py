"""Quantized L-densities and the operations density evolution needs.

A density lives on a uniform grid of odd size centred at zero, plus two
point masses at +inf and -inf.  Values are LLRs conditioned on X=+1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

LN2 = math.log(2.0)
_ON_GRID_RTOL = 1e-9
_MASS_TOL = 1e-12


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    spacing: float
    half_range: float
    bin_count: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.bin_count < 1 or self.bin_count % 2 == 0:
            raise ValueError("bin_count must be a positive odd integer")
        if self.bin_count * self.spacing < 2 * self.half_range * (1 - 1e-12):
            raise ValueError("bin_count*spacing must cover [-half_range, half_range]")
        if self.center * self.spacing > self.half_range * (1 + 1e-12) + 1e-15:
            raise ValueError("grid bins extend past half_range")

    @classmethod
    def build(cls, spacing: float = 1 / 16, half_range: float = 24.0) -> "GridSpec":
        m = int(math.ceil(half_range / spacing - 1e-9))
        return cls(float(spacing), m * float(spacing), 2 * m + 1)

    @classmethod
    def default(cls, k_var: float, spacing: float = 1 / 16) -> "GridSpec":
        return cls.build(spacing, k_var + 4.0)

    @property
    def center(self) -> int:
        return (self.bin_count - 1) // 2

    @property
    def values(self) -> np.ndarray:
        return _grid_values(self)

    def index_of(self, v: float) -> int | None:
        """Bin index of v if v sits on a grid point, else None."""
        q = v / self.spacing
        k = round(q)
        if abs(q - k) > _ON_GRID_RTOL * max(1.0, abs(q)) or abs(k) > self.center:
            return None
        return int(k) + self.center

    def snap(self, v: float) -> float:
        k = min(round(abs(v) / self.spacing), self.center)
        return math.copysign(k * self.spacing, v)

    def to_dict(self) -> dict:
        return {"spacing": self.spacing, "half_range": self.half_range, "bin_count": self.bin_count}


@lru_cache(maxsize=32)
def _grid_values(grid: GridSpec) -> np.ndarray:
    v = np.arange(-grid.center, grid.center + 1) * grid.spacing
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class QuantizedDensity:
    grid: GridSpec
    interior_mass: np.ndarray
    atom_pos_inf: float = 0.0
    atom_neg_inf: float = 0.0

    def __post_init__(self):
        m = np.array(self.interior_mass, dtype=float)
        if m.shape != (self.grid.bin_count,):
            raise ValueError(f"interior_mass must have {self.grid.bin_count} entries, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "interior_mass", m)
        object.__setattr__(self, "atom_pos_inf", float(self.atom_pos_inf))
        object.__setattr__(self, "atom_neg_inf", float(self.atom_neg_inf))
        if (m < 0).any() or self.atom_pos_inf < 0 or self.atom_neg_inf < 0:
            raise ValueError("masses must be non-negative")
        if abs(self.total - 1.0) > _MASS_TOL:
            raise ValueError(f"total mass {self.total!r} differs from 1")

    @property
    def total(self) -> float:
        return float(self.interior_mass.sum()) + self.atom_pos_inf + self.atom_neg_inf

    @property
    def finite_mass(self) -> float:
        return float(self.interior_mass.sum())

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    def mass_at(self, v: float) -> float:
        if v == math.inf:
            return self.atom_pos_inf
        if v == -math.inf:
            return self.atom_neg_inf
        i = self.grid.index_of(v)
        return 0.0 if i is None else float(self.interior_mass[i])

    def flipped(self) -> "QuantizedDensity":
        """Density of -X."""
        return QuantizedDensity(self.grid, self.interior_mass[::-1], self.atom_neg_inf, self.atom_pos_inf)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, masses) of every atom with positive mass, infinities included."""
        idx = np.flatnonzero(self.interior_mass)
        vals = [self.values[idx]]
        ms = [self.interior_mass[idx]]
        if self.atom_neg_inf > 0:
            vals.insert(0, np.array([-np.inf]))
            ms.insert(0, np.array([self.atom_neg_inf]))
        if self.atom_pos_inf > 0:
            vals.append(np.array([np.inf]))
            ms.append(np.array([self.atom_pos_inf]))
        return np.concatenate(vals), np.concatenate(ms)

    def max_abs(self) -> float:
        if self.atom_pos_inf > 0 or self.atom_neg_inf > 0:
            return math.inf
        idx = np.flatnonzero(self.interior_mass)
        return float(np.abs(self.values[idx]).max()) if idx.size else 0.0

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "interior_mass": [float(x) for x in self.interior_mass],
            "atom_pos_inf": self.atom_pos_inf,
            "atom_neg_inf": self.atom_neg_inf,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizedDensity":
        g = d["grid"]
        grid = GridSpec(float(g["spacing"]), float(g["half_range"]), int(g["bin_count"]))
        return cls(grid, np.asarray(d["interior_mass"], dtype=float),
                   float(d["atom_pos_inf"]), float(d["atom_neg_inf"]))


def dumps(a: QuantizedDensity) -> str:
    return json.dumps(a.to_dict())


def loads(text: str) -> QuantizedDensity:
    return QuantizedDensity.from_dict(json.loads(text))


def same_content(a: QuantizedDensity, b: QuantizedDensity) -> bool:
    return (a.grid == b.grid and np.array_equal(a.interior_mass, b.interior_mass)
            and a.atom_pos_inf == b.atom_pos_inf and a.atom_neg_inf == b.atom_neg_inf)


# ---------------------------------------------------------------- constructors

def delta(grid: GridSpec, v: float) -> QuantizedDensity:
    return from_atoms(grid, [v], [1.0])


def from_atoms(grid: GridSpec, values, masses) -> QuantizedDensity:
    """Place point masses on the grid.

    Values on grid points (or +-inf) are stored exactly.  Off-grid values are
    split between the two neighbouring bins so that mass and the mean of
    e^-v are preserved.  Magnitudes beyond the grid are clamped to the
    boundary bin.
    """
    values = np.asarray(values, dtype=float)
    masses = np.asarray(masses, dtype=float)
    m = np.zeros(grid.bin_count)
    pos = float(masses[values == np.inf].sum())
    neg = float(masses[values == -np.inf].sum())
    fin = np.isfinite(values)
    if fin.any():
        vals = np.clip(values[fin], -grid.half_range, grid.half_range)
        lo, hi, w = _split_indices(grid, vals, signed=True)
        mm = masses[fin]
        m += np.bincount(lo, mm * (1 - w), minlength=grid.bin_count)
        m += np.bincount(hi, mm * w, minlength=grid.bin_count)
    return QuantizedDensity(grid, m, pos, neg)


def symmetric_from_magnitudes(grid: GridSpec, mags, dmass, inf_mass: float = 0.0) -> QuantizedDensity:
    """Symmetric density with the given |LLR| distribution.

    Each magnitude carries |D|-mass; magnitudes off the grid are split between
    neighbouring grid magnitudes preserving the mean of tanh(|v|/2), and every
    grid magnitude v then gets the symmetric split 1/(1+e^-v) : e^-v/(1+e^-v).
    The result satisfies the symmetry relation exactly on the grid.
    """
    mags = np.abs(np.asarray(mags, dtype=float))
    dmass = np.asarray(dmass, dtype=float)
    mags = np.minimum(mags, grid.half_range)
    lo, hi, w = _split_indices(grid, mags)
    M = grid.center
    per_mag = np.bincount(lo - M, dmass * (1 - w), minlength=M + 1)
    per_mag += np.bincount(hi - M, dmass * w, minlength=M + 1)
    k = np.arange(M + 1) * grid.spacing
    frac_pos = 1.0 / (1.0 + np.exp(-k))
    m = np.zeros(grid.bin_count)
    m[M:] += per_mag * frac_pos
    m[:M + 1] += (per_mag * (1 - frac_pos))[::-1]
    m[M] = per_mag[0]
    return QuantizedDensity(grid, m, inf_mass, 0.0)


def _one_minus_tanh_half(x):
    # 1 - tanh(x/2) for x >= 0, accurate when the result is tiny
    return 2.0 / (1.0 + np.exp(x))


def _split_indices(grid: GridSpec, vals: np.ndarray, signed: bool = False):
    """Neighbouring bin indices and upper-magnitude weight for finite values in range.

    Default: the weight keeps the mean of tanh(|v|/2), which is right for
    |D|-domain masses.  signed=True keeps the mean of e^-v instead; that
    choice maps an exactly symmetric pair (v, -v) onto exactly symmetric grid
    pairs and still keeps tanh-mean in the |D| domain for such pairs.
    """
    h = grid.spacing
    M = grid.center
    mag = np.abs(vals)
    q = mag / h
    k = np.round(q)
    on = np.abs(q - k) <= _ON_GRID_RTOL * np.maximum(1.0, q)
    lo_mag = np.where(on, k, np.floor(q)).astype(np.int64)
    lo_mag = np.minimum(lo_mag, M)
    hi_mag = np.minimum(lo_mag + 1, M)
    if signed:
        d = mag - lo_mag * h
        w = np.where(vals < 0, np.expm1(d) / math.expm1(h), np.expm1(-d) / math.expm1(-h))
        w = np.where(on | (hi_mag == lo_mag), 0.0, w)
    else:
        r_lo = _one_minus_tanh_half(lo_mag * h)
        r_hi = _one_minus_tanh_half(hi_mag * h)
        r_v = _one_minus_tanh_half(mag)
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(on | (hi_mag == lo_mag), 0.0, (r_lo - r_v) / (r_lo - r_hi))
    w = np.clip(w, 0.0, 1.0)
    sgn = np.where(vals < 0, -1, 1)
    return M + sgn * lo_mag, M + sgn * hi_mag, w


def _check(a: QuantizedDensity, b: QuantizedDensity):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def renormalize(a: QuantizedDensity) -> QuantizedDensity:
    """Remove floating-point drift in the total mass."""
    t = a.total
    if t == 1.0:
        return a
    return QuantizedDensity(a.grid, a.interior_mass / t, a.atom_pos_inf / t, a.atom_neg_inf / t)


# ---------------------------------------------------------------- convolutions

def var_convolve(a: QuantizedDensity, b: QuantizedDensity) -> QuantizedDensity:
    """Law of X+Y.  Overflow lands on the extreme bins; +inf + -inf counts as 0."""
    _check(a, b)
    n, M = a.grid.bin_count, a.grid.center
    full = np.convolve(a.interior_mass, b.interior_mass)
    m = full[M:M + n].copy()
    m[0] += full[:M].sum()
    m[-1] += full[M + n:].sum()
    fa, fb = a.finite_mass, b.finite_mass
    pos = a.atom_pos_inf * (fb + b.atom_pos_inf) + fa * b.atom_pos_inf
    neg = a.atom_neg_inf * (fb + b.atom_neg_inf) + fa * b.atom_neg_inf
    m[M] += a.atom_pos_inf * b.atom_neg_inf + a.atom_neg_inf * b.atom_pos_inf
    np.maximum(m, 0.0, out=m)
    return QuantizedDensity(a.grid, m, pos, neg)


SUM_PRODUCT = "sumproduct"
MIN_SUM = "minsum"


def log_tanh_half(x):
    """log(tanh(x/2)) for x >= 0; -inf at 0 and 0 at +inf."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.exp(-x)
        # log(1 - e^-x): expm1 form near 0, log1p form once e^-x < 1/2
        head = np.where(x > LN2, np.log1p(-np.minimum(e, 0.5)), np.log(-np.expm1(-x)))
        return head - np.log1p(e)


def atanh_exp2(s):
    """2*atanh(exp(s)) for s <= 0, stable near s = 0."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log1p(np.exp(s)) - np.log(-np.expm1(s))
    return np.where(s == 0, np.inf, np.where(np.isneginf(s), 0.0, out))


def check_combine(u, v, rule: str = SUM_PRODUCT):
    """Exact check-node combination of two LLR arrays (broadcasting, +-inf allowed)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    sgn = np.where(u < 0, -1.0, 1.0) * np.where(v < 0, -1.0, 1.0)
    if rule == MIN_SUM:
        mag = np.minimum(np.abs(u), np.abs(v))
    elif rule == SUM_PRODUCT:
        mag = atanh_exp2(log_tanh_half(np.abs(u)) + log_tanh_half(np.abs(v)))
    else:
        raise ValueError(f"unknown check rule {rule!r}")
    return sgn * mag


def chk_pair_atoms(a: QuantizedDensity, b: QuantizedDensity, rule: str = SUM_PRODUCT):
    """Exact (values, masses) of the check combination before re-quantization."""
    va, ma = a.support()
    vb, mb = b.support()
    vals = check_combine(va[:, None], vb[None, :], rule)
    return vals.ravel(), np.outer(ma, mb).ravel()


_TABLE_MAX_BINS = 2401


@lru_cache(maxsize=6)
def _pair_table(grid: GridSpec, rule: str):
    v = grid.values
    out = check_combine(v[:, None], v[None, :], rule)
    lo, hi, w = _split_indices(grid, out.ravel(), signed=True)
    n = grid.bin_count
    return lo.reshape(n, n).astype(np.int32), hi.reshape(n, n).astype(np.int32), w.reshape(n, n)


def _interior_pairs(grid: GridSpec, ma: np.ndarray, mb: np.ndarray, rule: str) -> np.ndarray:
    ia = np.flatnonzero(ma)
    ib = np.flatnonzero(mb)
    n = grid.bin_count
    if ia.size == 0 or ib.size == 0:
        return np.zeros(n)
    P = np.outer(ma[ia], mb[ib])
    if n <= _TABLE_MAX_BINS:
        lo_t, hi_t, w_t = _pair_table(grid, rule)
        if ia.size == n and ib.size == n:
            lo, hi, w = lo_t, hi_t, w_t
        else:
            sel = np.ix_(ia, ib)
            lo, hi, w = lo_t[sel], hi_t[sel], w_t[sel]
    else:
        v = grid.values
        out = check_combine(v[ia][:, None], v[ib][None, :], rule)
        lo, hi, w = _split_indices(grid, out.ravel(), signed=True)
    Pw = P * w
    res = np.bincount(lo.ravel(), (P - Pw).ravel(), minlength=n)
    res += np.bincount(hi.ravel(), Pw.ravel(), minlength=n)
    return res


def chk_convolve(a: QuantizedDensity, b: QuantizedDensity, rule: str = SUM_PRODUCT) -> QuantizedDensity:
    """Law of 2 atanh(tanh(X/2) tanh(Y/2)) (or the min-sum rule), re-quantized.

    Off-grid results are split between neighbouring bins preserving mass and
    the mean of e^-v, so symmetric inputs give symmetric outputs.  Delta_0 is absorbing, Delta_inf is the identity.
    """
    _check(a, b)
    ma, mb = a.interior_mass, b.interior_mass
    m = _interior_pairs(a.grid, ma, mb, rule)
    m += a.atom_pos_inf * mb + a.atom_neg_inf * mb[::-1]
    m += b.atom_pos_inf * ma + b.atom_neg_inf * ma[::-1]
    pos = a.atom_pos_inf * b.atom_pos_inf + a.atom_neg_inf * b.atom_neg_inf
    neg = a.atom_pos_inf * b.atom_neg_inf + a.atom_neg_inf * b.atom_pos_inf
    np.maximum(m, 0.0, out=m)
    return QuantizedDensity(a.grid, m, pos, neg)


# ---------------------------------------------------------------- functionals

@dataclass(frozen=True)
class Functionals:
    battacharyya: float
    entropy: float
    error_prob: float


def battacharyya(a: QuantizedDensity) -> float:
    if a.atom_neg_inf > 0:
        return math.inf
    return float(np.dot(a.interior_mass, np.exp(-a.values / 2)))


def entropy(a: QuantizedDensity) -> float:
    if a.atom_neg_inf > 0:
        return math.inf
    return float(np.dot(a.interior_mass, np.logaddexp(0.0, -a.values))) / LN2


def error_prob(a: QuantizedDensity) -> float:
    M = a.grid.center
    m = a.interior_mass
    return float(m[:M].sum() + 0.5 * m[M]) + a.atom_neg_inf


def functionals(a: QuantizedDensity) -> Functionals:
    return Functionals(battacharyya(a), entropy(a), error_prob(a))


# ---------------------------------------------------------------- |D| domain

@dataclass(frozen=True, eq=False)
class AbsDDistribution:
    support: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.cdf) < -1e-15):
            raise ValueError("cdf must be non-decreasing")
        if abs(self.cdf[-1] - 1.0) > _MASS_TOL:
            raise ValueError("cdf must end at 1")

    def at(self, x) -> np.ndarray:
        """Right-continuous cdf evaluated at points x."""
        j = np.searchsorted(self.support, x, side="right") - 1
        return np.where(j >= 0, self.cdf[np.maximum(j, 0)], 0.0)


def to_absD(a: QuantizedDensity) -> AbsDDistribution:
    M = a.grid.center
    m = a.interior_mass
    per_mag = m[M:].copy()
    per_mag[1:] += m[:M][::-1]
    t = np.tanh(np.arange(M + 1) * a.grid.spacing / 2)
    support = np.append(t, 1.0)
    dm = np.append(per_mag, a.atom_pos_inf + a.atom_neg_inf)
    # magnitudes whose tanh rounds to 1.0 merge with the infinite atom
    if t[-1] == 1.0:
        keep = support < 1.0
        dm = np.append(dm[keep], dm[~keep].sum())
        support = np.append(support[keep], 1.0)
    return AbsDDistribution(support, np.cumsum(dm))


def _merged(A: AbsDDistribution, B: AbsDDistribution):
    pts = np.union1d(np.union1d(A.support, B.support), [0.0, 1.0])
    return pts, A.at(pts), B.at(pts)


def wasserstein(a: QuantizedDensity, b: QuantizedDensity) -> float:
    """Integral over [0,1] of |F_a - F_b| for the |D| cdfs."""
    pts, Fa, Fb = _merged(to_absD(a), to_absD(b))
    return float(np.sum(np.abs(Fa - Fb)[:-1] * np.diff(pts)))


def _tail_integrals(pts, F):
    # G(z) = int_z^1 F(x) dx at every merged point; F is constant on [pts_i, pts_i+1)
    seg = F[:-1] * np.diff(pts)
    return np.append(np.cumsum(seg[::-1])[::-1], 0.0)


def degradation_gap(a: QuantizedDensity, b: QuantizedDensity) -> float:
    """max_z (int_z^1 F_a - int_z^1 F_b); a is upgraded w.r.t. b iff this is <= 0."""
    pts, Fa, Fb = _merged(to_absD(a), to_absD(b))
    return float(np.max(_tail_integrals(pts, Fa) - _tail_integrals(pts, Fb)))


def is_degraded(a: QuantizedDensity, b: QuantizedDensity, tol: float | None = None) -> bool:
    """True iff b is degraded with respect to a (a ≺ b), up to tol."""
    if tol is None:
        tol = 5 * a.grid.spacing
    return degradation_gap(a, b) <= tol


def symmetry_defect(a: QuantizedDensity, floor: float = 1e-12) -> float:
    """Largest |log(m(-v) / (m(v) e^-v))| over grid values v > 0.

    Pairs where both sides are below `floor` are ignored; a side below the
    floor facing a side above it counts as an infinite defect.
    """
    M = a.grid.center
    m = a.interior_mass
    pos = m[M + 1:]
    neg = m[:M][::-1]
    expect = pos * np.exp(-np.arange(1, M + 1) * a.grid.spacing)
    if a.atom_neg_inf > floor:
        return math.inf
    big = (neg > floor) | (expect > floor)
    if not big.any():
        return 0.0
    n, e = neg[big], expect[big]
    if (n <= 0).any() or (e <= 0).any():
        return math.inf
    return float(np.max(np.abs(np.log(n) - np.log(e))))


def is_symmetric(a: QuantizedDensity, tol: float | None = None, floor: float = 1e-12) -> bool:
    """Symmetry a(-v) = a(v) e^-v checked as a log-ratio within tol.

    The default tol is 10*spacing, the drift one grid step of re-quantization
    per operation can introduce.
    """
    if tol is None:
        tol = 10 * a.grid.spacing
    return symmetry_defect(a, floor) <= tol
