"""Finite-length Tanner graphs, a flooding SatBP / min-sum decoder and a Monte Carlo harness."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .channels import BEC, BIAWGN, BSC, ChannelFamily
from .density import MIN_SUM, SUM_PRODUCT, atanh_exp2, log_tanh_half
from .ensembles import DegreeDistribution
from .saturation import SaturationConfig

# stand-in for an infinite LLR when no saturation is applied
LLR_CAP = 1e3
REPAIR_ATTEMPTS = 100
ERASURE_TRIGGER = 1e-3


class InfeasibleDegreeSequence(ValueError):
    pass


@dataclass(eq=False)
class TannerGraph:
    n: int
    m: int
    edge_var: np.ndarray   # edges sorted by variable
    edge_chk: np.ndarray
    var_ptr: np.ndarray    # var v owns edges var_ptr[v]:var_ptr[v+1]
    chk_order: np.ndarray  # permutation putting edges in check order
    chk_ptr: np.ndarray

    @property
    def edges(self) -> int:
        return int(self.edge_var.size)

    def var_degrees(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    def chk_degrees(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    def edge_fractions(self) -> tuple[dict, dict]:
        """Realized edge-perspective degree fractions (lambda, rho)."""
        out = []
        for deg in (self.var_degrees(), self.chk_degrees()):
            vals, counts = np.unique(deg, return_counts=True)
            out.append({int(d): float(d * k) / self.edges for d, k in zip(vals, counts)})
        return out[0], out[1]

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        per_edge = bits[self.edge_var][self.chk_order].astype(np.int64)
        return np.add.reduceat(per_edge, self.chk_ptr[:-1]) & 1

    def parity_matrix(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_chk, self.edge_var] = 1
        return H


def _round_counts(total: int, fractions: dict) -> dict:
    """Largest-remainder rounding of total*fractions to integers summing to total."""
    degs = sorted(fractions)
    raw = np.array([total * fractions[d] for d in degs])
    base = np.floor(raw).astype(int)
    rem = total - base.sum()
    for i in np.argsort(-(raw - base), kind="stable")[:rem]:
        base[i] += 1
    return {d: int(k) for d, k in zip(degs, base) if k > 0}


def _coin_change(target: int, degs: list) -> list | None:
    """Fewest checks with the given degrees whose sizes sum to target, or None."""
    best = [0] + [None] * target
    for t in range(1, target + 1):
        opts = [(best[t - d] + 1, d) for d in degs if d <= t and best[t - d] is not None]
        best[t] = min(opts)[0] if opts else None
    if best[target] is None:
        return None
    out, t = [], target
    while t:
        d = min(d for d in degs if d <= t and best[t - d] == best[t] - 1)
        out.append(d)
        t -= d
    return out


def _check_counts(E: int, rho: dict) -> dict:
    degs = sorted(rho)
    counts = {d: int(math.floor(w * E / d + 1e-9)) for d, w in rho.items()}
    left = E - sum(d * k for d, k in counts.items())
    dmax = max(degs, key=lambda d: counts[d])
    # remove a few checks of the most common degree when the remainder is not representable
    for r in range(min(counts[dmax], 2 * max(degs)) + 1):
        extra = _coin_change(left + r * dmax, degs)
        if extra is not None:
            counts[dmax] -= r
            for d in extra:
                counts[d] += 1
            return {d: k for d, k in counts.items() if k > 0}
    raise InfeasibleDegreeSequence(f"cannot split {E} edges into checks of degrees {degs}")


def _duplicates(v: np.ndarray, c: np.ndarray, m: int) -> np.ndarray:
    key = v.astype(np.int64) * m + c
    order = np.argsort(key, kind="stable")
    dup = np.zeros(key.size, bool)
    dup[order[1:]] = key[order[1:]] == key[order[:-1]]
    return np.flatnonzero(dup)


def build_graph(dd: DegreeDistribution, n: int, seed=None) -> TannerGraph:
    """Configuration-model sample of the ensemble; double edges are removed by re-pairing."""
    if n < 2:
        raise InfeasibleDegreeSequence("n must be at least 2")
    if dd.design_rate() >= 1:
        raise InfeasibleDegreeSequence("design rate must be below 1")
    rng = np.random.default_rng(seed)
    var_frac, _ = dd.node_fractions()
    vcounts = _round_counts(n, var_frac)
    vdeg = np.concatenate([np.full(k, d) for d, k in sorted(vcounts.items())])
    E = int(vdeg.sum())
    ccounts = _check_counts(E, dd.rho_coeffs)
    cdeg = np.concatenate([np.full(k, d) for d, k in sorted(ccounts.items())])
    m = cdeg.size
    v_sock = np.repeat(np.arange(n), vdeg)
    c_sock = rng.permutation(np.repeat(np.arange(m), cdeg))
    for _ in range(REPAIR_ATTEMPTS):
        dup = _duplicates(v_sock, c_sock, m)
        if dup.size == 0:
            break
        partners = rng.integers(0, E, size=dup.size)
        for a, b in zip(dup, partners):
            c_sock[a], c_sock[b] = c_sock[b], c_sock[a]
    else:
        if _duplicates(v_sock, c_sock, m).size:
            raise InfeasibleDegreeSequence("could not remove double edges")
    var_ptr = np.concatenate([[0], np.cumsum(vdeg)])
    chk_order = np.argsort(c_sock, kind="stable")
    chk_ptr = np.concatenate([[0], np.cumsum(np.bincount(c_sock, minlength=m))])
    return TannerGraph(n, m, v_sock, c_sock, var_ptr, chk_order, chk_ptr)


# ---------------------------------------------------------------- decoding

@dataclass(frozen=True)
class DecoderConfig:
    rule: str = SUM_PRODUCT
    saturation: SaturationConfig | None = None
    flipping: bool = False
    erasure_phase: float | None = None
    max_iters: int = 100
    seed: int | None = None
    stop_on_syndrome: bool = True

    def __post_init__(self):
        if self.rule not in (SUM_PRODUCT, MIN_SUM):
            raise ValueError(f"rule: unknown check rule {self.rule!r}")
        if self.flipping and self.saturation is None:
            raise ValueError("flipping: needs saturation enabled")
        if self.max_iters < 1:
            raise ValueError("max_iters: must be at least 1")


@dataclass
class DecodeResult:
    bits: np.ndarray           # hard decisions, 1 where the aggregate LLR is negative
    erased: np.ndarray
    iterations: int
    converged: bool
    msg_error: list = field(default_factory=list)  # per iteration: P(v->c < 0) + P(= 0)/2
    bit_errors: list = field(default_factory=list)  # per iteration, all-zero reference
    erasure_phase_at: int | None = None


def flip_probability_v(x, k_var: float):
    """Flip probability for an outgoing magnitude x >= k_var; 0 at x = k_var."""
    x = np.asarray(x, dtype=float)
    base = math.exp(-k_var) / (1 + math.exp(-k_var))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = -np.expm1(k_var - x) / -np.expm1(-x)
    return base * np.where(np.isinf(x), 1.0, ratio)


def check_update(g: TannerGraph, v2c: np.ndarray, rule: str = SUM_PRODUCT) -> np.ndarray:
    """Extrinsic check-node outputs, in variable edge order."""
    x = v2c[g.chk_order]
    starts = g.chk_ptr[:-1]
    deg = np.diff(g.chk_ptr)
    owner = np.repeat(np.arange(g.m), deg)
    neg = (x < 0).astype(np.int64)
    sgn_tot = np.add.reduceat(neg, starts) & 1
    sign = np.where((sgn_tot[owner] ^ neg) == 1, -1.0, 1.0)
    mag = np.abs(x)
    if rule == MIN_SUM:
        m1 = np.minimum.reduceat(mag, starts)
        is_min = mag == m1[owner]
        first = np.zeros_like(is_min)
        pos = np.flatnonzero(is_min)
        _, keep = np.unique(owner[pos], return_index=True)
        first[pos[keep]] = True
        m2 = np.minimum.reduceat(np.where(first, np.inf, mag), starts)
        out_mag = np.where(first, m2[owner], m1[owner])
    else:
        zero = mag == 0
        nz = np.add.reduceat(zero.astype(np.int64), starts)[owner]
        lt = np.where(zero, 0.0, log_tanh_half(mag))
        tot = np.add.reduceat(lt, starts)[owner]
        s = np.minimum(tot - lt, 0.0)
        out_mag = np.where(nz - zero > 0, 0.0, np.minimum(atanh_exp2(s), LLR_CAP))
    out = np.empty_like(x)
    out[g.chk_order] = sign * out_mag
    return out


def _ternary_check(g: TannerGraph, v2c: np.ndarray) -> np.ndarray:
    x = v2c[g.chk_order]
    starts = g.chk_ptr[:-1]
    owner = np.repeat(np.arange(g.m), np.diff(g.chk_ptr))
    zero = (x == 0).astype(np.int64)
    neg = (x < 0).astype(np.int64)
    nz = np.add.reduceat(zero, starts)[owner] - zero
    par = (np.add.reduceat(neg, starts)[owner] - neg) & 1
    out = np.empty_like(x)
    out[g.chk_order] = np.where(nz > 0, 0.0, np.where(par == 1, -1.0, 1.0))
    return out


def decode(g: TannerGraph, llr_in: np.ndarray, cfg: DecoderConfig) -> DecodeResult:
    """Flooding-schedule decoding; llr_in must already be clamped at k_channel when saturating."""
    llr_in = np.asarray(llr_in, dtype=float)
    if llr_in.shape != (g.n,):
        raise ValueError(f"llr_in: expected length {g.n}, got {llr_in.shape}")
    sat = cfg.saturation
    cap = sat.k_var if sat is not None else LLR_CAP
    rng = np.random.default_rng(cfg.seed) if cfg.flipping else None
    ch = np.clip(llr_in, -LLR_CAP, LLR_CAP)
    starts = g.var_ptr[:-1]
    owner = g.edge_var
    c2v = np.zeros(g.edges)
    res = DecodeResult(np.zeros(g.n, np.uint8), np.zeros(g.n, bool), 0, False)
    ternary = False
    for it in range(1, cfg.max_iters + 1):
        if ternary:
            tot = np.add.reduceat(c2v, starts)
            v2c = np.sign(tot[owner] - c2v)
        else:
            tot = ch + np.add.reduceat(c2v, starts)
            raw = tot[owner] - c2v
            v2c = np.clip(raw, -cap, cap)
            if cfg.flipping:
                z = rng.random(g.n)[owner]
                hit = np.abs(raw) >= sat.k_var
                flip = hit & (z < flip_probability_v(np.abs(raw), sat.k_var))
                v2c = np.where(flip, -v2c, v2c)
        res.msg_error.append(float(np.mean(v2c < 0) + 0.5 * np.mean(v2c == 0)))
        erased = tot == 0
        bits = (tot < 0).astype(np.uint8)
        if ternary:
            # a tie in the hard-message phase keeps the decision made at the switch
            bits = np.where(erased, fallback, bits)
            erased = np.zeros_like(erased)
        res.bit_errors.append(int(np.sum(bits | erased)))
        res.bits, res.erased, res.iterations = bits, erased, it
        if not erased.any() and not g.syndrome(bits).any():
            res.converged = True
            if cfg.stop_on_syndrome:
                break
        if (not ternary and cfg.erasure_phase is not None and sat is not None
                and np.mean(np.abs(tot) < sat.k_var / 2) <= cfg.erasure_phase):
            # drop the channel and continue with {-1, 0, +1} messages
            ternary = True
            res.erasure_phase_at = it
            fallback = bits
            c2v = _ternary_check(g, np.sign(v2c))
            continue
        c2v = _ternary_check(g, v2c) if ternary else check_update(g, v2c, cfg.rule)
    return res


# ---------------------------------------------------------------- Monte Carlo

def sample_llr(family: ChannelFamily, n: int, rng: np.random.Generator) -> np.ndarray:
    """Channel LLRs for the all-zero codeword (X = +1)."""
    p = family.param
    if family.kind == BEC:
        return np.where(rng.random(n) < p, 0.0, np.inf)
    if family.kind == BSC:
        if p == 0:
            return np.full(n, np.inf)
        L = family.llr()
        return np.where(rng.random(n) < p, -L, L)
    if family.kind == BIAWGN:
        y = 1.0 + p * rng.standard_normal(n)
        return 2.0 * y / p ** 2
    raise ValueError(f"unknown channel kind {family.kind!r}")


@dataclass
class TrialRecord:
    trial: int
    iters: int
    bit_errors: int
    converged: bool
    msg_error: list
    bit_error_trace: list


@dataclass
class MonteCarloReport:
    n: int
    trials: list

    @property
    def total_bits(self) -> int:
        return self.n * len(self.trials)

    @property
    def ber(self) -> float:
        return sum(t.bit_errors for t in self.trials) / self.total_bits

    @property
    def bler(self) -> float:
        return sum(t.bit_errors > 0 for t in self.trials) / len(self.trials)

    def ber_interval(self, level: float = 0.95) -> tuple[float, float]:
        k = sum(t.bit_errors for t in self.trials)
        ci = binomtest(k, self.total_bits).proportion_ci(level, method="wilson")
        return ci.low, ci.high

    def bler_interval(self, level: float = 0.95) -> tuple[float, float]:
        k = sum(t.bit_errors > 0 for t in self.trials)
        ci = binomtest(k, len(self.trials)).proportion_ci(level, method="wilson")
        return ci.low, ci.high

    def msg_error_stats(self, iters: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-iteration mean of the message error rate over trials and its standard error.

        Trials that stopped early are padded with their final value.
        """
        rows = []
        for t in self.trials:
            r = list(t.msg_error[:iters])
            r += [r[-1]] * (iters - len(r))
            rows.append(r)
        a = np.array(rows)
        se = a.std(axis=0, ddof=1) / math.sqrt(len(rows)) if len(rows) > 1 else np.zeros(iters)
        return a.mean(axis=0), se

    def to_csv(self) -> str:
        lines = ["trial,iters,bit_errors,converged"]
        for t in self.trials:
            lines.append(f"{t.trial},{t.iters},{t.bit_errors},{int(t.converged)}")
        return "\n".join(lines) + "\n"


def _one_trial(args) -> TrialRecord:
    idx, dd, n, family, cfg, ss = args
    g_seed, ch_seed, dec_seed = ss.spawn(3)
    g = build_graph(dd, n, g_seed)
    llr = sample_llr(family, n, np.random.default_rng(ch_seed))
    if cfg.saturation is not None:
        k = cfg.saturation.k_channel
        llr = np.clip(llr, -k, k)
    dcfg = DecoderConfig(cfg.rule, cfg.saturation, cfg.flipping, cfg.erasure_phase, cfg.max_iters,
                         int(dec_seed.generate_state(1)[0]), cfg.stop_on_syndrome)
    r = decode(g, llr, dcfg)
    errs = int(np.sum(r.bits | r.erased))
    return TrialRecord(idx, r.iterations, errs, r.converged, r.msg_error, r.bit_errors)


def monte_carlo(dd: DegreeDistribution, n: int, family: ChannelFamily, cfg: DecoderConfig,
                trials: int, seed=None, jobs: int = 1) -> MonteCarloReport:
    """All-zero codeword simulation; every trial draws its own graph, noise and flip variates."""
    if trials < 1:
        raise ValueError("trials: must be at least 1")
    streams = np.random.SeedSequence(seed).spawn(trials)
    work = [(i, dd, n, family, cfg, s) for i, s in enumerate(streams)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            recs = list(ex.map(_one_trial, work))
    else:
        recs = [_one_trial(w) for w in work]
    return MonteCarloReport(n, recs)
