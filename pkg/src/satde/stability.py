"""Stability of the perfect-decoding fixed point under saturation.

Covers the support recursion for degree-2 nodes, the stability margin, the
near-stability window, the (gbar*B(m), gamma*p) bound recursion with its
convergence-rate classifier, the three-message erasure recursion and a few
scalar inequalities used along the way.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .density import (MIN_SUM, SUM_PRODUCT, GridSpec, QuantizedDensity, battacharyya,
                      symmetric_from_magnitudes,
                      check_combine, chk_convolve, entropy, from_atoms)
from .ensembles import DegreeDistribution
from .saturation import SaturationConfig, symmetric_saturate

mpmath.mp.dps = 30


# ---------------------------------------------------------------- degree two

@dataclass
class SupportRecursion:
    values: list
    failure_iter: int | None


def support_recursion(d_l: int, L: float, z0: float, iters: int) -> SupportRecursion:
    """z <- (d_l - 1) z - L; reports the first iteration where z < 0."""
    if d_l < 2 or not L > 0:
        raise ValueError("need d_l >= 2 and L > 0")
    zs = [float(z0)]
    fail = 0 if z0 < 0 else None
    for i in range(1, iters + 1):
        zs.append((d_l - 1) * zs[-1] - L)
        if fail is None and zs[-1] < 0:
            fail = i
    return SupportRecursion(zs, fail)


def stability_margin(dd: DegreeDistribution, c: QuantizedDensity, k_channel: float | None = None) -> float:
    """lambda'(0) rho'(1) (B(c) + 2 e^{-k_channel/2}); below 1 means stable."""
    b = battacharyya(c)
    if k_channel is not None:
        b += 2 * math.exp(-k_channel / 2)
    return dd.lambda2 * dd.rho_prime_1 * b


# ---------------------------------------------------------------- near-stability window

@dataclass
class StabilityWindow:
    feasible: bool
    x_star: float
    g_at_xstar: float | None
    f_at_xstar: float | None
    k_min: float
    residual_bound: float
    c_dmin: float
    margin: float = 0.0


def _bisect(fn, lo, hi, tol=1e-10):
    """Largest x in [lo, hi] with fn(x) true, assuming fn is true then false."""
    while hi - lo > tol:
        m = 0.5 * (lo + hi)
        if fn(m):
            lo = m
        else:
            hi = m
    return lo


def near_stability_window(dd: DegreeDistribution, c: QuantizedDensity, k_var: float) -> StabilityWindow:
    bc = battacharyya(c)
    r1 = dd.rho_prime_1
    l2, l3 = dd.lambda2, dd.lambda3
    dmin = dd.min_var_degree
    margin = l2 * r1 * bc
    xmax = 1.0 / r1
    g = lambda x: l2 * bc * r1 + (1 - l2) * bc * r1 ** 2 * x
    f = lambda x: l3 * bc * r1 ** 2 * x + (1 - l3) * bc * r1 ** 3 * x ** 2
    if dmin == 1:
        raise ValueError("degree-one variable nodes are not supported")
    if dmin == 2:
        if margin >= 1:
            nan = float("nan")
            return StabilityWindow(False, nan, margin, None, math.inf, math.inf, math.inf, margin)
        # halfway between g(0) and 1 leaves room on both sides of the window
        target = 0.5 * (1 + g(0.0))
        xs = _bisect(lambda x: g(x) <= target, 0.0, xmax * (1 - 1e-9))
        gx = g(xs)
        cdm = 1.0 / (1.0 - gx)
        k_min = 2 * math.log(cdm / xs) if xs > 0 else math.inf
        fx = f(xs) if l3 > 0 else None
        return StabilityWindow(True, xs, gx, fx, k_min, cdm * math.exp(-k_var / 2), cdm, margin)
    xs = _bisect(lambda x: f(x) <= 0.5, 0.0, xmax * (1 - 1e-9))
    k_min = 2 * math.log(2 / xs)
    return StabilityWindow(True, xs, g(xs), f(xs), k_min, 3 * math.exp(-k_var / 2), 3.0, margin)


def window_step_bound(B: float, dd: DegreeDistribution, bc: float, k_var: float) -> float:
    """Upper bound on the next variable-output B from the current one.

    Uses B(check out) <= rho'(1) B, multiplicativity at variable nodes and the
    e^{-K/2} slack of hard saturation.
    """
    return bc * dd.lam(min(1.0, dd.rho_prime_1 * B)) + math.exp(-k_var / 2)


# ---------------------------------------------------------------- mixture bound recursion

GENERAL, HIGH_DEGREE, TWO_TIER = "general", "high_degree", "two_tier"


class OutOfWindowError(RuntimeError):
    pass


class ContractionError(RuntimeError):
    pass


@dataclass
class MixtureBoundState:
    gbar_Bm: object
    gp: object
    xi: object = 1.0

    def E(self, k_var: float):
        return mpmath.mpf(self.gbar_Bm) + mpmath.exp(mpmath.mpf(k_var) / 2) * mpmath.mpf(self.gp)


def check_gain(gp, d_r: int, k_var: float):
    """xi = 1 + (d_r - 1) * gamma*p * (e^K - 1), i.e. (d_r-1) gamma (e^{K/2} B(D(p,K)) - 1) + 1."""
    return 1 + (d_r - 1) * mpmath.mpf(gp) * mpmath.expm1(k_var)


def window_entry_state(dd: DegreeDistribution, cfg: SaturationConfig) -> MixtureBoundState:
    """A start deep enough inside the window for every precondition to hold."""
    d_r = _right_degree(dd)
    K = cfg.k_var
    u = mpmath.exp(-mpmath.mpf(K) / 2)
    gp = mpmath.exp(-mpmath.mpf(K)) / (2 * (d_r - 1))
    return MixtureBoundState(u, gp, check_gain(gp, d_r, K))


def _right_degree(dd: DegreeDistribution) -> int:
    d_r = dd.check_regular_degree
    if d_r is None:
        raise ValueError("the bound recursion needs a check-regular ensemble")
    return d_r


def mixture_bound_step(state: MixtureBoundState, dd: DegreeDistribution, c: QuantizedDensity | float,
                       cfg: SaturationConfig, mode: str = GENERAL) -> MixtureBoundState:
    """One check + variable iteration of the upper-bound recursion on
    (gbar*B(m), gamma*p)."""
    mp = mpmath.mpf
    d_r = _right_degree(dd)
    d = dd.min_var_degree - 1
    K = mp(cfg.k_var)
    bc = mp(c if isinstance(c, (int, float)) else battacharyya(c))
    u, v = mp(state.gbar_Bm), mp(state.gp)
    xi = check_gain(v, d_r, cfg.k_var)
    if xi > 3:
        raise OutOfWindowError(f"check gain xi={mpmath.nstr(xi, 6)} exceeds 3")
    # B(a) <= gbar*B(m) + e^{K/2} gamma*p + e^{-K/2} must sit inside the residual 3e^{-K/2}
    k_res = mp(cfg.k_alt if mode == TWO_TIER and cfg.k_alt is not None else cfg.k_var)
    if u + mpmath.exp(K / 2) * v + mpmath.exp(-K / 2) > 3 * mpmath.exp(-k_res / 2) * (1 + mp("1e-9")):
        raise OutOfWindowError("variable-output B exceeds the 3e^{-K/2} residual")
    if 4 * d_r * v >= 1:
        raise OutOfWindowError(f"4*d_r*gamma*p={mpmath.nstr(4 * d_r * v, 6)} is not below 1")
    # check half: linear map on the pair
    ub = d_r * xi * u
    vb = d_r * v
    kc = mp(cfg.k_check)
    Bb = min(mp(1), ub + vb * mpmath.exp(kc / 2) + mpmath.exp(-kc / 2))
    if d >= 2 and d * (d - 1) / 2 * bc * Bb ** (d - 2) > 1:
        raise OutOfWindowError("check output B too large for the variable-node bound")
    q = 4 * vb
    eK2 = mpmath.exp(-K / 2)
    if mode == GENERAL:
        if d < 2:
            raise ValueError("the general bound needs minimum variable degree >= 3")
        gp_new = eK2 * ub ** 2 + (d + 1) * q ** (d // 2 + 1) + d * q ** (d // 2) * bc * ub
        u_new = ub ** 2 + 2 * d * bc * ub * q ** ((d - 2) // 2) * Bb + bc * q ** (d // 2)
    elif mode == HIGH_DEGREE:
        if d < 4:
            raise ValueError("the high-degree bound needs minimum variable degree >= 5")
        qh = 4 * mpmath.exp(K / 2) * vb  # 4 d_r e^{K/2} gamma p
        g_hat = ub ** 2 + (d + 1) * mpmath.exp(-K) * qh ** 3 + d * eK2 * qh ** 2 * bc * ub
        gp_new = eK2 * g_hat
        u_new = ub ** 2 + 2 * d * bc * ub * eK2 * qh * Bb + mpmath.exp(-K) * bc * qh ** 2
    elif mode == TWO_TIER:
        if cfg.k_alt is None:
            raise ValueError("two-tier bound needs k_alt")
        if d < 3:
            raise ValueError("the two-tier bound needs minimum variable degree >= 4")
        lift = mpmath.exp((K - mp(cfg.k_alt)) / 2)
        gp_new = eK2 * ub ** 2 + (d + 1) * q ** (d // 2 + 1) + d * q ** (d // 2) * bc * ub
        u_new = bc * (ub ** 2 + d * lift * bc * ub * q + q)
    else:
        raise ValueError(f"unknown bound mode {mode!r}")
    return MixtureBoundState(u_new, gp_new, check_gain(gp_new, d_r, cfg.k_var))


@dataclass
class BlockThresholdReport:
    rate_exponent: float
    required_exponent: float
    doubly_exponential: bool
    evidence: list = field(default_factory=list)
    E: list = field(default_factory=list)
    quadratic_ok: bool | None = None

    @property
    def block_threshold_ok(self) -> bool:
        return self.doubly_exponential or self.rate_exponent > self.required_exponent


DOUBLY_EXP_SLOPE = math.log(1.8)
FIT_WINDOW = 10


def required_exponent(dd: DegreeDistribution) -> float:
    """M with (tree size)^2 <= e^{M l}: 2 ln((d_l-1)(d_r-1)) for the largest degrees."""
    return 2 * math.log((dd.max_var_degree - 1) * (dd.max_check_degree - 1))


def _slope(xs, ys) -> float:
    return float(np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)[0])


def contraction_run(initial: MixtureBoundState, dd: DegreeDistribution, c, cfg: SaturationConfig,
                    iters: int = 30, mode: str = GENERAL) -> BlockThresholdReport:
    """Iterate the bound recursion and classify the decay of E = gbar*B(m) + e^{K/2} gamma*p."""
    K = cfg.k_var
    d_r = _right_degree(dd)
    s = initial
    Es = [s.E(K)]
    quad = True
    for _ in range(iters):
        if Es[-1] == 0:
            Es.append(Es[-1])
            continue
        xi = s.xi
        s = mixture_bound_step(s, dd, c, cfg, mode)
        e = s.E(K)
        if e > Es[-1]:
            raise ContractionError(f"E grew from {mpmath.nstr(Es[-1], 6)} to {mpmath.nstr(e, 6)}")
        if mode == HIGH_DEGREE and e > 2 * (d_r * xi) ** 2 * Es[-1] ** 2:
            quad = False
        Es.append(e)
    req = required_exponent(dd)
    if Es[-1] == 0:
        return BlockThresholdReport(math.inf, req, True, [], [0.0] * len(Es), quad if mode == HIGH_DEGREE else None)
    nl = [-mpmath.log(e) for e in Es]
    lnl = [float(mpmath.log(x)) if x > 0 else float("nan") for x in nl]
    idx = list(range(len(Es)))
    w = idx[-FIT_WINDOW:]
    rate = _slope(w, [float(nl[i]) for i in w])
    loglog = _slope(w, [lnl[i] for i in w])
    evidence = [lnl[i + 1] - lnl[i] for i in range(len(lnl) - 1)]
    return BlockThresholdReport(rate, req, loglog >= DOUBLY_EXP_SLOPE, evidence,
                                [float(e) if e > mpmath.mpf("1e-300") else 0.0 for e in Es],
                                quad if mode == HIGH_DEGREE else None)


# ---------------------------------------------------------------- three-message erasure decoding

@dataclass(frozen=True)
class ErasureDEState:
    x: float
    y: float
    w: float = 0.0
    z: float = 0.0


def erasure_de_step(s: ErasureDEState, d_r: int) -> ErasureDEState:
    """Upper-bound recursion for erasure (x) and wrong-sign (y) probabilities, degree-3 variables."""
    w = -math.expm1((d_r - 1) * math.log1p(-s.x))
    z = -math.expm1((d_r - 1) * math.log1p(-s.y))
    x = min(1.0, w * w + z)
    y = min(1.0, z * z + w * z)
    return ErasureDEState(x, y, w, z)


def erasure_run(x0: float, y0: float, d_r: int, steps: int) -> list:
    out = [ErasureDEState(x0, y0)]
    for _ in range(steps):
        out.append(erasure_de_step(out[-1], d_r))
    return out


# ---------------------------------------------------------------- scalar inequalities

def pprod_sides(ps) -> tuple[Fraction, Fraction]:
    """Both sides of (1 - prod(1 - 2 p_i)) / 2 <= sum p_i, exactly in rationals."""
    ps = np.asarray(ps, dtype=float)
    if ((ps < 0) | (ps > 1)).any():
        raise ValueError("entries must lie in [0, 1]")
    fr = [Fraction(float(p)) for p in ps]
    prod = Fraction(1)
    for p in fr:
        prod *= 1 - 2 * p
    return (1 - prod) / 2, sum(fr, Fraction(0))


def verify_pprodineq(ps) -> bool:
    lhs, rhs = pprod_sides(ps)
    return lhs <= rhs


@dataclass
class CheckBattaReport:
    lhs: float
    rhs: float
    precise_slack: float | None = None  # set when a near-tie was recomputed at high precision

    @property
    def slack(self) -> float:
        return self.precise_slack if self.precise_slack is not None else self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.slack >= 0


def _two_level(p: float, k: float):
    return np.array([-k, k]), np.array([p, 1 - p])


def exact_check_output(inputs, rule: str = SUM_PRODUCT, max_atoms: int = 200_000):
    """Exact atoms of the check-node output for a list of (values, masses) inputs."""
    vals, ms = np.array([np.inf]), np.array([1.0])
    for v, m in inputs:
        v = np.asarray(v, float)
        m = np.asarray(m, float)
        nv = check_combine(vals[:, None], v[None, :], rule).ravel()
        nm = np.outer(ms, m).ravel()
        vals, inv = np.unique(nv, return_inverse=True)
        ms = np.bincount(inv.ravel(), nm)
        if vals.size > max_atoms:
            raise ValueError("too many atoms for exact enumeration")
    return vals, ms


def _atoms_batta(vals, ms) -> float:
    with np.errstate(over="ignore"):
        return float(np.sum(ms * np.exp(-vals / 2)))


def _precise_check_batta(inputs) -> mpmath.mpf:
    """B of the check output from the product of tanh(v/2), at 40 digits."""
    with mpmath.workdps(40):
        acc = [(mpmath.mpf(1), mpmath.mpf(1))]  # (prod of tanh, mass)
        for v, m in inputs:
            t = [mpmath.mpf(1) if x == np.inf else mpmath.mpf(-1) if x == -np.inf
                 else mpmath.tanh(mpmath.mpf(float(x)) / 2) for x in v]
            acc = [(T * tj, w * mpmath.mpf(float(mj))) for T, w in acc for tj, mj in zip(t, m)]
        total = mpmath.mpf(0)
        for T, w in acc:
            if T == -1:
                return mpmath.inf
            total += w * mpmath.sqrt((1 - T) / (1 + T))
        return total


def verify_check_batta_bound(atoms, densities, rule: str = SUM_PRODUCT,
                             level_term: bool = False) -> CheckBattaReport:
    """B(check out) <= (1 + sum_i (e^{K/2} B(D(p_i, K)) - 1)) * sum_j B(a_j).

    `atoms` is a list of (p, K) pairs sharing one level K.  `densities` may be
    QuantizedDensity objects or (values, masses) pairs; the output is
    enumerated exactly, without re-quantization.  With `level_term` the second
    factor also gets k*e^{-K/2}, which the inequality needs when some a_j is
    more reliable than the two-level inputs.  Near-ties are settled by a
    40-digit recomputation of the left side.
    """
    levels = {k for _, k in atoms}
    if len(levels) > 1:
        raise ValueError("all two-level inputs must share one level")
    inputs = [_two_level(p, k) for p, k in atoms]
    bs = []
    for a in densities:
        if isinstance(a, QuantizedDensity):
            v, m = a.support()
        else:
            v, m = (np.asarray(t, float) for t in a)
        inputs.append((v, m))
        bs.append(_atoms_batta(v, m))
    vals, ms = exact_check_output(inputs, rule)
    lhs = _atoms_batta(vals, ms)
    factor = 1.0
    for p, k in atoms:
        # e^{K/2} B(D(p,K)) - 1 = p (e^K - 1)
        factor += p * math.expm1(k)
    second = sum(bs)
    if level_term and atoms:
        second += len(atoms) * math.exp(-atoms[0][1] / 2)
    rhs = factor * second
    if rule == SUM_PRODUCT and abs(rhs - lhs) <= 1e-9 * max(abs(rhs), 1e-300):
        prec = _precise_check_batta(inputs)
        with mpmath.workdps(40):
            f = 1 + sum(mpmath.mpf(p) * mpmath.expm1(mpmath.mpf(k)) for p, k in atoms)
            s2 = mpmath.fsum(mpmath.fsum(mpmath.mpf(float(mj)) * mpmath.exp(-mpmath.mpf(float(vj)) / 2)
                                         for vj, mj in zip(v, m)) for v, m in inputs[len(atoms):])
            if level_term and atoms:
                s2 += len(atoms) * mpmath.exp(-mpmath.mpf(atoms[0][1]) / 2)
            r = f * s2
            gap = r - prec
            if abs(gap) <= mpmath.mpf("1e-30") * abs(r):
                gap = mpmath.mpf(0)  # equal to working precision
            return CheckBattaReport(float(prec), float(r), float(gap))
    return CheckBattaReport(lhs, rhs)


def check_magnitude_bounds(mags, rule: str = SUM_PRODUCT) -> tuple[float, float, float]:
    """(lower, actual, upper) for the output magnitude given input magnitudes."""
    mags = np.asarray(mags, dtype=float)
    out = np.inf
    for m in mags:
        out = float(np.abs(check_combine(out, m, rule)))
    finite = mags[np.isfinite(mags)]
    lower = -float(np.log(np.sum(np.exp(-finite)))) if finite.size else math.inf
    upper = float(mags.min())
    return lower, out, upper


def magnitude_bound_slack(mags, rule: str = SUM_PRODUCT) -> float:
    """min(out - lower, upper - out); near-ties are recomputed at 80 digits."""
    lower, out, upper = check_magnitude_bounds(mags, rule)
    slack = min(out - lower, upper - out)
    if slack > 1e-9 * max(1.0, abs(out)):
        return slack
    # 1 - tanh(m/2) ~ 2e^{-m} eats digits, so work well past 40
    with mpmath.workdps(80):
        ms = [mpmath.mpf(float(m)) for m in mags]
        if rule == MIN_SUM:
            o = min(ms)
        else:
            T = mpmath.fprod(mpmath.tanh(m / 2) for m in ms)
            o = 2 * mpmath.atanh(T)
        lo = -mpmath.log(mpmath.fsum(mpmath.exp(-m) for m in ms))
        s = min(o - lo, min(ms) - o)
        if abs(s) <= mpmath.mpf("1e-30") * max(1, abs(o)):
            s = mpmath.mpf(0)
        return float(s)


def capacity_loss(c: QuantizedDensity, k_channel: float) -> tuple[float, float]:
    """(H(symmetric saturation of c) - H(c), (2/ln 2) e^{-k/2})."""
    s = symmetric_saturate(c, k_channel)
    return entropy(s) - entropy(c), 2 / math.log(2) * math.exp(-k_channel / 2)


# ---------------------------------------------------------------- randomized sweeps

@dataclass
class SweepResult:
    lemma: str
    trials: int
    failures: int
    worst_slack: float
    worst_case: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def record(self) -> dict:
        return {"lemma": self.lemma, "trials": self.trials, "failures": self.failures,
                "worst_slack": self.worst_slack, "worst_case": self.worst_case}


class _Tracker:
    def __init__(self, name):
        self.name, self.n, self.fail, self.worst, self.case = name, 0, 0, math.inf, {}

    def add(self, slack: float, ok: bool, case: dict):
        self.n += 1
        self.fail += not ok
        if slack < self.worst:
            self.worst, self.case = float(slack), case

    def result(self) -> SweepResult:
        return SweepResult(self.name, self.n, self.fail, self.worst, self.case)


def random_symmetric_density(grid: GridSpec, rng: np.random.Generator, atoms: int | None = None,
                             inf_prob: float = 0.2) -> QuantizedDensity:
    """Random symmetric density: a few |LLR| atoms on grid magnitudes, maybe an atom at +inf."""
    r = atoms or int(rng.integers(1, 6))
    mags = rng.integers(0, grid.center + 1, size=r) * grid.spacing
    w = rng.dirichlet(np.ones(r + 1))
    inf_mass = float(w[-1]) if rng.random() < inf_prob else 0.0
    dm = w[:-1] if inf_mass else w[:-1] / w[:-1].sum()
    return symmetric_from_magnitudes(grid, mags, dm, inf_mass)


def _random_atoms(rng, lo=-10.0, hi=10.0):
    r = int(rng.integers(1, 4))
    return rng.uniform(lo, hi, r), rng.dirichlet(np.ones(r))


def sweep_pprod(trials: int, seed=None) -> SweepResult:
    rng = np.random.default_rng(seed)
    t = _Tracker("pprod")
    for _ in range(trials):
        ps = rng.uniform(0, rng.choice([0.05, 0.5, 1.0]), int(rng.integers(1, 11)))
        lhs, rhs = pprod_sides(ps)
        t.add(float(rhs - lhs), lhs <= rhs, {"ps": ps.tolist()})
    return t.result()


def sweep_check_batta(trials: int, seed=None, additive: bool = False,
                      level_term: bool = False) -> SweepResult:
    """Random two-level atoms (shared level) and arbitrary, not necessarily symmetric, densities."""
    rng = np.random.default_rng(seed)
    t = _Tracker("additive" if additive else "checkbatta+level" if level_term else "checkbatta")
    for _ in range(trials):
        K = 0.0 if additive else float(rng.uniform(0, 12))
        n_atoms = 0 if additive else int(rng.integers(0, 4))
        atoms = [(float(rng.uniform(0, 0.5)), K) for _ in range(n_atoms)]
        dens = [_random_atoms(rng) for _ in range(int(rng.integers(1, 4)))]
        rep = verify_check_batta_bound(atoms, dens, level_term=level_term)
        t.add(rep.slack, rep.ok, {"atoms": atoms, "lhs": rep.lhs, "rhs": rep.rhs})
    return t.result()


def sweep_magnitude_bounds(trials: int, seed=None, rule: str = SUM_PRODUCT) -> SweepResult:
    rng = np.random.default_rng(seed)
    t = _Tracker(f"magbound-{rule}")
    for _ in range(trials):
        mags = rng.uniform(0, 30, int(rng.integers(1, 10)))
        slack = magnitude_bound_slack(mags, rule)
        t.add(slack, slack >= 0, {"mags": mags.tolist()})
    return t.result()


def sweep_wasserstein_sat(trials: int, seed=None, levels=(1, 2, 4, 8),
                          grid: GridSpec | None = None) -> SweepResult:
    """wasserstein(a, symmetric_saturate(a, k)) <= 1 - tanh(k/2) + 5 h on random symmetric a."""
    from .density import wasserstein
    grid = grid or GridSpec.build(1 / 16, 12)
    rng = np.random.default_rng(seed)
    t = _Tracker("wasserstein-sat")
    for _ in range(trials):
        a = random_symmetric_density(grid, rng)
        for k in levels:
            d = wasserstein(a, symmetric_saturate(a, k))
            bound = 1 - math.tanh(k / 2) + 5 * grid.spacing
            t.add(bound - d, d <= bound, {"k": k, "distance": d})
    return t.result()


def sweep_de_distance(trials: int, seed=None) -> SweepResult:
    """Lockstep plain/symmetric-saturated DE on (3,6) over random BEC erasure rates and levels."""
    from .channels import ChannelFamily
    from .de import perturbation_check
    rng = np.random.default_rng(seed)
    dd = DegreeDistribution.regular(3, 6)
    t = _Tracker("de-distance")
    for _ in range(trials):
        eps = float(rng.uniform(0.2, 0.42))
        k = float(rng.integers(8, 15))
        rep = perturbation_check(dd, ChannelFamily("bec", eps), k, 4)
        slack = min(r.distance_bound + rep.distance_tol - r.distance for r in rep.rows)
        t.add(slack, rep.ok, {"eps": eps, "k_var": k, "failures": rep.failures()})
    return t.result()


def sweep_capacity_loss(trials: int, seed=None, levels=(5, 10, 15), tol: float = 1e-9) -> SweepResult:
    from .channels import ChannelFamily, channel_density
    rng = np.random.default_rng(seed)
    t = _Tracker("capacity-loss")
    for _ in range(trials):
        if rng.random() < 0.5:
            fam = ChannelFamily("bsc", float(rng.uniform(1e-4, 0.5)))
        else:
            fam = ChannelFamily("biawgn", float(rng.uniform(0.5, 1.5)))
        grid = GridSpec.build(1 / 16, max(20.0, _half_range_for(fam)))
        c = channel_density(fam, grid)
        for k in levels:
            loss, bound = capacity_loss(c, k)
            t.add(bound + tol - loss, loss <= bound + tol, {"channel": str(fam), "k": k, "loss": loss})
    return t.result()


def _half_range_for(fam) -> float:
    from .channels import required_half_range
    return required_half_range(fam) + 1.0


LEMMAS = {
    "pprod": sweep_pprod,
    "checkbatta": sweep_check_batta,
    "checkbatta-level": lambda n, s=None: sweep_check_batta(n, s, level_term=True),
    "additive": lambda n, s=None: sweep_check_batta(n, s, additive=True),
    "magbound": None,
    "wasserstein-sat": sweep_wasserstein_sat,
    "de-distance": sweep_de_distance,
    "capacity-loss": sweep_capacity_loss,
}


def run_lemma(name: str, trials: int, seed=None) -> list[SweepResult]:
    if name not in LEMMAS:
        raise ValueError(f"lemma: unknown lemma {name!r}")
    if name == "magbound":
        return [sweep_magnitude_bounds(trials, seed, SUM_PRODUCT),
                sweep_magnitude_bounds(trials, seed, MIN_SUM)]
    return [LEMMAS[name](trials, seed)]
