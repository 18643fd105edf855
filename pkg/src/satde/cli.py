"""Command-line entry point: de, threshold, simulate, stability, verify, channel-info."""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import channels as ch
from .density import MIN_SUM, SUM_PRODUCT, GridSpec, battacharyya
from .de import (DEMode, FULL_BP, SAT_TWO_TIER, StopRule, VARIANTS, default_config,
                 find_threshold, prepare_channel, run_de, NonMonotoneError)
from .ensembles import parse_ensemble
from .graph import DecoderConfig, monte_carlo
from .saturation import SaturationConfig, SaturationConfigError
from .stability import (GENERAL, HIGH_DEGREE, TWO_TIER, ContractionError, OutOfWindowError,
                        LEMMAS, contraction_run, near_stability_window, run_lemma,
                        stability_margin, window_entry_state)

# k_var used to size the grid when no saturation level is given
BP_GRID_KVAR = 30.0

DEFAULTS = {
    "mode": FULL_BP, "rule": SUM_PRODUCT, "kvar": None, "kchannel": None, "kalt": None,
    "tier_ratio": None, "spacing": 1 / 16, "half_range": None, "iters": 500, "tol": 1e-4,
    "n": 4096, "trials": 100, "seed": 0, "jobs": 1, "out": None, "with_bp": False,
    "flipping": False, "erasure_phase": None, "bound_mode": None, "bound_iters": 30,
    "ensemble": None, "channel": None, "lemma": None,
}


class ValidationError(Exception):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.12g}"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- configuration

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError("config", str(e)) from None
    if not isinstance(raw, dict):
        raise ValidationError("config", "top level must be an object")
    return {k.replace("-", "_"): v for k, v in raw.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Flags win over the config file, which wins over defaults."""
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func"):
            cfg[k] = v
    return cfg


def _ensemble(cfg):
    if not cfg.get("ensemble"):
        raise ValidationError("ensemble", "required")
    try:
        return parse_ensemble(str(cfg["ensemble"]))
    except ValueError as e:
        raise ValidationError("ensemble", str(e).removeprefix("ensemble: ")) from None


def _channel(cfg, need_param=True):
    if not cfg.get("channel"):
        raise ValidationError("channel", "required")
    try:
        kind, param = ch.parse_channel(str(cfg["channel"]))
    except ValueError as e:
        raise ValidationError("channel", str(e).removeprefix("channel: ")) from None
    if need_param and param is None:
        raise ValidationError("channel", "needs a parameter, e.g. bec:0.4")
    return kind, param


def _mode(cfg) -> DEMode:
    if cfg["mode"] not in VARIANTS:
        raise ValidationError("mode", f"expected one of {', '.join(VARIANTS)}")
    if cfg["rule"] not in (SUM_PRODUCT, MIN_SUM):
        raise ValidationError("rule", f"expected {SUM_PRODUCT} or {MIN_SUM}")
    return DEMode(cfg["mode"], cfg["rule"])


def _number(cfg, key, positive=True):
    v = cfg.get(key)
    if v is None:
        return None
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ValidationError(key, f"not a number: {v!r}") from None
    if positive and not v > 0:
        raise ValidationError(key, "must be positive")
    return v


def _grid(cfg, kvar: float | None, family=None) -> GridSpec:
    h = _number(cfg, "spacing")
    hr = _number(cfg, "half_range")
    if hr is None:
        hr = (kvar if kvar is not None else BP_GRID_KVAR) + 4
        if family is not None:
            hr = max(hr, ch.required_half_range(family) + 1.0)
    return GridSpec.build(h, hr)


def _sat(cfg, dd, mode: DEMode, grid: GridSpec | None, required: bool) -> SaturationConfig | None:
    kvar = _number(cfg, "kvar")
    if kvar is None:
        if required:
            raise ValidationError("kvar", f"required for mode {mode.variant}")
        return None
    tier = _number(cfg, "tier_ratio")
    if mode.variant == SAT_TWO_TIER and tier is None:
        kalt = _number(cfg, "kalt")
        if kalt is None:
            raise ValidationError("tier_ratio", "two-tier mode needs --tier-ratio or --kalt")
        tier = kalt / kvar
    try:
        return SaturationConfig.build(kvar, dd.max_check_degree, grid, _number(cfg, "kchannel"),
                                      tier, mode.check_rule)
    except SaturationConfigError as e:
        raise ValidationError(e.field, str(e).split(": ", 1)[-1]) from None


# ---------------------------------------------------------------- commands

def cmd_de(cfg) -> int:
    dd = _ensemble(cfg)
    kind, param = _channel(cfg)
    mode = _mode(cfg)
    fam = ch.ChannelFamily(kind, param)
    kvar = _number(cfg, "kvar")
    grid = _grid(cfg, kvar, fam)
    sat = _sat(cfg, dd, mode, grid, mode.saturated)
    iters = int(cfg["iters"])
    from .de import success_target
    stop = StopRule(b_target=success_target(mode, sat), max_iters=iters)
    try:
        trace = run_de(mode, dd, fam, sat, grid, stop, with_bp=bool(cfg["with_bp"]))
    except ch.GridTooNarrowError as e:
        raise ValidationError("half_range", str(e)) from None
    _emit(trace.to_csv(), cfg["out"])
    if cfg["out"]:
        r = trace.last
        print(f"outcome {trace.outcome} iters {r.iter} B {fmt(r.B)} Pe {fmt(r.Pe)}")
    return 0


def cmd_threshold(cfg) -> int:
    dd = _ensemble(cfg)
    kind, _ = _channel(cfg, need_param=False)
    mode = _mode(cfg)
    kvar = _number(cfg, "kvar")
    grid = _grid(cfg, kvar)
    sat = _sat(cfg, dd, mode, grid, mode.saturated)
    try:
        res = find_threshold(mode, dd, kind, sat, grid, tol=_number(cfg, "tol"), jobs=int(cfg["jobs"]))
    except NonMonotoneError as e:
        print(json.dumps({"error": "non-monotone", "bracket": list(e.bracket)}))
        return 1
    except ch.GridTooNarrowError as e:
        raise ValidationError("half_range", str(e)) from None
    print(f"threshold {fmt(res.mid)} interval [{fmt(res.lo)}, {fmt(res.hi)}] "
          f"half_width {fmt((res.hi - res.lo) / 2)}")
    return 0


def cmd_simulate(cfg) -> int:
    dd = _ensemble(cfg)
    kind, param = _channel(cfg)
    mode = _mode(cfg)
    sat = _sat(cfg, dd, DEMode(mode.variant if mode.variant != FULL_BP else "sathard", mode.check_rule),
               None, False)
    if cfg["flipping"] and sat is None:
        raise ValidationError("flipping", "needs --kvar")
    ep = _number(cfg, "erasure_phase")
    n, trials = int(cfg["n"]), int(cfg["trials"])
    if n < 2:
        raise ValidationError("n", "must be at least 2")
    if trials < 1:
        raise ValidationError("trials", "must be at least 1")
    dcfg = DecoderConfig(cfg["rule"], sat, bool(cfg["flipping"]), ep, int(cfg["iters"]))
    rep = monte_carlo(dd, n, ch.ChannelFamily(kind, param), dcfg, trials, int(cfg["seed"]),
                      int(cfg["jobs"]))
    _emit(rep.to_csv(), cfg["out"])
    lo, hi = rep.ber_interval()
    blo, bhi = rep.bler_interval()
    summary = (f"ber {fmt(rep.ber)} ci [{fmt(lo)}, {fmt(hi)}] "
               f"bler {fmt(rep.bler)} ci [{fmt(blo)}, {fmt(bhi)}]")
    print(summary, file=sys.stderr if not cfg["out"] else sys.stdout)
    return 0


def cmd_stability(cfg) -> int:
    dd = _ensemble(cfg)
    kind, param = _channel(cfg)
    fam = ch.ChannelFamily(kind, param)
    kvar = _number(cfg, "kvar")
    if kvar is None:
        raise ValidationError("kvar", "required")
    grid = _grid(cfg, kvar, fam)
    tier = _number(cfg, "tier_ratio")
    variant = SAT_TWO_TIER if tier is not None else "sathard"
    mode = DEMode(variant, cfg["rule"])
    sat = _sat(cfg, dd, mode, grid, True)
    c = prepare_channel(mode, ch.channel_density(fam, grid), sat)
    lines = [f"margin {fmt(stability_margin(dd, c, sat.k_channel))}"]
    w = near_stability_window(dd, c, sat.k_var)
    for k in ("feasible", "x_star", "g_at_xstar", "f_at_xstar", "k_min", "residual_bound", "c_dmin"):
        lines.append(f"{k} {fmt(getattr(w, k))}")
    bm = cfg["bound_mode"] or (TWO_TIER if tier is not None else
                               HIGH_DEGREE if dd.min_var_degree >= 5 else GENERAL)
    if bm not in (GENERAL, HIGH_DEGREE, TWO_TIER):
        raise ValidationError("bound_mode", f"expected {GENERAL}, {HIGH_DEGREE} or {TWO_TIER}")
    try:
        rep = contraction_run(window_entry_state(dd, sat), dd, battacharyya(c), sat,
                              int(cfg["bound_iters"]), bm)
        lines += [f"bound_mode {bm}", f"rate_exponent {fmt(rep.rate_exponent)}",
                  f"required_exponent {fmt(rep.required_exponent)}",
                  f"doubly_exponential {fmt(rep.doubly_exponential)}",
                  f"block_threshold_ok {fmt(rep.block_threshold_ok)}"]
        if rep.quadratic_ok is not None:
            lines.append(f"quadratic_contraction {fmt(rep.quadratic_ok)}")
    except (OutOfWindowError, ContractionError, ValueError) as e:
        lines.append(f"contraction unavailable: {e}")
    _emit("\n".join(lines) + "\n", cfg["out"])
    return 0


def cmd_verify(cfg) -> int:
    name = cfg.get("lemma")
    if name not in LEMMAS:
        raise ValidationError("lemma", f"expected one of {', '.join(LEMMAS)}")
    trials = int(cfg["trials"])
    if trials < 1:
        raise ValidationError("trials", "must be at least 1")
    results = run_lemma(name, trials, int(cfg["seed"]))
    lines = ["lemma,trials,failures,worst_slack,status"]
    for r in results:
        lines.append(f"{r.lemma},{r.trials},{r.failures},{fmt(r.worst_slack)},{'pass' if r.ok else 'fail'}")
    _emit("\n".join(lines) + "\n", cfg["out"])
    bad = [r.record() for r in results if not r.ok]
    if bad:
        print(json.dumps({"verification_failed": bad}, default=float), file=sys.stderr)
        return 1
    return 0


def cmd_channel_info(cfg) -> int:
    kind, param = _channel(cfg)
    fam = ch.ChannelFamily(kind, param)
    kvar = _number(cfg, "kvar")
    grid = _grid(cfg, kvar, fam)
    c = ch.channel_density(fam, grid)
    h = fam.entropy
    rows = [("kind", kind), ("param", param), ("entropy", h), ("capacity", 1 - h),
            ("battacharyya", ch.battacharyya_closed_form(fam)),
            ("battacharyya_grid", battacharyya(c)), ("llr", fam.llr() if kind != ch.BEC else math.inf)]
    _emit("".join(f"{k} {v if isinstance(v, str) else fmt(v)}\n" for k, v in rows), cfg["out"])
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="satde", description="Density evolution and decoding for saturated BP.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *extra):
        sp.add_argument("--config", help="JSON file with keys named like the flags")
        sp.add_argument("--out")
        for name in extra:
            sp.add_argument(*name[0], **name[1])

    ens = (["--ensemble"], {})
    chan = (["--channel"], {})
    kv = (["--kvar"], {"type": float})
    kch = (["--kchannel"], {"type": float})
    kal = (["--kalt"], {"type": float})
    tr = (["--tier-ratio"], {"type": float, "dest": "tier_ratio"})
    mode = (["--mode"], {"choices": VARIANTS})
    rule = (["--rule"], {"choices": (SUM_PRODUCT, MIN_SUM)})
    spc = (["--spacing"], {"type": float})
    hr = (["--half-range"], {"type": float, "dest": "half_range"})
    iters = (["--iters"], {"type": int})
    jobs = (["--jobs"], {"type": int})
    seed = (["--seed"], {"type": int})
    trials = (["--trials"], {"type": int})

    sp = sub.add_parser("de", help="run density evolution and write a trace CSV")
    common(sp, ens, chan, mode, rule, kv, kch, kal, tr, spc, hr, iters,
           (["--with-bp"], {"action": "store_const", "const": True, "dest": "with_bp"}))
    sp.set_defaults(func=cmd_de)

    sp = sub.add_parser("threshold", help="bisect the channel parameter for the decoding threshold")
    common(sp, ens, chan, mode, rule, kv, kch, kal, tr, spc, hr, jobs, (["--tol"], {"type": float}))
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("simulate", help="Monte Carlo decoding on sampled Tanner graphs")
    common(sp, ens, chan, mode, rule, kv, kch, kal, tr, iters, jobs, seed, trials,
           (["--n"], {"type": int}),
           (["--flipping"], {"action": "store_const", "const": True}),
           (["--erasure-phase"], {"type": float, "dest": "erasure_phase"}))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stability", help="near-stability window and contraction report")
    common(sp, ens, chan, rule, kv, kch, kal, tr, spc, hr,
           (["--bound-mode"], {"choices": (GENERAL, HIGH_DEGREE, TWO_TIER), "dest": "bound_mode"}),
           (["--bound-iters"], {"type": int, "dest": "bound_iters"}))
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("verify", help="randomized checks of the scalar and density inequalities")
    common(sp, trials, seed, (["--lemma"], {"choices": tuple(LEMMAS)}))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("channel-info", help="entropy and Battacharyya parameter of a channel")
    common(sp, chan, kv, spc, hr)
    sp.set_defaults(func=cmd_channel_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return args.func(cfg)
    except ValidationError as e:
        print(json.dumps({"error": "validation", "field": e.field, "message": str(e)}), file=sys.stderr)
        return 2
    except ValueError as e:
        # invariant checks deeper down use "field: message"
        field = str(e).split(":", 1)[0] if ":" in str(e) else "input"
        print(json.dumps({"error": "validation", "field": field, "message": str(e)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
