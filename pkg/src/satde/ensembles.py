"""Edge-perspective degree distributions and their action on densities."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .density import (SUM_PRODUCT, QuantizedDensity, chk_convolve, delta,
                      var_convolve)


@dataclass(frozen=True)
class DegreeDistribution:
    lambda_coeffs: dict
    rho_coeffs: dict
    label: str = field(default="", compare=False)

    def __post_init__(self):
        for name, co in (("lambda", self.lambda_coeffs), ("rho", self.rho_coeffs)):
            if not co:
                raise ValueError(f"{name}: empty degree distribution")
            for d, w in co.items():
                if int(d) != d or d < 1:
                    raise ValueError(f"{name}: bad degree {d!r}")
                if w < 0:
                    raise ValueError(f"{name}: negative coefficient for degree {d}")
            if abs(sum(co.values()) - 1.0) > 1e-12:
                raise ValueError(f"{name}: coefficients sum to {sum(co.values())!r}, not 1")
        if min(self.rho_coeffs) < 2:
            raise ValueError("rho: check degrees must be at least 2")
        # drop zero terms, store sorted
        object.__setattr__(self, "lambda_coeffs",
                           {int(d): float(w) for d, w in sorted(self.lambda_coeffs.items()) if w > 0})
        object.__setattr__(self, "rho_coeffs",
                           {int(d): float(w) for d, w in sorted(self.rho_coeffs.items()) if w > 0})

    @classmethod
    def regular(cls, dl: int, dr: int) -> "DegreeDistribution":
        return cls({dl: 1.0}, {dr: 1.0}, f"reg:{dl},{dr}")

    # edge-perspective averages sum_i i*lambda_i and sum_i i*rho_i
    @property
    def d_l_avg(self) -> float:
        return sum(d * w for d, w in self.lambda_coeffs.items())

    @property
    def d_r_avg(self) -> float:
        return sum(d * w for d, w in self.rho_coeffs.items())

    @property
    def lambda2(self) -> float:
        return self.lambda_coeffs.get(2, 0.0)

    @property
    def lambda3(self) -> float:
        return self.lambda_coeffs.get(3, 0.0)

    @property
    def rho_prime_1(self) -> float:
        return sum((d - 1) * w for d, w in self.rho_coeffs.items())

    @property
    def min_var_degree(self) -> int:
        return min(self.lambda_coeffs)

    @property
    def max_var_degree(self) -> int:
        return max(self.lambda_coeffs)

    @property
    def max_check_degree(self) -> int:
        return max(self.rho_coeffs)

    @property
    def check_regular_degree(self) -> int | None:
        return next(iter(self.rho_coeffs)) if len(self.rho_coeffs) == 1 else None

    def lam(self, x: float) -> float:
        return sum(w * x ** (d - 1) for d, w in self.lambda_coeffs.items())

    def rho(self, x: float) -> float:
        return sum(w * x ** (d - 1) for d, w in self.rho_coeffs.items())

    def design_rate(self) -> float:
        il = sum(w / d for d, w in self.lambda_coeffs.items())
        ir = sum(w / d for d, w in self.rho_coeffs.items())
        return 1.0 - ir / il

    def node_fractions(self) -> tuple[dict, dict]:
        """Node-perspective degree fractions (variables, checks)."""
        il = sum(w / d for d, w in self.lambda_coeffs.items())
        ir = sum(w / d for d, w in self.rho_coeffs.items())
        return ({d: w / d / il for d, w in self.lambda_coeffs.items()},
                {d: w / d / ir for d, w in self.rho_coeffs.items()})

    def __str__(self):
        if self.label:
            return self.label
        ls = ",".join(f"l{d}={w:.12g}" for d, w in self.lambda_coeffs.items())
        rs = ",".join(f"r{d}={w:.12g}" for d, w in self.rho_coeffs.items())
        return f"irr: {ls} ; {rs}"


_TERM = re.compile(r"^([lr])(\d+)\s*=\s*([0-9.eE+-]+)$")


def parse_ensemble(text: str) -> DegreeDistribution:
    """Parse 'reg:3,6' or 'irr: l2=0.3,l3=0.7 ; r6=1.0'."""
    s = text.strip()
    kind, sep, body = s.partition(":")
    kind = kind.strip().lower()
    if not sep:
        raise ValueError(f"ensemble: missing ':' in {text!r}")
    if kind == "reg":
        parts = [p.strip() for p in body.split(",")]
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ValueError(f"ensemble: expected 'reg:dl,dr', got {text!r}")
        dl, dr = int(parts[0]), int(parts[1])
        if dl < 1 or dr < 2:
            raise ValueError("ensemble: degrees out of range")
        return DegreeDistribution.regular(dl, dr)
    if kind == "irr":
        lam, rho = {}, {}
        for tok in re.split(r"[,;]", body):
            tok = tok.strip()
            if not tok:
                continue
            mt = _TERM.match(tok)
            if not mt:
                raise ValueError(f"ensemble: cannot parse term {tok!r}")
            side, deg, w = mt.group(1), int(mt.group(2)), float(mt.group(3))
            (lam if side == "l" else rho)[deg] = w
        return DegreeDistribution(lam, rho, s)
    raise ValueError(f"ensemble: unknown kind {kind!r}")


def rho_apply(dd: DegreeDistribution, x: QuantizedDensity, rule: str = SUM_PRODUCT) -> QuantizedDensity:
    """sum_i rho_i x^{check-conv (i-1)}, powers built by a left fold."""
    return _mix(x, dd.rho_coeffs, lambda u, v: chk_convolve(u, v, rule), delta(x.grid, math.inf))


def lambda_apply(dd: DegreeDistribution, c: QuantizedDensity, b: QuantizedDensity) -> QuantizedDensity:
    """c (var-conv) sum_i lambda_i b^{var-conv (i-1)}."""
    return var_convolve(c, _mix(b, dd.lambda_coeffs, var_convolve, delta(b.grid, 0.0)))


def _mix(x, coeffs, op, identity):
    power = identity
    m = np.zeros_like(x.interior_mass)
    pos = neg = 0.0
    for k in range(1, max(coeffs) + 1):
        if k == 2:
            power = x
        elif k > 2:
            power = op(power, x)
        w = coeffs.get(k, 0.0)
        if w:
            m += w * power.interior_mass
            pos += w * power.atom_pos_inf
            neg += w * power.atom_neg_inf
    return QuantizedDensity(x.grid, m, pos, neg)
