"""Invariant-region machinery for the duct system.

Critical constants of the quotient function f, duct-coefficient profiles with
their integrable majorants, machine-checked certificates for the admissibility
conditions on (a, L1, L2, U1, U2), x-dependent rectangle membership, corner
bounds on the characteristic speeds, and a feasibility search for admissible
constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    CertificateFailure,
    DomainError,
    PoleError,
    SearchError,
)
from .model import GasLaw, RiemannState, speeds_zw

#: Numerical grace for non-strict inequalities evaluated in floating point.
ROUNDOFF = 32.0 * float(np.finfo(float).eps)

#: Default certification margin required of strict inequalities.
STRICT_MARGIN = 1e-9


# ---------------------------------------------------------------------------
# critical constants of f
# ---------------------------------------------------------------------------

def f_eval(r, law: GasLaw):
    """The quotient (2/(gamma-1)) (gamma+1+(3-gamma) r) / |r^2-1|."""
    r = np.asarray(r, dtype=float)
    if np.any(r == 1.0) or np.any(r == -1.0):
        raise PoleError("f has poles at r = +-1")
    g = law.gamma
    return (2.0 / (g - 1.0)) * (g + 1.0 + (3.0 - g) * r) / np.abs(r * r - 1.0)


@dataclass(frozen=True)
class CriticalConstants:
    """Interior minimum l of f on [-1,1] and the two outer level-l roots."""

    l: float
    sigma1: float
    sigma2: float


def _bisect(fn, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise SearchError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or hi - lo < tol * max(1.0, abs(mid)):
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def critical_constants(law: GasLaw) -> CriticalConstants:
    """l from the closed-form interior critical point; the outer roots of
    f(r) = l by bisection on (-2, -1) and (1, inf)."""
    g = law.gamma
    disc = (g + 1.0) ** 2 - (3.0 - g) ** 2  # = 8 (gamma - 1) > 0
    r_star = (-(g + 1.0) + math.sqrt(disc)) / (3.0 - g)
    l = float(f_eval(r_star, law))

    def shifted(r):
        return float(f_eval(r, law)) - l

    eps = 1e-9
    sigma1 = -_bisect(shifted, -2.0 + eps, -1.0 - eps)
    hi = 2.0
    while shifted(hi) > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise SearchError("could not bracket the outer root of f(r) = l")
    sigma2 = _bisect(shifted, 1.0 + eps, hi)
    return CriticalConstants(l=l, sigma1=float(sigma1), sigma2=float(sigma2))


# ---------------------------------------------------------------------------
# monotone cubic interpolation (for tabulated ducts)
# ---------------------------------------------------------------------------

class PchipCurve:
    """Shape-preserving cubic Hermite interpolant with Fritsch-Carlson slopes.

    Constant extension outside the table (derivative 0 there).
    """

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise DomainError("table abscissae must be strictly increasing, length >= 2")
        h = np.diff(xs)
        delta = np.diff(ys) / h
        d = np.zeros_like(ys)
        for i in range(1, len(xs) - 1):
            if delta[i - 1] * delta[i] <= 0.0:
                d[i] = 0.0
            else:
                w1 = 2.0 * h[i] + h[i - 1]
                w2 = h[i] + 2.0 * h[i - 1]
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
        d[0] = self._end_slope(h[0], h[1] if len(h) > 1 else h[0], delta[0],
                               delta[1] if len(h) > 1 else delta[0])
        d[-1] = self._end_slope(h[-1], h[-2] if len(h) > 1 else h[-1], delta[-1],
                                delta[-2] if len(h) > 1 else delta[-1])
        self.xs, self.ys, self.d = xs, ys, d

    @staticmethod
    def _end_slope(h0, h1, d0, d1):
        s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if s * d0 <= 0.0:
            return 0.0
        if abs(s) > 3.0 * abs(d0):
            return 3.0 * d0
        return s

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.xs) - 2)
        return x, i

    def __call__(self, x):
        x, i = self._locate(x)
        h = self.xs[i + 1] - self.xs[i]
        t = np.clip((x - self.xs[i]) / h, 0.0, 1.0)
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return (h00 * self.ys[i] + h * h10 * self.d[i]
                + h01 * self.ys[i + 1] + h * h11 * self.d[i + 1])

    def derivative(self, x):
        x, i = self._locate(x)
        h = self.xs[i + 1] - self.xs[i]
        t = (x - self.xs[i]) / h
        inside = (t >= 0.0) & (t <= 1.0)
        t = np.clip(t, 0.0, 1.0)
        dh00 = 6 * t * (t - 1)
        dh10 = (1 - t) * (1 - 3 * t)
        dh01 = -dh00
        dh11 = t * (3 * t - 2)
        val = (dh00 * self.ys[i] / h + dh10 * self.d[i]
               + dh01 * self.ys[i + 1] / h + dh11 * self.d[i + 1])
        return np.where(inside, val, 0.0)


# ---------------------------------------------------------------------------
# duct-coefficient profiles
# ---------------------------------------------------------------------------

@dataclass
class NozzleProfile:
    """Duct coefficient a(x) = A'(x)/A(x) with an integrable C^1 majorant.

    ``abar`` must dominate |a|/l pointwise (re-checked by certificates, not
    assumed).  ``I_total`` is the full integral of abar on [0, inf); for
    tabulated ducts without a user tail bound it only covers the table and the
    certificates carrying it are marked conditional.
    """

    a: Callable
    a_prime: Callable
    abar: Callable
    k1: float
    k2: float
    alpha: float
    M: float
    I_total: float
    conditional: bool = False
    label: str = "custom"
    _cum_x: Optional[np.ndarray] = field(default=None, repr=False)
    _cum_s: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("k1", "k2", "alpha", "M"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be positive")

    # -- cached cumulative quadrature of abar ------------------------------

    def _build_cum(self, x_hi: float):
        tol = 1e-10 * (1.0 + self.I_total if math.isfinite(self.I_total) else 1.0)
        n = 4096
        while True:
            xs = np.linspace(0.0, x_hi, n + 1)
            ys = np.asarray(self.abar(xs), dtype=float)
            seg = 0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)
            total = float(seg.sum())
            coarse = float((0.5 * (ys[2::2] + ys[:-1:2]) * (xs[2::2] - xs[:-1:2])).sum())
            if abs(total - coarse) / 3.0 < tol or n >= 1 << 21:
                break
            n *= 2
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._cum_x, self._cum_s = xs, cum

    def cum_abar(self, x):
        """Integral of abar from 0 to x (monotone, capped by I_total)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise DomainError("cumulative majorant integral needs x >= 0")
        x_hi = float(np.max(x)) if x.size else 0.0
        if x_hi == 0.0:
            return np.zeros_like(x) if x.ndim else 0.0
        if self._cum_x is None or self._cum_x[-1] < x_hi:
            self._build_cum(max(x_hi, 1.0))
        val = np.interp(x, self._cum_x, self._cum_s)
        if math.isfinite(self.I_total):
            val = np.minimum(val, self.I_total)
        return float(val) if val.ndim == 0 else val


def abar_cumulative(profile: NozzleProfile, x):
    return profile.cum_abar(x)


def power_profile(amp: float, rate: float, decay: float, law: GasLaw, *,
                  k1: float, k2: float, alpha: float, M: float,
                  margin: float = 1.05) -> NozzleProfile:
    """a(x) = amp (1 + rate x)^(-decay) with the scaled analytic majorant."""
    if rate <= 0.0 or decay <= 0.0:
        raise DomainError("rate and decay must be positive")
    l = critical_constants(law).l
    scale = margin * abs(amp) / l

    def a(x):
        return amp * (1.0 + rate * np.asarray(x, dtype=float)) ** (-decay)

    def a_prime(x):
        return -amp * rate * decay * (1.0 + rate * np.asarray(x, dtype=float)) ** (-decay - 1.0)

    def abar(x):
        return scale * (1.0 + rate * np.asarray(x, dtype=float)) ** (-decay)

    I = scale / (rate * (decay - 1.0)) if decay > 1.0 else math.inf
    return NozzleProfile(a, a_prime, abar, k1, k2, alpha, M, I, label="power")


def exp_profile(amp: float, rate: float, law: GasLaw, *, k1: float, k2: float,
                alpha: float, M: float, margin: float = 1.05) -> NozzleProfile:
    """a(x) = amp exp(-rate x)."""
    if rate <= 0.0:
        raise DomainError("rate must be positive")
    l = critical_constants(law).l
    scale = margin * abs(amp) / l

    def a(x):
        return amp * np.exp(-rate * np.asarray(x, dtype=float))

    def a_prime(x):
        return -amp * rate * np.exp(-rate * np.asarray(x, dtype=float))

    def abar(x):
        return scale * np.exp(-rate * np.asarray(x, dtype=float))

    return NozzleProfile(a, a_prime, abar, k1, k2, alpha, M, scale / rate, label="exp")


def zero_profile(*, k1: float = 1.0, k2: float = 1.0, alpha: float = 1.0,
                 M: float = 1.0) -> NozzleProfile:
    """Straight duct: a = abar = 0, zero total integral."""

    def zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return NozzleProfile(zero, zero, zero, k1, k2, alpha, M, 0.0, label="zero")


def tabulated_profile(xs, values, law: GasLaw, *, k1: float, k2: float,
                      alpha: float, M: float, margin: float = 1.05,
                      tail_bound: Optional[float] = None) -> NozzleProfile:
    """Duct coefficient from a table, monotone cubic in between.

    The majorant is a smoothed moving-maximum envelope of |a|/l bumped until
    it dominates at every node; certificates still re-check pointwise.
    Without ``tail_bound`` the total integral only covers the table and the
    profile is marked conditional.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs[0] != 0.0:
        raise DomainError("table must start at x = 0")
    curve = PchipCurve(xs, values)
    l = critical_constants(law).l

    window = max(2, len(xs) // 32)
    absval = np.abs(values)
    env = np.array([absval[max(0, i - window):i + window + 1].max() for i in range(len(xs))])
    knot_idx = np.unique(np.r_[np.arange(0, len(xs), window), len(xs) - 1])
    knot_vals = (margin / l) * env[knot_idx]
    target = (margin / l) * absval
    env_curve = PchipCurve(xs[knot_idx], knot_vals)
    for _ in range(4):
        vals = np.maximum(np.asarray(env_curve(xs)), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(target > 0.0, target / np.maximum(vals, 1e-300), 0.0)
        fac = float(ratio.max(initial=0.0))
        if fac <= 1.0:
            break
        knot_vals = knot_vals * (fac * 1.001)
        env_curve = PchipCurve(xs[knot_idx], knot_vals)
    abar_curve = env_curve

    def abar(x):
        return np.maximum(np.asarray(abar_curve(x), dtype=float), 0.0)

    seg_x = np.linspace(0.0, xs[-1], 8192)
    table_I = float(np.trapezoid(abar(seg_x), seg_x))
    conditional = tail_bound is None
    I = table_I + (0.0 if conditional else float(tail_bound))
    return NozzleProfile(curve, curve.derivative, abar, k1, k2, alpha, M, I,
                         conditional=conditional, label="table")


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class CertItem:
    name: str
    lhs: float
    rhs: float
    slack: float
    strict: bool
    passed: bool
    where: Optional[float] = None
    note: str = ""

    def to_dict(self):
        d = {"name": self.name, "lhs": float(self.lhs), "rhs": float(self.rhs),
             "slack": float(self.slack), "strict": bool(self.strict),
             "passed": bool(self.passed)}
        if self.where is not None:
            d["where"] = float(self.where)
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Certificate:
    name: str
    items: list
    conditional: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    @property
    def min_slack(self) -> float:
        return min((item.slack for item in self.items), default=math.inf)

    def failing(self):
        return [item.name for item in self.items if not item.passed]

    def render_text(self) -> str:
        lines = [f"certificate: {self.name}"]
        for key, val in self.meta.items():
            lines.append(f"  {key}: {val}")
        for item in self.items:
            mark = "PASS" if item.passed else "FAIL"
            where = f" at {item.where:.6g}" if item.where is not None else ""
            note = f"  ({item.note})" if item.note else ""
            lines.append(
                f"  [{mark}] {item.name}: lhs={item.lhs:.12g} rhs={item.rhs:.12g} "
                f"slack={item.slack:.6g}{where}{note}"
            )
        verdict = "PASS" if self.passed else "FAIL"
        if self.conditional:
            verdict += " (conditional)"
        lines.append(f"  result: {verdict}")
        return "\n".join(lines)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "conditional": self.conditional,
            "min_slack": self.min_slack,
            "items": [item.to_dict() for item in self.items],
            "meta": self.meta,
        }


def _grace(*values) -> float:
    scale = max([1.0] + [abs(v) for v in values if math.isfinite(v)])
    return ROUNDOFF * scale


def _strict_ok(slack: float, lhs: float, rhs: float, margin: float) -> bool:
    """Strict inequalities demand a margin relative to the local magnitude,
    so decaying-to-zero pairs stay certifiable while exact ties never pass."""
    scale = max(abs(lhs), abs(rhs))
    return slack > 0.0 and slack >= margin * scale


def default_x_grid(x_hi: float = 1e3, n: int = 2048) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-4, x_hi, n)])


def check_h1(profile: NozzleProfile, x_grid=None) -> Certificate:
    """Per-sample decay bounds on a^2 and |a'| against k (1+Mx)^(-2-alpha)."""
    x = np.asarray(default_x_grid() if x_grid is None else x_grid, dtype=float)
    envelope = (1.0 + profile.M * x) ** (-2.0 - profile.alpha)
    items = []
    for name, lhs_vals, k in (
        ("a(x)^2 <= k1*(1+M*x)^(-2-alpha)", np.asarray(profile.a(x)) ** 2, profile.k1),
        ("|a'(x)| <= k2*(1+M*x)^(-2-alpha)", np.abs(np.asarray(profile.a_prime(x))), profile.k2),
    ):
        slack = k * envelope - lhs_vals
        i = int(np.argmin(slack))
        items.append(CertItem(name, float(lhs_vals[i]), float(k * envelope[i]),
                              float(slack[i]), strict=False,
                              passed=bool(slack[i] >= -_grace(lhs_vals[i], k * envelope[i])),
                              where=float(x[i])))
    return Certificate("decay", items, meta={"samples": int(x.size),
                                             "x_max": float(x.max())})


@dataclass(frozen=True)
class RegionSpec:
    """Envelope constants for one x-dependent invariant rectangle.

    ``kind`` is "m" (subsonic), "r" (rightward supersonic) or "l" (leftward
    supersonic).  The total majorant integral comes from the attached profile
    unless overridden (feasibility search results carry no profile).
    """

    kind: str
    L1: float
    L2: float
    U1: float
    U2: float
    profile: Optional[NozzleProfile] = None
    I_total: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("m", "r", "l"):
            raise DomainError(f"region kind must be m, r or l, got {self.kind!r}")
        for name in ("L1", "L2", "U1", "U2"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be positive")

    def total_abar(self) -> float:
        if self.I_total is not None:
            return self.I_total
        if self.profile is not None:
            return self.profile.I_total
        raise DomainError("region spec carries neither a profile nor a total integral")


class _Ineq:
    __slots__ = ("name", "strict", "lhs", "rhs")

    def __init__(self, name, strict, lhs, rhs):
        self.name, self.strict, self.lhs, self.rhs = name, strict, lhs, rhs


def _constant_inequalities(kind: str, law: GasLaw, consts: CriticalConstants,
                           I: float) -> list:
    """All envelope-constant inequalities of one admissibility set, oriented
    as lhs <(=) rhs; callables broadcast over numpy arrays."""
    g = law.gamma
    E = math.exp(2.0 * I) if math.isfinite(I) else math.inf
    s1, s2 = consts.sigma1, consts.sigma2
    low_ratio = (3.0 - g) / (g + 1.0)
    high_ratio = (g + 1.0) / (3.0 - g)
    if kind == "m":
        return [
            _Ineq("U1*exp(2I) <= L1", False, lambda L1, L2, U1, U2: U1 * E,
                  lambda L1, L2, U1, U2: L1),
            _Ineq("L2 <= U2", False, lambda L1, L2, U1, U2: L2,
                  lambda L1, L2, U1, U2: U2),
            _Ineq("(3-g)/(g+1) < L2/L1", True, lambda L1, L2, U1, U2: low_ratio + 0 * L1,
                  lambda L1, L2, U1, U2: L2 / L1),
            _Ineq("U2/U1 < (g+1)/(3-g)", True, lambda L1, L2, U1, U2: U2 / U1,
                  lambda L1, L2, U1, U2: high_ratio + 0 * L1),
            _Ineq("L1/L2 <= sigma1", False, lambda L1, L2, U1, U2: L1 / L2,
                  lambda L1, L2, U1, U2: s1 + 0 * L1),
            _Ineq("U2/U1 <= sigma1", False, lambda L1, L2, U1, U2: U2 / U1,
                  lambda L1, L2, U1, U2: s1 + 0 * L1),
            _Ineq("L1 <= U2", False, lambda L1, L2, U1, U2: L1,
                  lambda L1, L2, U1, U2: U2),
            _Ineq("L2 <= U1", False, lambda L1, L2, U1, U2: L2,
                  lambda L1, L2, U1, U2: U1),
        ]
    if kind == "r":
        return [
            _Ineq("L1 <= U1", False, lambda L1, L2, U1, U2: L1,
                  lambda L1, L2, U1, U2: U1),
            _Ineq("L2 <= U2", False, lambda L1, L2, U1, U2: L2,
                  lambda L1, L2, U1, U2: U2),
            _Ineq("U1*exp(2I) < L2", True, lambda L1, L2, U1, U2: U1 * E,
                  lambda L1, L2, U1, U2: L2),
            _Ineq("(U2/L1)*exp(2I) <= sigma2", False,
                  lambda L1, L2, U1, U2: (U2 / L1) * E,
                  lambda L1, L2, U1, U2: s2 + 0 * L1),
        ]
    return [
        _Ineq("U1*exp(2I) <= L1", False, lambda L1, L2, U1, U2: U1 * E,
              lambda L1, L2, U1, U2: L1),
        _Ineq("U2*exp(2I) <= L2", False, lambda L1, L2, U1, U2: U2 * E,
              lambda L1, L2, U1, U2: L2),
        _Ineq("L2 < U1", True, lambda L1, L2, U1, U2: L2,
              lambda L1, L2, U1, U2: U1),
        _Ineq("L1/(U2*exp(2I)) <= sigma2", False,
              lambda L1, L2, U1, U2: L1 / (U2 * E),
              lambda L1, L2, U1, U2: s2 + 0 * L1),
    ]


_HYP_NAMES = {"m": "band-m", "r": "band-r", "l": "band-l"}


def _check_hypothesis(kind: str, spec: RegionSpec, law: GasLaw,
                      consts: CriticalConstants, x_grid=None,
                      strict_margin: float = STRICT_MARGIN) -> Certificate:
    if spec.kind != kind:
        raise DomainError(f"spec kind {spec.kind!r} does not match requested {kind!r}")
    I = spec.total_abar()
    items = []
    conditional = False
    if spec.profile is not None:
        prof = spec.profile
        l = consts.l
        x = np.asarray(default_x_grid() if x_grid is None else x_grid, dtype=float)
        lhs_vals = np.abs(np.asarray(prof.a(x)))
        rhs_vals = l * np.asarray(prof.abar(x))
        slack = rhs_vals - lhs_vals
        scale = np.maximum(np.maximum(lhs_vals, rhs_vals), 1e-300)
        i = int(np.argmin(slack / scale))
        items.append(CertItem("|a| < l*abar", float(lhs_vals[i]), float(rhs_vals[i]),
                              float(slack[i]), strict=True,
                              passed=_strict_ok(float(slack[i]), float(lhs_vals[i]),
                                                float(rhs_vals[i]), strict_margin),
                              where=float(x[i])))
        conditional = conditional or prof.conditional
    else:
        conditional = True
    L1, L2, U1, U2 = spec.L1, spec.L2, spec.U1, spec.U2
    for ineq in _constant_inequalities(kind, law, consts, I):
        lhs = float(ineq.lhs(L1, L2, U1, U2))
        rhs = float(ineq.rhs(L1, L2, U1, U2))
        slack = rhs - lhs
        if ineq.strict:
            ok = _strict_ok(slack, lhs, rhs, strict_margin)
        else:
            ok = slack >= -_grace(lhs, rhs)
        items.append(CertItem(ineq.name, lhs, rhs, slack, ineq.strict, ok))
    cert = Certificate(_HYP_NAMES[kind], items, conditional=conditional,
                       meta={"I": I, "exp(2I)": math.exp(2.0 * I) if math.isfinite(I) else math.inf})
    return cert


def check_h2(spec: RegionSpec, law: GasLaw, consts: CriticalConstants,
             x_grid=None, strict_margin: float = STRICT_MARGIN) -> Certificate:
    return _check_hypothesis("m", spec, law, consts, x_grid, strict_margin)


def check_h3(spec: RegionSpec, law: GasLaw, consts: CriticalConstants,
             x_grid=None, strict_margin: float = STRICT_MARGIN) -> Certificate:
    return _check_hypothesis("r", spec, law, consts, x_grid, strict_margin)


def check_h4(spec: RegionSpec, law: GasLaw, consts: CriticalConstants,
             x_grid=None, strict_margin: float = STRICT_MARGIN) -> Certificate:
    return _check_hypothesis("l", spec, law, consts, x_grid, strict_margin)


def check_hypothesis(spec: RegionSpec, law: GasLaw, consts: CriticalConstants,
                     x_grid=None, strict_margin: float = STRICT_MARGIN) -> Certificate:
    """Dispatch to the admissibility certificate matching spec.kind."""
    return _check_hypothesis(spec.kind, spec, law, consts, x_grid, strict_margin)


# ---------------------------------------------------------------------------
# membership and speed bounds
# ---------------------------------------------------------------------------

def envelopes(spec: RegionSpec, s):
    """Rectangle faces (z_lo, z_hi, w_lo, w_hi) at cumulative majorant s."""
    s = np.asarray(s, dtype=float)
    grow, shrink = np.exp(s), np.exp(-s)
    if spec.kind == "m":
        return -spec.L1 * shrink, -spec.U1 * grow, spec.L2 * shrink, spec.U2 * grow
    if spec.kind == "r":
        return spec.L1 * shrink, spec.U1 * grow, spec.L2 * shrink, spec.U2 * grow
    return -spec.L1 * shrink, -spec.U1 * grow, -spec.L2 * shrink, -spec.U2 * grow


def membership_margins(z, w, s, spec: RegionSpec):
    """Signed distances to the four envelope faces and the w >= z face."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    z_lo, z_hi, w_lo, w_hi = envelopes(spec, s)
    return {
        "z_lo": z - z_lo,
        "z_hi": z_hi - z,
        "w_lo": w - w_lo,
        "w_hi": w_hi - w,
        "gap": w - z,
    }


@dataclass(frozen=True)
class MarginReport:
    margins: dict
    inside: bool

    @property
    def min_margin(self) -> float:
        return min(self.margins.values())


def membership(r: RiemannState, x: float, spec: RegionSpec) -> MarginReport:
    profile = spec.profile
    if profile is None:
        raise DomainError("membership needs a profile for the cumulative majorant")
    s = profile.cum_abar(x)
    margins = {k: float(v) for k, v in membership_margins(r.z, r.w, s, spec).items()}
    return MarginReport(margins, inside=all(v >= 0.0 for v in margins.values()))


@dataclass(frozen=True)
class SpeedBounds:
    """Corner-derived uniform bounds over the whole x-family of rectangles.

    d1, d2 bound |lambda1|, |lambda2| away from zero; sign1/sign2 are the
    uniform signs of the two speeds on the region; lambda_abs_max bounds both
    speeds in magnitude; C1, C2 bound |z|, |w| and C3 the gap from below.
    """

    d1: float
    d2: float
    sign1: int
    sign2: int
    lambda_abs_max: float
    C1: float
    C2: float
    C3: float


def region_corners(spec: RegionSpec, s):
    """The four (z, w) rectangle corners at cumulative majorant s."""
    z_lo, z_hi, w_lo, w_hi = envelopes(spec, s)
    return [(z_lo, w_lo), (z_lo, w_hi), (z_hi, w_lo), (z_hi, w_hi)]


def region_speed_bounds(spec: RegionSpec, law: GasLaw) -> SpeedBounds:
    th = law.theta
    I = spec.total_abar()
    if not math.isfinite(I):
        raise DomainError("speed bounds need a finite majorant integral")
    eI = math.exp(I)
    L1, L2, U1, U2 = spec.L1, spec.L2, spec.U1, spec.U2
    if spec.kind == "m":
        d1 = 0.5 * ((1 + th) * U1 - (1 - th) * U2)
        d2 = 0.5 * ((1 + th) * L2 - (1 - th) * L1) / eI
        sign1, sign2 = -1, 1
        C1, C2, C3 = L1, U2 * eI, U1 + L2 / eI
    elif spec.kind == "r":
        d1 = 0.5 * ((1 + th) * L1 + (1 - th) * L2) / eI
        d2 = 0.5 * ((1 + th) * L2 + (1 - th) * L1) / eI
        sign1, sign2 = 1, 1
        C1, C2, C3 = U1 * eI, U2 * eI, L2 / eI - U1 * eI
    else:
        d1 = 0.5 * ((1 + th) * U1 + (1 - th) * U2)
        d2 = 0.5 * ((1 + th) * U2 + (1 - th) * U1)
        sign1, sign2 = -1, -1
        C1, C2, C3 = L1, L2, U1 - L2
    tiny = ROUNDOFF * (L1 + L2 + U1 + U2)
    if d1 <= tiny or d2 <= tiny:
        raise CertificateFailure(
            f"region {spec.kind!r} does not bound the speeds away from zero "
            f"(d1={d1:.6g}, d2={d2:.6g})")
    if C3 <= tiny:
        raise CertificateFailure(f"region {spec.kind!r} touches vacuum (C3={C3:.6g})")
    lam_max = 0.0
    for s in (0.0, I):
        for z_c, w_c in region_corners(spec, s):
            lam1, lam2 = speeds_zw(z_c, w_c, law)
            lam_max = max(lam_max, abs(float(lam1)), abs(float(lam2)))
    return SpeedBounds(d1, d2, sign1, sign2, lam_max, C1, C2, C3)


# ---------------------------------------------------------------------------
# feasibility search
# ---------------------------------------------------------------------------

@dataclass
class FeasibilityResult:
    feasible: bool
    spec: Optional[RegionSpec]
    certificate: Optional[Certificate]
    best_min_slack: float
    best_point: dict
    searched_box: list
    kind: str
    I: float


def _normalized_min_slack(kind, law, consts, I, L1, L2, U1, U2,
                          strict_margin: float):
    out = None
    for ineq in _constant_inequalities(kind, law, consts, I):
        lhs = ineq.lhs(L1, L2, U1, U2)
        rhs = ineq.rhs(L1, L2, U1, U2)
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        slack = (rhs - lhs) / scale - (strict_margin if ineq.strict else 0.0)
        out = slack if out is None else np.minimum(out, slack)
    return out


def find_constants(law: GasLaw, I: float, kind: str,
                   profile: Optional[NozzleProfile] = None,
                   grid: int = 21, rounds: int = 4,
                   strict_margin: float = STRICT_MARGIN) -> FeasibilityResult:
    """Grid search over the scale-free ratio space, refined around the best
    point toward maximal minimum slack; the winner is re-certified."""
    if I < 0.0:
        raise DomainError("total majorant integral must be nonnegative")
    if kind not in ("m", "r", "l"):
        raise DomainError(f"region kind must be m, r or l, got {kind!r}")
    consts = critical_constants(law)
    g = law.gamma
    E = math.exp(2.0 * I)
    s1, s2 = consts.sigma1, consts.sigma2

    if kind == "m":
        lo1 = max((3.0 - g) / (g + 1.0), 1.0 / s1) * (1.0 + 1e-9)
        box = [(min(lo1, 1.0), 1.0),
               (1.0, max(min(s1, (g + 1.0) / (3.0 - g)) * (1.0 - 1e-9), 1.0)),
               (min(E, s1), s1)]

        def to_constants(u1, u2, u3):
            return u3, u1 * u3, np.ones_like(u3), u2
    elif kind == "r":
        box = [(1.0, 1.5 * s2), (1.0, 1.2 * s2), (0.25, 1.0)]

        def to_constants(u1, u2, u3):
            return u3, u1, np.ones_like(u3), u2
    else:
        box = [(0.05, 1.0), (0.05, 1.0), (min(E, s2 * E), s2 * E)]

        def to_constants(u1, u2, u3):
            return u3, u1, np.ones_like(u3), u2

    best_score = -math.inf
    best_u = [0.5 * (lo + hi) for lo, hi in box]
    current = [list(b) for b in box]
    for _ in range(rounds):
        axes = [np.linspace(lo, hi, grid) for lo, hi in current]
        mesh = np.meshgrid(*axes, indexing="ij")
        L1, L2, U1, U2 = to_constants(*mesh)
        score = _normalized_min_slack(kind, law, consts, I, L1, L2, U1, U2,
                                      strict_margin)
        idx = np.unravel_index(int(np.argmax(score)), score.shape)
        best_score = float(score[idx])
        best_u = [float(ax[i]) for ax, i in zip(axes, idx)]
        nxt = []
        for (lo, hi), (olo, ohi), u in zip(current, box, best_u):
            h = 1.5 * (hi - lo) / (grid - 1)
            nxt.append([max(olo, u - h), min(ohi, u + h)])
        current = nxt

    L1, L2, U1, U2 = to_constants(*[np.asarray(u) for u in best_u])
    point = {"L1": float(L1), "L2": float(L2), "U1": float(U1), "U2": float(U2)}
    if best_score <= 0.0:
        return FeasibilityResult(False, None, None, best_score, point, box, kind, I)
    spec = RegionSpec(kind, point["L1"], point["L2"], point["U1"], point["U2"],
                      profile=profile, I_total=None if profile is not None else I)
    cert = _check_hypothesis(kind, spec, law, consts, strict_margin=strict_margin)
    return FeasibilityResult(cert.passed, spec, cert, best_score, point, box, kind, I)
