"""Characteristic curves through stored runs and the checks along them.

Paths are traced forward with RK4 through bilinear space-time interpolation
of the stored speeds, then carry the gradient functional of their family, its
Riccati coefficients, the decaying barrier and the running a-priori upper
bound.  Tracing stops where the stored solution stops being trustworthy: the
physical boundary or the influence cone of the artificial right boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidStateError, ResolutionError
from .riccati import apriori_upper_bound, coeffs_zw, phi_psi_zw
from .solver import Trajectory

#: Paths stop this many cells short of the wall: the innermost stretch both
#: clamps interpolation and concentrates the profile's steepest variation.
WALL_BAND_CELLS = 1.5


@dataclass
class CharPath:
    """Samples along one characteristic: states, functional and coefficients.

    ``value`` is Phi for family 1 and Psi for family 2; ``other`` is the
    opposite functional at the same points (used for the alternative reading
    of the second transport equation).  A, B, C are the family's own
    coefficient set.
    """

    family: int
    x0: float
    t0: float
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    lam: np.ndarray
    zx: np.ndarray
    wx: np.ndarray
    a: np.ndarray
    ax: np.ndarray
    value: np.ndarray
    other: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    exit_reason: str

    @property
    def n(self) -> int:
        return self.t.size


def trace(history: Trajectory, x0: float, family: int, t0: float = 0.0) -> CharPath:
    """RK4 path of dx/dt = lambda_family launched from (x0, t0)."""
    if family not in (1, 2):
        raise DomainError("family must be 1 or 2")
    if history.snapshot_stride > 10:
        raise ResolutionError(
            f"snapshot stride {history.snapshot_stride} too coarse for tracing "
            "(need stride <= 10)")
    times = history.times
    scn = history.scenario
    x_max = history.grid.x_max
    lam_abs = scn.speed_bounds.lambda_abs_max
    if not 0.0 <= x0 <= x_max:
        raise DomainError(f"launch point {x0} outside [0, {x_max}]")
    # Launch no closer to the wall than the first cell center, the innermost
    # point the stored fields can interpolate without clamping.
    x0 = max(x0, 0.5 * history.grid.dx)
    k0 = int(np.searchsorted(times, t0 - 1e-14, side="left"))
    k0 = min(k0, len(times) - 1)

    def lam(xq: float, tq: float) -> float:
        return history.lam_at(min(max(xq, 0.0), x_max), tq, family)

    # Samples are recorded only inside the trusted domain: past a wall margin
    # (fixed physical fraction of the window plus a cell-scaled floor, since
    # the innermost strip is outside the scheme's asymptotic range) and inside
    # the influence cone of the artificial right boundary.  Leftward paths
    # terminate at the margin; rightward launches start recording beyond it.
    wall_band = max(WALL_BAND_CELLS * history.grid.dx,
                    scn.wall_margin_frac * scn.x_interest)
    ts, xs = [], []
    reason = "end"
    x = x0
    if x0 >= wall_band:
        ts.append(times[k0])
        xs.append(x0)
    for k in range(k0, len(times) - 1):
        t_k, t_k1 = times[k], times[k + 1]
        h = t_k1 - t_k
        v1 = lam(x, t_k)
        v2 = lam(x + 0.5 * h * v1, t_k + 0.5 * h)
        v3 = lam(x + 0.5 * h * v2, t_k + 0.5 * h)
        v4 = lam(x + h * v3, t_k1)
        x_new = x + h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        if x_new < wall_band and v1 < 0.0:
            reason = "left"
            break
        if x_new > x_max - lam_abs * t_k1:
            reason = "cone"
            break
        if x_new >= wall_band:
            ts.append(t_k1)
            xs.append(x_new)
        x = x_new
    if not ts:
        ts, xs = [times[k0]], [min(max(x0, wall_band), x_max)]

    t_arr = np.asarray(ts)
    x_arr = np.asarray(xs)
    cols = {"z": [], "w": [], "zx": [], "wx": [], "lam1": [], "lam2": []}
    for tq, xq in zip(t_arr, x_arr):
        s = history.sample(xq, tq)
        for key in cols:
            cols[key].append(s[key])
    z = np.asarray(cols["z"])
    w = np.asarray(cols["w"])
    zx = np.asarray(cols["zx"])
    wx = np.asarray(cols["wx"])
    lam_arr = np.asarray(cols["lam1"] if family == 1 else cols["lam2"])
    a = np.asarray(scn.profile.a(x_arr), dtype=float)
    ax = np.asarray(scn.profile.a_prime(x_arr), dtype=float)
    phi, psi = phi_psi_zw(z, w, zx, wx, a, scn.law)
    A, B, C, Ah, Bh, Ch = coeffs_zw(z, w, a, ax, scn.law)
    if family == 1:
        value, other = phi, psi
    else:
        value, other = psi, phi
        A, B, C = Ah, Bh, Ch
    return CharPath(family, x0, t0, t_arr, x_arr, z, w, lam_arr, zx, wx, a, ax,
                    np.asarray(value), np.asarray(other),
                    np.asarray(A), np.asarray(B), np.asarray(C), reason)


def launch_fan(history: Trajectory, family: int, count: Optional[int] = None):
    """Equispaced launch points across the trusted part of the reporting
    window at t = 0 (the wall margin is excluded; see trace).  Launches that
    exit before collecting three samples are nudged away from the wall so the
    whole fan stays usable."""
    scn = history.scenario
    count = scn.fan if count is None else count
    lo = max(WALL_BAND_CELLS * history.grid.dx,
             scn.wall_margin_frac * scn.x_interest)
    spacing = (scn.x_interest - lo) / count
    paths = []
    for k in range(count):
        x0 = lo + (k + 0.5) * spacing
        path = trace(history, float(x0), family)
        for _ in range(4):
            if path.n >= 3 or x0 + 0.5 * spacing > scn.x_interest:
                break
            x0 += 0.5 * spacing
            path = trace(history, float(x0), family)
        paths.append(path)
    return paths


def boundary_fan(history: Trajectory, family: int, count: Optional[int] = None):
    """Launches from the inflow boundary (x = 0) at equispaced times."""
    scn = history.scenario
    count = scn.fan if count is None else count
    t0s = (np.arange(count) + 0.5) / count * scn.T
    return [trace(history, 0.0, family, t0=float(t0)) for t0 in t0s]


@dataclass
class ResidualReport:
    """Residual of the transport identity dV/dt = A V^2 + B V + C along a path.

    ``series_alt`` (family 2 only) re-evaluates the middle term with the
    opposite functional so the printed alternative reading stays observable.
    """

    family: int
    t_mid: np.ndarray
    series: np.ndarray
    max_norm: float
    series_alt: Optional[np.ndarray] = None
    max_norm_alt: Optional[float] = None


def riccati_residual(path: CharPath) -> ResidualReport:
    if path.n < 3:
        raise DomainError("residual evaluation needs at least 3 samples")
    v, t = path.value, path.t
    dv = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
    rhs = (path.A * v * v + path.B * v + path.C)[1:-1]
    series = dv - rhs
    report = ResidualReport(path.family, t[1:-1], series,
                            float(np.abs(series).max()))
    if path.family == 2:
        rhs_alt = (path.A * v * v + path.B * path.other + path.C)[1:-1]
        report.series_alt = dv - rhs_alt
        report.max_norm_alt = float(np.abs(report.series_alt).max())
    return report


@dataclass
class BoundReport:
    """Margins of the three derivative bounds along one path.

    lower: value above the decaying barrier; upper: value below the running
    a-priori bound; sub: the barrier satisfies its differential inequality
    (margin is minus the inequality's left side).  All margins must be
    nonnegative up to the scheme-error tolerance.
    """

    sigma: int
    t: np.ndarray
    x: np.ndarray
    lower_margin: np.ndarray
    upper_margin: np.ndarray
    sub_margin: np.ndarray

    @property
    def min_lower(self) -> float:
        return float(self.lower_margin.min())

    @property
    def min_upper(self) -> float:
        return float(self.upper_margin.min())

    @property
    def min_sub(self) -> float:
        return float(self.sub_margin.min())

    def where_min(self, which: str):
        arr = getattr(self, f"{which}_margin")
        i = int(np.argmin(arr))
        return float(self.t[i]), float(self.x[i])

    def holds(self, tol: float = 0.0) -> dict:
        return {
            "lower": self.min_lower >= -tol,
            "upper": self.min_upper >= -tol,
            "subsolution": self.min_sub >= -tol,
        }


def functional_samples(path: CharPath, delta1: float, M: float, alpha: float):
    """Per-sample band records (value, barrier, running upper bound)."""
    from .riccati import FunctionalSample

    br = bound_check(path, delta1, M, alpha)
    upper = path.value + br.upper_margin
    floor = path.value - br.lower_margin
    out = []
    for i in range(path.n):
        phi = path.value[i] if path.family == 1 else path.other[i]
        psi = path.other[i] if path.family == 1 else path.value[i]
        out.append(FunctionalSample(float(path.x[i]), float(path.t[i]),
                                    float(phi), float(psi), float(floor[i]),
                                    float(upper[i])))
    return out


def bound_check(path: CharPath, delta1: float, M: float, alpha: float) -> BoundReport:
    """Margin series of the barrier bound, the a-priori upper bound, and the
    pointwise barrier differential inequality along the path."""
    if delta1 <= 0.0 or M <= 0.0 or alpha <= 0.0:
        raise DomainError("delta1, M and alpha must all be positive")
    moving = np.abs(path.lam) > 1e-12
    signs = np.sign(path.lam[moving])
    if signs.size == 0:
        raise InvalidStateError("path does not move; no barrier direction")
    if not (np.all(signs > 0) or np.all(signs < 0)):
        raise InvalidStateError("path changes direction; barrier sign undefined")
    sigma = 1 if signs[0] > 0 else -1
    decay = (1.0 + M * path.x) ** (-1.0 - alpha)
    floor = sigma * delta1 * decay
    lower_margin = path.value - floor
    ub = apriori_upper_bound(path.t, path.A, path.B, path.C, float(path.value[0]))
    upper_margin = ub - path.value
    dfloor = -sigma * (1.0 + alpha) * M * delta1 * path.lam \
        * (1.0 + M * path.x) ** (-2.0 - alpha)
    sub_lhs = dfloor - (path.A * floor * floor + path.B * floor + path.C)
    return BoundReport(sigma, path.t, path.x, lower_margin, upper_margin, -sub_lhs)
