"""Explicit upwind evolution of the diagonal system on a truncated half-line.

The domain is extended past the reporting window by the maximal region speed
times the final time, so the window is never polluted by the artificial right
boundary.  Both invariants are advected with their own local speed (donor
cell, optionally limited second order with two-stage time integration); the
geometric source is applied pointwise inside the same stages, keeping the
z/w source increments exact negatives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, DomainError, SonicBoundaryError
from .model import GasLaw, source_pair_zw, speeds_zw
from .region import NozzleProfile, RegionSpec, SpeedBounds, region_speed_bounds

#: Module-level hook so verification tests can plant source mutations.
source_pair = source_pair_zw


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on [0, x_max], reporting on [0, x_interest]."""

    dx: float
    n: int
    x_interest: float
    x_max: float

    def __post_init__(self):
        if self.dx <= 0.0 or self.n <= 0:
            raise DomainError("grid needs dx > 0 and n > 0")
        if abs(self.dx * self.n - self.x_max) > 1e-9 * max(1.0, self.x_max):
            raise DomainError("grid must satisfy dx * n = x_max")
        if self.x_interest > self.x_max:
            raise DomainError("reporting window cannot exceed the truncation point")

    def cells(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx


@dataclass
class Field:
    """Invariants at cell centers at one time."""

    z: np.ndarray
    w: np.ndarray
    t: float
    grid: Grid


@dataclass
class Scenario:
    """One configured run: problem type, physics, region, data and knobs."""

    problem: str
    law: GasLaw
    profile: NozzleProfile
    region: RegionSpec
    z0: Callable
    w0: Callable
    zB: Optional[Callable] = None
    wB: Optional[Callable] = None
    T: float = 1.0
    n: int = 400
    x_interest: float = 1.0
    cfl: float = 0.9
    order: int = 2
    snapshot_stride: int = 1
    delta1: float = 0.1
    delta2: float = 0.2
    fan: int = 20
    csv_stride: int = 50
    margin_tol_factor: float = 5.0
    strict_margin: float = 1e-9
    compat_tol: float = 1e-8
    wall_margin_frac: float = 0.02
    cert_samples: int = 2048
    blow_limit: float = 1e6
    config_text: Optional[str] = None
    _cache: dict = field(default_factory=dict, repr=False)

    _KIND_FOR = {"P1": "m", "P2": "r", "P3": "l"}

    def __post_init__(self):
        if self.problem not in self._KIND_FOR:
            raise DomainError(f"problem must be P1, P2 or P3, got {self.problem!r}")
        if self.region.kind != self._KIND_FOR[self.problem]:
            raise DomainError(
                f"problem {self.problem} needs a region of kind "
                f"{self._KIND_FOR[self.problem]!r}, got {self.region.kind!r}")
        if self.cfl <= 0.0:
            raise DomainError("cfl must be positive (stability needs cfl <= 1)")
        if self.order not in (1, 2):
            raise DomainError("scheme order must be 1 or 2")
        if self.T < 0.0:
            raise DomainError("final time must be nonnegative")
        if self.problem == "P2" and (self.zB is None or self.wB is None):
            raise DomainError("P2 needs boundary data zB(t), wB(t)")

    @property
    def speed_bounds(self) -> SpeedBounds:
        if "bounds" not in self._cache:
            self._cache["bounds"] = region_speed_bounds(self.region, self.law)
        return self._cache["bounds"]

    @property
    def grid(self) -> Grid:
        if "grid" not in self._cache:
            x_max = self.x_interest + self.speed_bounds.lambda_abs_max * self.T
            self._cache["grid"] = Grid(x_max / self.n, self.n, self.x_interest, x_max)
        return self._cache["grid"]

    def runtime_arrays(self) -> dict:
        """Grid-sampled profile data used by every step (built once)."""
        if "arrays" not in self._cache:
            grid = self.grid
            x = grid.cells()
            ghost_x = np.array([grid.x_max + 0.5 * grid.dx, grid.x_max + 1.5 * grid.dx])
            self._cache["arrays"] = {
                "x": x,
                "a": np.asarray(self.profile.a(x), dtype=float),
                "a_x": np.asarray(self.profile.a_prime(x), dtype=float),
                "s": np.asarray(self.profile.cum_abar(x), dtype=float),
                "gr_z": np.asarray(self.z0(ghost_x), dtype=float),
                "gr_w": np.asarray(self.w0(ghost_x), dtype=float),
                "window": x <= self.x_interest + 1e-12,
            }
        return self._cache["arrays"]

    def initial_field(self) -> Field:
        x = self.grid.cells()
        z = np.asarray(self.z0(x), dtype=float).copy()
        w = np.asarray(self.w0(x), dtype=float).copy()
        return Field(z, w, 0.0, self.grid)


@dataclass
class BoundaryValues:
    """Ghost cells (ordered outward-in: [-2, -1] left, [n, n+1] right) and
    the x = 0 edge trace."""

    gl_z: np.ndarray
    gl_w: np.ndarray
    gr_z: np.ndarray
    gr_w: np.ndarray
    z_edge: float
    w_edge: float


def boundary_update(fld: Field, t: float, scn: Scenario) -> BoundaryValues:
    """Problem-specific ghost/edge values at time t."""
    arrays = scn.runtime_arrays()
    z, w = fld.z, fld.w
    if scn.problem == "P1":
        z_edge = 1.5 * z[0] - 0.5 * z[1]
        w_edge = -z_edge
        lam1, lam2 = speeds_zw(z_edge, w_edge, scn.law)
        if not (lam1 < 0.0 < lam2):
            raise SonicBoundaryError(
                f"wall boundary needs lambda1 < 0 < lambda2, got "
                f"({float(lam1):.6g}, {float(lam2):.6g}) at t={t:.6g}")
        gl_z = np.array([-w[1], -w[0]])
        gl_w = np.array([-z[1], -z[0]])
    elif scn.problem == "P2":
        zb, wb = float(scn.zB(t)), float(scn.wB(t))
        z_edge, w_edge = zb, wb
        # Characteristic-shifted ghosts: the state at x < 0 is the boundary
        # value that will arrive at the wall a travel time later.  Constant
        # ghosts would plant an O(dx) inflow layer.
        lam1, lam2 = speeds_zw(zb, wb, scn.law)
        dx = fld.grid.dx
        gl_z = np.array([float(scn.zB(t + 1.5 * dx / float(lam1))),
                         float(scn.zB(t + 0.5 * dx / float(lam1)))])
        gl_w = np.array([float(scn.wB(t + 1.5 * dx / float(lam2))),
                         float(scn.wB(t + 0.5 * dx / float(lam2)))])
    else:
        z_edge = 1.5 * z[0] - 0.5 * z[1]
        w_edge = 1.5 * w[0] - 0.5 * w[1]
        # Quadratic continuation at the pure-outflow wall: lower-order ghosts
        # plant a boundary layer whose gradients do not converge.
        gl_z = np.array([6.0 * z[0] - 8.0 * z[1] + 3.0 * z[2],
                         3.0 * z[0] - 3.0 * z[1] + z[2]])
        gl_w = np.array([6.0 * w[0] - 8.0 * w[1] + 3.0 * w[2],
                         3.0 * w[0] - 3.0 * w[1] + w[2]])
    return BoundaryValues(gl_z, gl_w, arrays["gr_z"], arrays["gr_w"], z_edge, w_edge)


def cfl_dt(fld: Field, law: GasLaw, cfl: float, t_end: Optional[float] = None) -> float:
    """Largest stable step, clipped so the run does not overshoot t_end."""
    lam1, lam2 = speeds_zw(fld.z, fld.w, law)
    vmax = float(max(np.abs(lam1).max(), np.abs(lam2).max()))
    if vmax <= 1e-300:
        raise DomainError("all characteristic speeds vanish (uniform vacuum)")
    dt = cfl * fld.grid.dx / vmax
    if t_end is not None:
        dt = min(dt, t_end - fld.t)
    return dt


def _limited_slope(a, b):
    """van Leer harmonic slope: TVD, and smooth in the slope ratio (minmod's
    branch switching staircases smooth profiles, which wrecks the convergence
    of derivative diagnostics)."""
    prod = a * b
    denom = np.where(prod > 0.0, a + b, 1.0)
    return np.where(prod > 0.0, 2.0 * prod / denom, 0.0)


def _upwind_gradient(u_ext, lam_ext, dx: float, order: int):
    """Upwind-biased gradient at the n interior cells from the extended array
    (two ghosts each side); upwind side chosen by the face-mean speed."""
    n = u_ext.size - 4
    lam_face = 0.5 * (lam_ext[1:n + 2] + lam_ext[2:n + 3])
    if order == 1:
        u_face = np.where(lam_face >= 0.0, u_ext[1:n + 2], u_ext[2:n + 3])
    else:
        dm = u_ext[1:n + 3] - u_ext[0:n + 2]
        dp = u_ext[2:n + 4] - u_ext[1:n + 3]
        slope = _limited_slope(dm, dp)
        u_face = np.where(lam_face >= 0.0,
                          u_ext[1:n + 2] + 0.5 * slope[0:n + 1],
                          u_ext[2:n + 3] - 0.5 * slope[1:n + 2])
    return (u_face[1:] - u_face[:-1]) / dx


def _stage_rhs(z, w, t: float, scn: Scenario):
    arrays = scn.runtime_arrays()
    grid = scn.grid
    bv = boundary_update(Field(z, w, t, grid), t, scn)
    z_ext = np.concatenate([bv.gl_z, z, bv.gr_z])
    w_ext = np.concatenate([bv.gl_w, w, bv.gr_w])
    lam1e, lam2e = speeds_zw(z_ext, w_ext, scn.law)
    z_x = _upwind_gradient(z_ext, lam1e, grid.dx, scn.order)
    w_x = _upwind_gradient(w_ext, lam2e, grid.dx, scn.order)
    sz, sw = source_pair(z, w, arrays["a"], scn.law)
    fz = -lam1e[2:-2] * z_x + sz
    fw = -lam2e[2:-2] * w_x + sw
    return fz, fw


def step(fld: Field, dt: float, scn: Scenario) -> Field:
    """One explicit step (forward Euler or two-stage second order)."""
    z, w, t = fld.z, fld.w, fld.t
    f1z, f1w = _stage_rhs(z, w, t, scn)
    if scn.order == 1:
        zn = z + dt * f1z
        wn = w + dt * f1w
    else:
        z1 = z + dt * f1z
        w1 = w + dt * f1w
        f2z, f2w = _stage_rhs(z1, w1, t + dt, scn)
        zn = z + 0.5 * dt * (f1z + f2z)
        wn = w + 0.5 * dt * (f1w + f2w)
    bad = (~np.isfinite(zn) | ~np.isfinite(wn)
           | (np.abs(zn) > scn.blow_limit) | (np.abs(wn) > scn.blow_limit))
    if bad.any():
        cell = int(np.argmax(bad))
        raise BlowUpError(
            f"solution left the finite range at t={t + dt:.6g}, cell {cell} "
            f"(x={(cell + 0.5) * fld.grid.dx:.6g})", t=t + dt, cell=cell)
    return Field(zn, wn, t + dt, fld.grid)


class Trajectory:
    """Stored snapshots of one run plus interpolation helpers."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.grid = scenario.grid
        self.snapshot_stride = scenario.snapshot_stride
        self.blown_up = False
        self._times, self._dts = [], []
        self._z, self._w = [], []
        self._ez, self._ew = [], []
        self._arrays = None
        self._caches = {}

    def append(self, fld: Field, dt: float, bv: BoundaryValues):
        self._times.append(fld.t)
        self._dts.append(dt)
        self._z.append(fld.z.copy())
        self._w.append(fld.w.copy())
        self._ez.append(bv.z_edge)
        self._ew.append(bv.w_edge)
        self._arrays = None

    def finalize(self, blown_up: bool = False):
        self.blown_up = self.blown_up or blown_up
        return self

    def _materialize(self):
        if self._arrays is None:
            self._arrays = {
                "times": np.asarray(self._times, dtype=float),
                "dts": np.asarray(self._dts, dtype=float),
                "z": np.asarray(self._z, dtype=float),
                "w": np.asarray(self._w, dtype=float),
                "z_edge": np.asarray(self._ez, dtype=float),
                "w_edge": np.asarray(self._ew, dtype=float),
            }
        return self._arrays

    @property
    def times(self) -> np.ndarray:
        return self._materialize()["times"]

    @property
    def dts(self) -> np.ndarray:
        return self._materialize()["dts"]

    @property
    def z(self) -> np.ndarray:
        return self._materialize()["z"]

    @property
    def w(self) -> np.ndarray:
        return self._materialize()["w"]

    @property
    def z_edge(self) -> np.ndarray:
        return self._materialize()["z_edge"]

    @property
    def w_edge(self) -> np.ndarray:
        return self._materialize()["w_edge"]

    def _stack(self, name: str) -> np.ndarray:
        if name not in self._caches:
            z, w = self.z, self.w
            if name in ("lam1", "lam2"):
                lam1, lam2 = speeds_zw(z, w, self.scenario.law)
                self._caches["lam1"], self._caches["lam2"] = lam1, lam2
            elif name == "zx":
                self._caches["zx"] = np.gradient(z, self.grid.dx, axis=1)
            elif name == "wx":
                self._caches["wx"] = np.gradient(w, self.grid.dx, axis=1)
        return self._caches[name]

    def _locate(self, x: float, t: float):
        times = self.times
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1))
        k2 = min(k + 1, len(times) - 1)
        tau = 0.0 if k2 == k else float(np.clip((t - times[k]) / (times[k2] - times[k]), 0.0, 1.0))
        xi = x / self.grid.dx - 0.5
        i = int(np.clip(np.floor(xi), 0, self.grid.n - 2))
        frac = float(np.clip(xi - i, 0.0, 1.0))
        return k, k2, tau, i, frac

    def sample(self, x: float, t: float) -> dict:
        """Bilinear space-time interpolation of the stored fields."""
        k, k2, tau, i, frac = self._locate(x, t)

        def bil(stack):
            lo = (1.0 - frac) * stack[k, i] + frac * stack[k, i + 1]
            hi = (1.0 - frac) * stack[k2, i] + frac * stack[k2, i + 1]
            return float((1.0 - tau) * lo + tau * hi)

        return {
            "z": bil(self.z), "w": bil(self.w),
            "zx": bil(self._stack("zx")), "wx": bil(self._stack("wx")),
            "lam1": bil(self._stack("lam1")), "lam2": bil(self._stack("lam2")),
        }

    def lam_at(self, x: float, t: float, family: int) -> float:
        k, k2, tau, i, frac = self._locate(x, t)
        stack = self._stack("lam1" if family == 1 else "lam2")
        lo = (1.0 - frac) * stack[k, i] + frac * stack[k, i + 1]
        hi = (1.0 - frac) * stack[k2, i] + frac * stack[k2, i + 1]
        return float((1.0 - tau) * lo + tau * hi)

    def save(self, path):
        if self.scenario.config_text is None:
            raise DomainError("trajectory saving needs the originating config text")
        meta = {
            "config_text": self.scenario.config_text,
            "blown_up": self.blown_up,
            "snapshot_stride": self.snapshot_stride,
        }
        arr = self._materialize()
        np.savez_compressed(path, meta=np.array(json.dumps(meta)), **arr)


def run(scn: Scenario, monitors=None):
    """Integrate to T, observing monitors every step; snapshots at the
    configured stride (plus the final state).  Returns (trajectory, field).
    A numerical blow-up aborts with the partial trajectory attached."""
    fld = scn.initial_field()
    traj = Trajectory(scn)
    bv = boundary_update(fld, 0.0, scn)
    traj.append(fld, 0.0, bv)
    if monitors is not None:
        monitors.observe(fld, bv, None, 0.0)
    T = scn.T
    step_idx = 0
    try:
        while fld.t < T - 1e-14 * max(T, 1.0):
            dt = cfl_dt(fld, scn.law, scn.cfl, t_end=T)
            if dt <= 0.0:
                break
            new = step(fld, dt, scn)
            step_idx += 1
            bv = boundary_update(new, new.t, scn)
            if monitors is not None:
                monitors.observe(new, bv, fld, dt)
            at_end = new.t >= T - 1e-14 * max(T, 1.0)
            if step_idx % scn.snapshot_stride == 0 or at_end:
                traj.append(new, dt, bv)
            fld = new
    except BlowUpError as err:
        traj.finalize(blown_up=True)
        err.trajectory = traj
        raise
    traj.finalize()
    return traj, fld
