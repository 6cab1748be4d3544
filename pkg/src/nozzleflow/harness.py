"""Pre-run certification, runtime monitors, independent cross-checks and
artifact emission for scenario runs.

Exit codes: 0 clean, 2 certification failed, 3 a runtime monitor or bound
check failed, 4 numerical blow-up; the CLI adds 64 (usage), 65 (bad config)
and 66 (cannot open input).
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import characteristics as chars
from .config import ScenarioConfig, load_config, parse_config_text
from .errors import (BlowUpError, DomainError, InvalidStateError,
                     VacuumStateError)
from .model import rho_zw, speeds_zw
from .region import (Certificate, CertItem, check_h1, check_hypothesis,
                     critical_constants, membership_margins)
from .riccati import (apriori_upper_bound, check_compatibility,
                      check_data_conditions, phi_psi_zw)
from .solver import Scenario, Trajectory, boundary_update, run

EXIT_OK = 0
EXIT_CERT = 2
EXIT_MONITOR = 3
EXIT_BLOWUP = 4
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66

_FACES = ("z_lo", "z_hi", "w_lo", "w_hi", "gap")


# ---------------------------------------------------------------------------
# certification pipeline
# ---------------------------------------------------------------------------

@dataclass
class CertBundle:
    certificates: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    @property
    def conditional(self) -> bool:
        return any(c.conditional for c in self.certificates)

    def render_text(self) -> str:
        parts = [c.render_text() for c in self.certificates]
        verdict = "PASS" if self.passed else "FAIL"
        parts.append(f"bundle: {verdict}" + (" (conditional)" if self.conditional else ""))
        return "\n\n".join(parts)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "conditional": self.conditional,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def _membership_certificate(name, z, w, s, spec, where, where_label):
    margins = membership_margins(z, w, s, spec)
    items = []
    for face in _FACES:
        arr = np.asarray(margins[face])
        i = int(np.argmin(arr))
        items.append(CertItem(f"margin {face} >= 0", 0.0, float(arr[i]),
                              float(arr[i]), strict=False,
                              passed=bool(arr[i] >= 0.0),
                              where=float(where[i]), note=f"worst {where_label}"))
    return Certificate(name, items)


def certify(scn: Scenario) -> CertBundle:
    """Decay certificate, admissibility certificate, initial (and boundary)
    membership, data conditions and compatibility for one scenario."""
    grid = scn.grid
    x = np.unique(np.concatenate([
        grid.cells(), np.linspace(0.0, grid.x_max, scn.cert_samples)]))
    consts = critical_constants(scn.law)
    certs = [check_h1(scn.profile, x),
             check_hypothesis(scn.region, scn.law, consts, x, scn.strict_margin)]

    z0 = np.asarray(scn.z0(x), dtype=float)
    w0 = np.asarray(scn.w0(x), dtype=float)
    s = scn.profile.cum_abar(x)
    certs.append(_membership_certificate("initial-membership", z0, w0, s,
                                         scn.region, x, "x"))

    boundary = None
    if scn.problem == "P2":
        t = np.linspace(0.0, scn.T, scn.cert_samples)
        zB = np.asarray(scn.zB(t), dtype=float)
        wB = np.asarray(scn.wB(t), dtype=float)
        certs.append(_membership_certificate("boundary-membership", zB, wB,
                                             np.zeros_like(t), scn.region, t, "t"))
        boundary = (t, zB, wB, float(scn.profile.a(0.0)))

    certs.append(check_data_conditions(
        scn.problem, x, z0, w0, np.asarray(scn.profile.a(x), dtype=float),
        scn.delta1, scn.delta2, scn.profile.M, scn.profile.alpha, scn.law,
        boundary=boundary))
    certs.append(check_compatibility(
        scn.problem, scn.z0, scn.w0, scn.zB, scn.wB,
        float(scn.profile.a(0.0)), scn.law, tol=scn.compat_tol))
    return CertBundle(certs)


# ---------------------------------------------------------------------------
# runtime monitors
# ---------------------------------------------------------------------------

@dataclass
class MonitorReport:
    times: np.ndarray
    min_margins: dict
    min_gap: np.ndarray
    max_abs_zx: np.ndarray
    max_abs_wx: np.ndarray
    max_abs_zt: np.ndarray
    max_abs_wt: np.ndarray
    phi_min: np.ndarray
    phi_max: np.ndarray
    psi_min: np.ndarray
    psi_max: np.ndarray
    edge_defect: np.ndarray
    lip_estimate: float
    margin_tol: float
    C3: float
    containment_ok_raw: bool
    containment_ok: bool
    vacuum_ok: bool
    finite_ok: bool
    edge_ok: bool
    first_violation: dict | None

    @property
    def ok(self) -> bool:
        return self.containment_ok and self.vacuum_ok and self.finite_ok and self.edge_ok

    def to_dict(self) -> dict:
        def arr(a):
            return np.asarray(a).tolist()

        return {
            "steps": int(len(self.times) - 1),
            "lip_estimate": self.lip_estimate,
            "margin_tol": self.margin_tol,
            "C3": self.C3,
            "min_margin_per_face": {k: float(np.min(v)) for k, v in self.min_margins.items()},
            "min_gap": float(np.min(self.min_gap)),
            "max_abs_zx": float(np.max(self.max_abs_zx)),
            "max_abs_wx": float(np.max(self.max_abs_wx)),
            "max_abs_zt": float(np.max(self.max_abs_zt)) if len(self.max_abs_zt) else 0.0,
            "max_abs_wt": float(np.max(self.max_abs_wt)) if len(self.max_abs_wt) else 0.0,
            "phi_range": [float(np.min(self.phi_min)), float(np.max(self.phi_max))],
            "psi_range": [float(np.min(self.psi_min)), float(np.max(self.psi_max))],
            "edge_defect_max": float(np.max(self.edge_defect)) if len(self.edge_defect) else 0.0,
            "flags": {
                "containment_raw": self.containment_ok_raw,
                "containment": self.containment_ok,
                "vacuum": self.vacuum_ok,
                "finite": self.finite_ok,
                "edge": self.edge_ok,
                "ok": self.ok,
            },
            "first_violation": self.first_violation,
            "series": {
                "times": arr(self.times),
                **{f"min_margin_{k}": arr(v) for k, v in self.min_margins.items()},
                "min_gap": arr(self.min_gap),
            },
        }


class Monitors:
    """Per-step observers: containment margins over the reporting window,
    vacuum gap, derivative extremes, functional extremes, edge defect."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        arrays = scn.runtime_arrays()
        self.window = arrays["window"]
        self.s_win = arrays["s"][self.window]
        self.a_win = arrays["a"][self.window]
        self.x_win = arrays["x"][self.window]
        self.dx = scn.grid.dx
        self.series = {key: [] for key in
                       ("t", "gap", "zx", "wx", "zt", "wt", "phi_min", "phi_max",
                        "psi_min", "psi_max", "edge")}
        self.margin_series = {face: [] for face in _FACES}
        self.margin_argmin = {face: [] for face in _FACES}
        self.finite_ok = True

    def observe(self, fld, bv, prev, dt):
        z = fld.z[self.window]
        w = fld.w[self.window]
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
            self.finite_ok = False
        margins = membership_margins(z, w, self.s_win, self.scn.region)
        for face in _FACES:
            arr = margins[face]
            i = int(np.argmin(arr))
            self.margin_series[face].append(float(arr[i]))
            self.margin_argmin[face].append(i)
        self.series["t"].append(fld.t)
        self.series["gap"].append(float((w - z).min()))
        zx = np.gradient(fld.z, self.dx)[self.window]
        wx = np.gradient(fld.w, self.dx)[self.window]
        self.series["zx"].append(float(np.abs(zx).max()))
        self.series["wx"].append(float(np.abs(wx).max()))
        if prev is not None and dt > 0.0:
            self.series["zt"].append(float(np.abs((fld.z - prev.z)[self.window]).max() / dt))
            self.series["wt"].append(float(np.abs((fld.w - prev.w)[self.window]).max() / dt))
        phi, psi = phi_psi_zw(z, w, zx, wx, self.a_win, self.scn.law)
        self.series["phi_min"].append(float(phi.min()))
        self.series["phi_max"].append(float(phi.max()))
        self.series["psi_min"].append(float(psi.min()))
        self.series["psi_max"].append(float(psi.max()))
        self.series["edge"].append(abs(bv.z_edge + bv.w_edge)
                                   if self.scn.problem == "P1" else 0.0)

    def finalize(self) -> MonitorReport:
        times = np.asarray(self.series["t"])
        min_margins = {face: np.asarray(vals) for face, vals in self.margin_series.items()}
        # Causal tolerance: each step is judged with the Lipschitz estimate
        # accumulated so far, so bad data cannot launder its own violation by
        # inflating the later estimate.
        lip_series = np.maximum.accumulate(
            np.maximum(np.asarray(self.series["zx"]), np.asarray(self.series["wx"])))
        lip = float(lip_series[-1]) if lip_series.size else 0.0
        tol_series = self.scn.margin_tol_factor * self.dx * lip_series
        tol = self.scn.margin_tol_factor * self.dx * lip
        C3 = self.scn.speed_bounds.C3
        worst_face, worst_val, first = None, math.inf, None
        for face in _FACES:
            vals = min_margins[face]
            bad = np.nonzero(vals < -tol_series)[0]
            if bad.size and (first is None or bad[0] < first["step"]):
                k = int(bad[0])
                first = {"step": k, "t": float(times[k]), "face": face,
                         "cell": int(self.margin_argmin[face][k]),
                         "margin": float(vals[k]),
                         "inequality": f"margin {face} >= -tol"}
            if vals.min() < worst_val:
                worst_val, worst_face = float(vals.min()), face
        containment_raw = worst_val >= 0.0
        containment = first is None
        min_gap = np.asarray(self.series["gap"])
        vacuum_ok = bool(min_gap.min() >= C3 - tol)
        edge = np.asarray(self.series["edge"])
        edge_ok = bool(edge.max(initial=0.0) <= 1e-12)
        return MonitorReport(
            times=times, min_margins=min_margins, min_gap=min_gap,
            max_abs_zx=np.asarray(self.series["zx"]),
            max_abs_wx=np.asarray(self.series["wx"]),
            max_abs_zt=np.asarray(self.series["zt"]),
            max_abs_wt=np.asarray(self.series["wt"]),
            phi_min=np.asarray(self.series["phi_min"]),
            phi_max=np.asarray(self.series["phi_max"]),
            psi_min=np.asarray(self.series["psi_min"]),
            psi_max=np.asarray(self.series["psi_max"]),
            edge_defect=edge, lip_estimate=lip, margin_tol=tol, C3=C3,
            containment_ok_raw=containment_raw, containment_ok=containment,
            vacuum_ok=vacuum_ok, finite_ok=self.finite_ok, edge_ok=edge_ok,
            first_violation=first)


# ---------------------------------------------------------------------------
# independent conservative-form residual
# ---------------------------------------------------------------------------

@dataclass
class ConservativeResidual:
    times: np.ndarray
    linf_rho: np.ndarray
    l1_rho: np.ndarray
    linf_mom: np.ndarray
    l1_mom: np.ndarray

    @property
    def max_linf(self) -> float:
        vals = [a.max() for a in (self.linf_rho, self.linf_mom) if a.size]
        return float(max(vals)) if vals else 0.0

    def to_dict(self) -> dict:
        return {
            "max_linf": self.max_linf,
            "max_linf_rho": float(self.linf_rho.max()) if self.linf_rho.size else 0.0,
            "max_linf_mom": float(self.linf_mom.max()) if self.linf_mom.size else 0.0,
            "mean_l1_rho": float(self.l1_rho.mean()) if self.l1_rho.size else 0.0,
            "mean_l1_mom": float(self.l1_mom.mean()) if self.l1_mom.size else 0.0,
        }


def conservative_residual(traj: Trajectory) -> ConservativeResidual:
    """Centered finite-difference residuals of the conservative system formed
    from the stored diagonal fields: an independent check that the evolved
    fields solve the original balance laws."""
    if traj.snapshot_stride != 1:
        raise DomainError("conservative residual needs stride-1 snapshots")
    scn = traj.scenario
    law = scn.law
    arrays = scn.runtime_arrays()
    z, w, times = traj.z, traj.w, traj.times
    if len(times) < 3:
        return ConservativeResidual(times, *(np.zeros(0),) * 4)
    rho = rho_zw(z, w, law)
    v = 0.5 * (w + z)
    m = rho * v
    flux = m * v + rho ** law.gamma / law.gamma
    a = arrays["a"]
    dx = traj.grid.dx
    res_rho = np.gradient(rho, times, axis=0) + np.gradient(m, dx, axis=1) + a * m
    res_mom = np.gradient(m, times, axis=0) + np.gradient(flux, dx, axis=1) + a * m * v
    window = arrays["window"].copy()
    window[0] = False  # one-sided x-differences at the wall are not centered
    inner = (slice(1, -1), window)
    rr, rm = res_rho[inner], res_mom[inner]
    return ConservativeResidual(
        times[1:-1],
        np.abs(rr).max(axis=1), np.abs(rr).mean(axis=1) * dx * window.sum(),
        np.abs(rm).max(axis=1), np.abs(rm).mean(axis=1) * dx * window.sum())


# ---------------------------------------------------------------------------
# characteristic post-pass
# ---------------------------------------------------------------------------

def characteristic_pass(traj: Trajectory, delta1=None, M=None, alpha=None) -> dict:
    """Trace the launch fans of both families, evaluate the transport-identity
    residuals and the three derivative-bound margins, and compare the measured
    derivative extremes against the bound the functionals imply."""
    scn = traj.scenario
    delta1 = scn.delta1 if delta1 is None else delta1
    M = scn.profile.M if M is None else M
    alpha = scn.profile.alpha if alpha is None else alpha
    lip = max(float(np.abs(traj._stack("zx")).max()),
              float(np.abs(traj._stack("wx")).max()))
    tol_base = scn.margin_tol_factor * traj.grid.dx * lip
    result = {"tolerance": tol_base, "lip": lip, "families": {}, "paths": []}
    all_ok = True
    for family in (1, 2):
        paths = chars.launch_fan(traj, family)
        if scn.problem == "P2":
            paths += chars.boundary_fan(traj, family)
        max_res, max_alt = 0.0, None
        minima = {"lower": math.inf, "upper": math.inf, "subsolution": math.inf}
        speed_margin = math.inf
        fam_ok = True
        bounds = scn.speed_bounds
        d = bounds.d1 if family == 1 else bounds.d2
        sign = bounds.sign1 if family == 1 else bounds.sign2
        for path in paths:
            if path.n < 3:
                continue
            try:
                rr = chars.riccati_residual(path)
                br = chars.bound_check(path, delta1, M, alpha)
            except (InvalidStateError, VacuumStateError) as exc:
                fam_ok = False
                result["paths"].append({
                    "family": family, "x0": path.x0, "t0": path.t0,
                    "samples": path.n, "exit": path.exit_reason,
                    "error": str(exc), "ok": False})
                continue
            max_res = max(max_res, rr.max_norm)
            if rr.max_norm_alt is not None:
                max_alt = max(max_alt or 0.0, rr.max_norm_alt)
            minima["lower"] = min(minima["lower"], br.min_lower)
            minima["upper"] = min(minima["upper"], br.min_upper)
            minima["subsolution"] = min(minima["subsolution"], br.min_sub)
            speed_margin = min(speed_margin,
                               float((sign * path.lam - d).min()))
            # The integral bound accumulates the same discretization drift the
            # transport residual measures, so the per-path error estimate adds
            # the residual's time integral to the field-level estimate.
            drift = float(np.trapezoid(np.abs(rr.series), rr.t_mid))
            path_tol = tol_base + scn.margin_tol_factor * drift
            path_ok = min(br.min_lower, br.min_upper, br.min_sub) >= -path_tol
            fam_ok = fam_ok and path_ok
            result["paths"].append({
                "family": family, "x0": path.x0, "t0": path.t0,
                "samples": path.n, "exit": path.exit_reason,
                "residual_max": rr.max_norm, "tolerance": path_tol,
                "min_lower": br.min_lower, "min_upper": br.min_upper,
                "min_sub": br.min_sub, "ok": path_ok,
            })
        all_ok = all_ok and fam_ok
        result["families"][str(family)] = {
            "paths": len(paths), "residual_max": max_res,
            "residual_max_alt_reading": max_alt,
            "min_margins": {k: (None if math.isinf(v) else v) for k, v in minima.items()},
            "speed_margin": None if math.isinf(speed_margin) else speed_margin,
            "bounds_ok": fam_ok,
        }
    implied = derivative_bound_estimate(traj, delta1, M, alpha)
    result["derivative_bounds"] = implied
    all_ok = all_ok and implied["ok"]
    result["ok"] = all_ok
    return result


def derivative_bound_estimate(traj: Trajectory, delta1: float, M: float,
                              alpha: float) -> dict:
    """Bound max |z_x|, |w_x| implied by the barrier and the running upper
    bound, compared against the measured extremes."""
    scn = traj.scenario
    law = scn.law
    arrays = scn.runtime_arrays()
    window = arrays["window"]
    z = traj.z[:, window]
    w = traj.w[:, window]
    gap = w - z
    a_abs = float(np.abs(arrays["a"][window]).max(initial=0.0))
    z_abs = float(np.abs(z).max())
    w_abs = float(np.abs(w).max())
    gap_min, gap_max = float(gap.min()), float(gap.max())

    # Launch values anywhere are certified within [-delta1, delta2]; the
    # transport identity can then grow them by at most the integral of
    # C - B^2/(4A) along the path.
    growth = 0.0
    for family in (1, 2):
        for path in chars.launch_fan(traj, family, count=max(4, scn.fan // 2)):
            if path.n < 2:
                continue
            ub = apriori_upper_bound(path.t, path.A, path.B, path.C, 0.0)
            growth = max(growth, float(np.abs(ub).max()))
    value_bound = max(delta1, scn.delta2) + growth
    if law.is_log_branch:
        log_max = max(abs(math.log(gap_min)), abs(math.log(gap_max)))
        zx_bound = gap_max * value_bound + 0.5 * a_abs * z_abs + 0.5 * a_abs * gap_max * log_max
        wx_bound = gap_max * value_bound + 0.5 * a_abs * w_abs + 0.5 * a_abs * gap_max * log_max
        scale = gap_max
    else:
        b = law.beta
        pow_max = max(gap_min ** (-b), gap_max ** (-b))
        zx_bound = (pow_max * value_bound + a_abs * z_abs / (2.0 * abs(b))
                    + a_abs * gap_max / (2.0 * abs(b + 1.0)))
        wx_bound = (pow_max * value_bound + a_abs * w_abs / (2.0 * abs(b))
                    + a_abs * gap_max / (2.0 * abs(b + 1.0)))
        scale = pow_max
    zx_meas = float(np.abs(traj._stack("zx")[:, window]).max())
    wx_meas = float(np.abs(traj._stack("wx")[:, window]).max())
    lip = max(zx_meas, wx_meas)
    tol = scn.margin_tol_factor * traj.grid.dx * lip * max(1.0, scale)
    ok = zx_meas <= zx_bound + tol and wx_meas <= wx_bound + tol
    return {"zx_measured": zx_meas, "zx_implied": zx_bound,
            "wx_measured": wx_meas, "wx_implied": wx_bound,
            "functional_bound": value_bound, "tolerance": tol, "ok": ok}


# ---------------------------------------------------------------------------
# CSV / artifact emission
# ---------------------------------------------------------------------------

_CSV_HEADER = ("t,x,rho,v,z,w,z_x,w_x,Phi,Psi,margin_z_lo,margin_z_hi,"
               "margin_w_lo,margin_w_hi,gap,lambda1,lambda2")


def write_fields_csv(traj: Trajectory, path, stride: int | None = None) -> None:
    scn = traj.scenario
    stride = scn.csv_stride if stride is None else stride
    arrays = scn.runtime_arrays()
    window = arrays["window"]
    x = arrays["x"][window]
    a = arrays["a"][window]
    s = arrays["s"][window]
    law = scn.law
    dx = traj.grid.dx
    rows = range(0, len(traj.times), max(1, stride))
    fmt = "%.17g"
    with open(path, "w", newline="\n") as fh:
        fh.write(_CSV_HEADER + "\n")
        for k in rows:
            z_full, w_full = traj.z[k], traj.w[k]
            z, w = z_full[window], w_full[window]
            zx = np.gradient(z_full, dx)[window]
            wx = np.gradient(w_full, dx)[window]
            rho = rho_zw(z, w, law)
            v = 0.5 * (w + z)
            phi, psi = phi_psi_zw(z, w, zx, wx, a, law)
            margins = membership_margins(z, w, s, scn.region)
            lam1, lam2 = speeds_zw(z, w, law)
            t = traj.times[k]
            cols = [np.full_like(z, t), x, rho, v, z, w, zx, wx, phi, psi,
                    margins["z_lo"], margins["z_hi"], margins["w_lo"],
                    margins["w_hi"], margins["gap"], lam1, lam2]
            block = np.column_stack(cols)
            for row in block:
                fh.write(",".join(fmt % val for val in row) + "\n")


def write_path_csv(path_obj, delta1, M, alpha, out_path) -> None:
    br = chars.bound_check(path_obj, delta1, M, alpha)
    header = "t,x,z,w,value,A,B,C,margin_lower,margin_upper,margin_sub"
    fmt = "%.17g"
    with open(out_path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(path_obj.n):
            vals = [path_obj.t[i], path_obj.x[i], path_obj.z[i], path_obj.w[i],
                    path_obj.value[i], path_obj.A[i], path_obj.B[i], path_obj.C[i],
                    br.lower_margin[i], br.upper_margin[i], br.sub_margin[i]]
            fh.write(",".join(fmt % val for val in vals) + "\n")


def load_trajectory(path) -> Trajectory:
    """Rebuild a saved trajectory (the scenario is reconstructed from the
    embedded configuration text)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        cfg = parse_config_text(meta["config_text"], source=f"{path}:config")
        scn = cfg.to_scenario()
        traj = Trajectory(scn)
        traj._times = list(data["times"])
        traj._dts = list(data["dts"])
        traj._z = list(data["z"])
        traj._w = list(data["w"])
        traj._ez = list(data["z_edge"])
        traj._ew = list(data["w_edge"])
        traj.blown_up = bool(meta.get("blown_up", False))
        traj.snapshot_stride = int(meta.get("snapshot_stride", 1))
    return traj


# ---------------------------------------------------------------------------
# scenario driver
# ---------------------------------------------------------------------------

def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_scenario(config, out_dir, force: bool = False, quiet: bool = True) -> int:
    """Certify, run, verify and write all artifacts; returns the exit code."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    if not isinstance(config, ScenarioConfig):
        raise DomainError("run_scenario needs a config path or ScenarioConfig")
    scn = config.to_scenario()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    def say(msg):
        if not quiet:
            print(msg)

    bundle = certify(scn)
    (out / "certificates.txt").write_text(bundle.render_text() + "\n")
    _write_json(bundle.to_dict(), out / "certificates.json")
    report = {"certification": bundle.to_dict(),
              "scenario": {"problem": scn.problem, "n": scn.n, "T": scn.T,
                           "order": scn.order, "cfl": scn.cfl,
                           "x_interest": scn.x_interest,
                           "x_max": scn.grid.x_max, "dx": scn.grid.dx}}
    if not bundle.passed and not force:
        report["exit_code"] = EXIT_CERT
        _write_json(report, out / "report.json")
        say("certification FAILED")
        return EXIT_CERT
    report["certification_overridden"] = bool(not bundle.passed and force)

    monitors = Monitors(scn)
    try:
        traj, _ = run(scn, monitors)
    except BlowUpError as err:
        traj = err.trajectory
        if traj is not None and traj.scenario.config_text is not None:
            traj.save(out / "trajectory.npz")
        mrep = monitors.finalize()
        report.update({
            "exit_code": EXIT_BLOWUP,
            "blow_up": {"t": err.t, "cell": err.cell, "message": str(err)},
            "monitors": mrep.to_dict(),
        })
        _write_json(report, out / "report.json")
        say(f"blow-up: {err}")
        return EXIT_BLOWUP

    mrep = monitors.finalize()
    post = characteristic_pass(traj)
    cons = conservative_residual(traj) if traj.snapshot_stride == 1 else None
    traj.save(out / "trajectory.npz")
    write_fields_csv(traj, out / "fields.csv")
    _write_json(mrep.to_dict(), out / "monitor_report.json")
    report.update({
        "monitors": mrep.to_dict(),
        "characteristics": post,
        "conservative_residual": cons.to_dict() if cons is not None else None,
        "runtime_seconds": time.perf_counter() - started,
    })
    ok = mrep.ok and post["ok"]
    report["exit_code"] = EXIT_OK if ok else EXIT_MONITOR
    _write_json(report, out / "report.json")
    say("run OK" if ok else "monitor violation")
    return report["exit_code"]
