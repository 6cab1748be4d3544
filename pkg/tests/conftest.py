import dataclasses
from pathlib import Path

import numpy as np
import pytest

from nozzleflow.config import load_config, parse_config_text
from nozzleflow.model import GasLaw
from nozzleflow.region import NozzleProfile, RegionSpec, zero_profile

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def law53():
    return GasLaw.from_gamma("5/3")


@pytest.fixture(scope="session")
def law14():
    return GasLaw.from_gamma(1.4)


def desk_scenario(name, **overrides):
    """Desk scenario from the shipped config, optionally shrunk for speed."""
    scn = load_config(CONFIG_DIR / f"{name}.cfg").to_scenario()
    if overrides:
        overrides.setdefault("_cache", {})
        scn = dataclasses.replace(scn, **overrides)
    return scn


def desk_config_text(name, substitutions=None):
    text = (CONFIG_DIR / f"{name}.cfg").read_text()
    for old, new in (substitutions or {}).items():
        assert old in text, f"substitution target {old!r} not in {name}"
        text = text.replace(old, new)
    return text


def small_config(name, tmp_path, substitutions=None, filename=None):
    """Write a (possibly modified) desk config into tmp_path and return it."""
    text = desk_config_text(name, substitutions)
    path = tmp_path / (filename or f"{name}.cfg")
    path.write_text(text)
    return path


def constant_profile(value, law, I_total=0.0, **kw):
    """Profile with constant duct coefficient (for isolated solver tests)."""
    l_margin = abs(value) * 1.1 + 1e-12

    def a(x):
        return np.full_like(np.asarray(x, dtype=float), value)

    def zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def abar(x):
        return np.full_like(np.asarray(x, dtype=float), l_margin)

    kw.setdefault("k1", max(value * value, 1e-12))
    kw.setdefault("k2", 1.0)
    kw.setdefault("alpha", 1.0)
    kw.setdefault("M", 1.0)
    return NozzleProfile(a, zero, abar, I_total=I_total, **kw)


def uniform_scenario(problem, z_val, w_val, spec, law, profile=None, **kw):
    """Scenario with spatially uniform data (boundary data matching for P2)."""
    from nozzleflow.solver import Scenario

    profile = profile or zero_profile()

    def const(v):
        return lambda arg: np.full_like(np.asarray(arg, dtype=float), v)

    kw.setdefault("T", 1.0)
    kw.setdefault("n", 64)
    kw.setdefault("x_interest", 1.0)
    if problem == "P2":
        kw.setdefault("zB", const(z_val))
        kw.setdefault("wB", const(w_val))
    return Scenario(problem=problem, law=law, profile=profile, region=spec,
                    z0=const(z_val), w0=const(w_val), **kw)


#: Admissible envelope-constant sets used across tests (all at gamma = 5/3).
SPEC_M = dict(kind="m", L1=3.2, L2=2.8, U1=2.8, U2=3.2)
SPEC_L = dict(kind="l", L1=3.65, L2=2.65, U1=3.55, U2=2.55)


def region_m(profile=None, I=0.0):
    return RegionSpec(profile=profile, I_total=None if profile else I, **SPEC_M)


def region_l(profile=None, I=0.0):
    return RegionSpec(profile=profile, I_total=None if profile else I, **SPEC_L)
