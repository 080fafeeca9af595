"""Scenario-driven command line front end.

Usage::

    decohist <kind> --config FILE [--set section.key=value]... [--seed N]
             [--threads N] [--out DIR]

The configuration is an INI file whose sections and keys are listed in
``SCHEMA``; unknown sections or keys are rejected with their line number.
Every run writes ``manifest.json`` (resolved parameters, versions, seed,
metric summary and output checksums), ``report.json`` and kind-specific CSV
files.  Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import platform
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.sparse as sparse
from threadpoolctl import threadpool_limits

from . import __version__
from .bath import discretize_ohmic_bath, evolve_gaussian_closed_system, ou_sigma_pp
from .doubled import (
    FockTruncation,
    build_complex_pair,
    build_doubled_operators,
    closeness_product,
    commutator,
    fock_state,
    squeezed_vacuum,
    thermal_state,
)
from .exceptions import ConfigError, NumericalError, ValidationError
from .gaussian_paths import gaussian_dfun
from .histories import (
    analyze_decoherence,
    basis_family,
    decoherence_functional,
    eigenprojector_family,
)
from .langevin import (
    history_probabilities_mc,
    max_step,
    sample_initial,
    simulate_langevin,
    total_variation,
)
from .models import FPBath, GaussianState, HistorySpec, ModelParams
from .phase_space import (
    EvolutionSpec,
    WignerField,
    cat_state_field,
    evolve_dqt_reduced,
    evolve_fokker_planck,
    evolve_liouville,
    gaussian_field,
    min_relative,
    wigner_distance,
)

KINDS = ("dfun", "algebra", "paths", "wigner", "langevin", "bath", "compare")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return conv


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(text):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("expected at least one number")
    return vals


def _grids(text):
    """One list of centres, or several separated by ';' (one per time)."""
    return [_floats(part) for part in text.split(";")]


# section -> key -> (converter, default)
SCHEMA = {
    "run": {"seed": (int, 0), "tol": (float, 1e-2), "label": (str, "")},
    "model": {
        "mass": (float, 1.0),
        "hbar": (float, 1.0),
        "potential": (_choice("free", "harmonic", "quartic", "harmonic_quartic"), "harmonic"),
        "omega": (float, 1.0),
        "lam": (float, 0.0),
    },
    "bath": {
        "gamma": (float, 0.5),
        "kT_A": (float, 1.0),
        "kT_B": (float, 0.01),
        "cutoff": (float, 50.0),
        "N": (int, 64),
        "bath_masses": (float, 1.0),
        "grid": (_choice("linear", "gauss_legendre", "log"), "linear"),
        "counterterm": (_bool, True),
        "tau": (float, 5.0),
        "samples": (int, 501),
    },
    "state": {
        "kind": (_choice("gaussian", "cat"), "gaussian"),
        "mean_x": (float, 0.0),
        "mean_p": (float, 0.0),
        "sxx": (float, 0.5),
        "sxp": (float, 0.0),
        "spp": (float, 0.5),
        "cat_a": (float, 2.0),
        "cat_sigma": (float, 0.5),
        "cat_p0": (float, 0.0),
    },
    "history": {
        "tau": (float, 2.0),
        "times": (_floats, [1.0, 2.0]),
        "centers": (_grids, [[-1.0, 0.0, 1.0]]),
        "delta": (float, 0.5),
        "window": (_choice("gaussian", "sharp"), "gaussian"),
    },
    "dfun": {
        "dim": (int, 4),
        "hamiltonian": (_choice("random", "oscillator"), "random"),
        "rho": (_choice("random", "ground", "mixed"), "random"),
        "family": (_choice("energy", "basis"), "basis"),
        "times": (_floats, [0.0, 0.5, 1.0]),
    },
    "algebra": {
        "levels": (int, 32),
        "omega_ref": (float, 1.0),
        "state": (_choice("vacuum", "thermal", "squeezed"), "vacuum"),
        "nbar": (float, 0.0),
        "r": (float, 0.0),
    },
    "paths": {
        "slices": (int, 64),
        "doubled": (_bool, False),
        "normalization": (_choice("grid", "trace"), "grid"),
        "omega_ref": (float, 0.0),
    },
    "grid": {
        "n_x": (int, 128),
        "n_p": (int, 128),
        "x_min": (float, -8.0),
        "x_max": (float, 8.0),
        "p_min": (float, -8.0),
        "p_max": (float, 8.0),
    },
    "evolution": {
        "mode": (_choice("liouville", "fokker_planck", "dqt_reduced"), "fokker_planck"),
        "duration": (float, 1.0),
        "steps": (int, 100),
        "moyal_order": (int, 1),
        "scheme": (_choice("strang", "yoshida4"), "strang"),
        "drag": (float, 0.0),
        "boundary_mass_tol": (float, 1e-4),
        "binary": (_bool, False),
    },
    "langevin": {
        "K": (int, 10000),
        "dt": (float, 0.01),
        "kind": (_choice("wigner", "husimi"), "wigner"),
        "method": (_choice("auto", "exact", "baoab", "em"), "auto"),
        "sigma_x": (float, 0.0),
        "sigma_p": (float, 0.0),
        "dump": (int, 0),
    },
}


@dataclass
class Scenario:
    """Validated scenario: typed parameter values plus run options."""

    kind: str
    values: dict
    source: str
    seed: int = 0
    threads: int = 1
    out: Path = Path("out")
    lines: dict = field(default_factory=dict)

    def get(self, section, key):
        return self.values[section][key]

    def resolved(self) -> dict:
        return {s: dict(sorted(v.items())) for s, v in sorted(self.values.items())}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, by scanning the raw file."""
    out = {}
    section = None
    head = re.compile(r"^\s*\[([^\]]+)\]")
    kv = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
    for n, line in enumerate(text.splitlines(), 1):
        m = head.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        m = kv.match(line)
        if m and section is not None:
            out.setdefault((section, m.group(1)), n)
    return out


def load_scenario(kind: str, path, overrides=(), seed=None, threads=1, out="out") -> Scenario:
    """Parse, type-check and validate a configuration file."""
    if kind not in KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}; choose from {', '.join(KINDS)}")
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", path) from exc
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", path, exc.lineno) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], path, exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", path, line) from exc
    lines = _line_index(text)
    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", path, lines.get((section, None)),
                              section)
        for key, value in parser.items(section):
            if key not in SCHEMA.get(section, {}):
                raise ConfigError(f"unknown key '{key}' in section [{section}]", path,
                                  lines.get((section, key)), f"{section}.{key}")
            raw[(section, key)] = (value, lines.get((section, key)), path)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value", "--set")
        name, value = item.split("=", 1)
        section, _, key = name.strip().partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{name.strip()}'", "--set", None, name.strip())
        raw[(section, key)] = (value.strip(), None, "--set")
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for (section, key), (value, line, src) in raw.items():
        conv = SCHEMA[section][key][0]
        try:
            values[section][key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"invalid value {value!r} for '{section}.{key}': {exc}", src,
                              line, f"{section}.{key}") from exc
    if seed is None:
        seed = values["run"]["seed"]
    if seed < 0:
        raise ConfigError("seed must be non-negative", "--seed")
    if threads < 1:
        raise ConfigError("threads must be at least 1", "--threads")
    sc = Scenario(kind, values, path, int(seed), int(threads), Path(out), lines)
    try:
        _PREPARE[kind](sc)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"invalid {kind} scenario: {exc}", path) from exc
    return sc


# domain object builders (validate before any computation)


def _model(sc):
    v = sc.values["model"]
    return ModelParams(v["mass"], v["hbar"], v["potential"], v["omega"], v["lam"])


def _state(sc):
    v = sc.values["state"]
    return GaussianState((v["mean_x"], v["mean_p"]), ((v["sxx"], v["sxp"]), (v["sxp"], v["spp"])))


def _history(sc):
    v = sc.values["history"]
    grids = v["centers"]
    if len(grids) == 1:
        grids = grids * len(v["times"])
    return HistorySpec(v["tau"], tuple(v["times"]), tuple(grids), v["delta"], v["window"])


def _baths(sc):
    v = sc.values["bath"]
    return FPBath(v["gamma"], v["kT_A"]), FPBath(v["gamma"], v["kT_B"])


def _omega_ref(sc, model):
    w = sc.values["paths"]["omega_ref"]
    return w if w > 0 else None


def _prep_dfun(sc):
    v = sc.values["dfun"]
    if not 2 <= v["dim"] <= 256:
        raise ValidationError("dfun.dim must lie in [2, 256]")
    t = v["times"]
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ValidationError("dfun.times must be strictly increasing")
    if sc.values["model"]["hbar"] <= 0:
        raise ValidationError("model.hbar must be positive")


def _prep_algebra(sc):
    v = sc.values["algebra"]
    FockTruncation(v["levels"], sc.values["model"]["mass"], v["omega_ref"],
                   sc.values["model"]["hbar"]).require_doubled()
    if v["nbar"] < 0:
        raise ValidationError("algebra.nbar must be non-negative")


def _prep_paths(sc):
    model = _model(sc)
    _history(sc)
    _baths(sc)
    _state(sc).check_uncertainty(model.hbar)
    if sc.values["paths"]["slices"] < 1:
        raise ValidationError("paths.slices must be positive")
    if sc.values["paths"]["doubled"] and model.frequency == 0 and _omega_ref(sc, model) is None:
        raise ValidationError("free doubled runs need paths.omega_ref > 0")


def _evolution(sc, model, bath=None, liouville=False):
    v = sc.values["evolution"]
    return EvolutionSpec(model, v["duration"], v["steps"], drag=v["drag"] if liouville else 0.0,
                         bath=bath, moyal_order=0 if liouville else v["moyal_order"],
                         boundary_mass_tol=v["boundary_mass_tol"], scheme=v["scheme"])


def _prep_wigner(sc):
    model = _model(sc)
    g = sc.values["grid"]
    if g["n_x"] < 8 or g["n_p"] < 8:
        raise ValidationError("grid sizes must be at least 8")
    if not (g["x_max"] > g["x_min"] and g["p_max"] > g["p_min"]):
        raise ValidationError("grid extents must be increasing")
    if sc.values["state"]["kind"] == "gaussian":
        _state(sc).check_uncertainty(model.hbar)
    elif sc.values["state"]["cat_sigma"] <= 0:
        raise ValidationError("state.cat_sigma must be positive")
    ba, _ = _baths(sc)
    _evolution(sc, model, ba)


def _prep_langevin(sc):
    model = _model(sc)
    _history(sc)
    _baths(sc)
    _state(sc).check_uncertainty(model.hbar)
    v = sc.values["langevin"]
    if v["K"] < 1:
        raise ValidationError("langevin.K must be positive")
    if v["kind"] == "husimi" and (v["sigma_x"] < 0 or v["sigma_p"] < 0):
        raise ValidationError("langevin.sigma_x and sigma_p must be non-negative")
    bound = max_step(model, sc.values["bath"]["gamma"])
    if not 0 < v["dt"] <= bound * (1 + 1e-12):
        raise ValidationError(f"langevin.dt = {v['dt']:.6g} exceeds the stability bound "
                              f"{bound:.6g}")


def _prep_bath(sc):
    model = _model(sc)
    if not model.is_linear:
        raise ValidationError("bath scenarios need a free or harmonic model")
    _state(sc)
    v = sc.values["bath"]
    discretize_ohmic_bath(v["gamma"], v["cutoff"], v["N"], model.mass, v["bath_masses"], v["grid"])
    if v["samples"] < 2 or v["tau"] <= 0:
        raise ValidationError("bath.samples must be >= 2 and bath.tau positive")


def _prep_compare(sc):
    _prep_paths(sc)
    _prep_langevin(sc)
    _prep_wigner(sc)


_PREPARE = {
    "dfun": _prep_dfun,
    "algebra": _prep_algebra,
    "paths": _prep_paths,
    "wigner": _prep_wigner,
    "langevin": _prep_langevin,
    "bath": _prep_bath,
    "compare": _prep_compare,
}


# output helpers


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


def _write_dfun(path, D):
    rows = []
    for i, a in enumerate(D.history_index):
        for j, b in enumerate(D.history_index):
            e = D.entries[i, j]
            rows.append((a, b, e.real, e.imag))
    _write_csv(path, ["history", "history_prime", "re", "im"], rows)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# runners: each returns (report dict, list of written file names)


def _run_dfun(sc):
    v = sc.values["dfun"]
    n = v["dim"]
    hbar = sc.values["model"]["hbar"]
    rng = np.random.default_rng(sc.seed)
    if v["hamiltonian"] == "random":
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H = 0.5 * (A + A.conj().T)
    else:
        H = np.diag(hbar * sc.values["model"]["omega"] * (np.arange(n) + 0.5)).astype(complex)
        a = np.diag(np.sqrt(np.arange(1, n)), 1)
        H = H + 0.1 * (a + a.T)
    if v["rho"] == "random":
        G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        rho = G @ G.conj().T
        rho /= np.trace(rho).real
    elif v["rho"] == "ground":
        rho = np.zeros((n, n), dtype=complex)
        rho[0, 0] = 1.0
    else:
        rho = np.eye(n, dtype=complex) / n
    fam = eigenprojector_family(H) if v["family"] == "energy" else basis_family(
        n, [list(range(0, n // 2)), list(range(n // 2, n))])
    D = decoherence_functional(H, rho, v["times"], [fam] * len(v["times"]), hbar)
    rep = analyze_decoherence(D, sc.values["run"]["tol"])
    _write_dfun(sc.out / "dfun.csv", D)
    _write_csv(sc.out / "probabilities.csv", ["history", "probability"],
               list(rep.probabilities.items()))
    report = rep.to_dict()
    report["total"] = rep.extra["total"]
    return report, ["dfun.csv", "probabilities.csv"]


def _run_algebra(sc):
    v = sc.values["algebra"]
    m = sc.values["model"]
    trunc = FockTruncation(v["levels"], m["mass"], v["omega_ref"], m["hbar"])
    ops = build_doubled_operators(trunc)
    n = trunc.levels
    if v["state"] == "vacuum":
        rho_B = fock_state(n, 0)
    elif v["state"] == "thermal":
        rho_B = thermal_state(n, v["nbar"])
    else:
        rho_B = squeezed_vacuum(n, v["r"])
    prod = closeness_product(ops, rho_B)
    S = ops.safe_projector
    eye = sparse.identity(n * n, dtype=complex, format="csr")
    comm = {
        "XP": commutator(ops.X, ops.P),
        "XQ": commutator(ops.X, ops.Q),
        "KP": commutator(ops.K, ops.P),
        "QK": commutator(ops.Q, ops.K),
        "QP-ihbar": commutator(ops.Q, ops.P) - 1j * m["hbar"] * eye,
        "XK-ihbar": commutator(ops.X, ops.K) - 1j * m["hbar"] * eye,
    }
    norms = {k: float(np.abs((S @ c @ S).toarray()).max()) for k, c in comm.items()}
    Xc, Pc, Hc = build_complex_pair(trunc)
    norms["XcPc"] = float(np.abs((S @ commutator(Xc, Pc) @ S).toarray()).max())
    target = m["hbar"] ** 2 / 4
    report = {
        "closeness_product": prod,
        "closeness_target": target,
        "closeness_relative_excess": prod / target - 1.0,
        "safe_commutator_norms": norms,
        "levels": n,
    }
    rows = [(k, val) for k, val in sorted(norms.items())]
    _write_csv(sc.out / "commutators.csv", ["pair", "safe_max_abs"], rows)
    return report, ["commutators.csv"]


def _paths_dfun(sc, doubled):
    model = _model(sc)
    hist = _history(sc)
    ba, bb = _baths(sc)
    p = sc.values["paths"]
    return gaussian_dfun(model, hist, p["slices"], _state(sc), bath=ba, bath_b=bb,
                         doubled=doubled, omega_ref=_omega_ref(sc, model),
                         normalization=p["normalization"])


def _dfun_summary(D, tol):
    rep = analyze_decoherence(D, tol)
    out = rep.to_dict()
    out["im_ratio"] = D.im_ratio()
    out["min_real_entry"] = float(D.entries.real.min())
    out["total"] = rep.extra["total"]
    return out


def _run_paths(sc):
    D = _paths_dfun(sc, sc.values["paths"]["doubled"])
    _write_dfun(sc.out / "dfun.csv", D)
    return _dfun_summary(D, sc.values["run"]["tol"]), ["dfun.csv"]


def _initial_field(sc):
    g = sc.values["grid"]
    ext = (g["x_min"], g["x_max"], g["p_min"], g["p_max"])
    s = sc.values["state"]
    if s["kind"] == "cat":
        W = cat_state_field(s["cat_a"], s["cat_sigma"], sc.values["model"]["hbar"], g["n_x"],
                            g["n_p"], ext, s["cat_p0"])
    else:
        W = gaussian_field(_state(sc), g["n_x"], g["n_p"], ext)
    return W.with_values(W.values / W.mass())


def _evolve(sc, W0, mode):
    model = _model(sc)
    ba, bb = _baths(sc)
    if mode == "liouville":
        return evolve_liouville(W0, _evolution(sc, model, None, liouville=True))
    if mode == "fokker_planck":
        return evolve_fokker_planck(W0, _evolution(sc, model, ba))
    return evolve_dqt_reduced(W0, _evolution(sc, model, ba), ba, bb)


def _run_wigner(sc):
    W0 = _initial_field(sc)
    mode = sc.values["evolution"]["mode"]
    W = _evolve(sc, W0, mode)
    mean, cov = W.moments()
    report = {
        "mode": mode,
        "initial_mass": W0.mass(),
        "final_mass": W.mass(),
        "normalization_drift": abs(W.mass() - W0.mass()),
        "boundary_mass": W.boundary_mass(),
        "min_relative": min_relative(W),
        "mean": list(mean),
        "cov": [list(r) for r in cov],
    }
    W.to_csv(sc.out / "field.csv")
    files = ["field.csv"]
    if sc.values["evolution"]["binary"]:
        W.to_binary(sc.out / "field.bin")
        files.append("field.bin")
    return report, files


def _probabilities(sc, kind, kT, seed):
    model = _model(sc)
    hist = _history(sc)
    v = sc.values["langevin"]
    sx, spp = v["sigma_x"], v["sigma_p"]
    if kind == "husimi" and (sx <= 0 or spp <= 0):
        # coherent-state widths of the reference oscillator
        w = model.frequency or 1.0
        sx = math.sqrt(model.hbar / (2 * model.mass * w))
        spp = model.hbar / (2 * sx)
    ens = sample_initial(_state(sc), kind, v["K"], seed, sx, spp, hbar=model.hbar)
    ba, _ = _baths(sc)
    trajs = simulate_langevin(ens, model, ba.gamma, kT, hist.tau, v["dt"], v["method"],
                              record_times=None if v["dump"] else hist.times,
                              workers=sc.threads)
    return trajs, history_probabilities_mc(trajs, hist)


def _run_langevin(sc):
    v = sc.values["langevin"]
    ba, bb = _baths(sc)
    kT = ba.kT if v["kind"] == "wigner" else ba.kT + bb.kT
    trajs, probs = _probabilities(sc, v["kind"], kT, sc.seed)
    rows = list(zip(probs.labels, probs.estimates, probs.stderr))
    _write_csv(sc.out / "probabilities.csv", ["history", "probability", "stderr"], rows)
    probs.to_json(sc.out / "probabilities.json")
    files = ["probabilities.csv", "probabilities.json"]
    if v["dump"]:
        trajs.to_csv(sc.out / "trajectories.csv", v["dump"])
        files.append("trajectories.csv")
    report = {"total": probs.total, "remainder": probs.remainder, "K": probs.count,
              "kT": kT, "kind": v["kind"], "max_stderr": float(np.max(probs.stderr))}
    return report, files


def _run_bath(sc):
    model = _model(sc)
    v = sc.values["bath"]
    bath = discretize_ohmic_bath(v["gamma"], v["cutoff"], v["N"], model.mass, v["bath_masses"],
                                 v["grid"])
    state = _state(sc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        series = evolve_gaussian_closed_system(model, bath, v["kT_A"], state, v["tau"],
                                               v["samples"], counterterm=v["counterterm"])
    series.to_csv(sc.out / "moments.csv")
    report = {
        "N": bath.size,
        "counterterm": bath.counterterm,
        "recurrence_time": bath.recurrence_time,
        "recurrence_crossed": series.recurrence_crossed,
        "final_cov": [list(r) for r in series.cov[-1]],
    }
    if model.potential == "free":
        ou = ou_sigma_pp(series.times, model.mass, v["gamma"], v["kT_A"], state.sigma[1, 1])
        report["sup_relative_deviation_spp"] = float(
            np.max(np.abs(series.cov[:, 1, 1] - ou) / ou))
    return report, ["moments.csv"]


def _run_compare(sc):
    tol = sc.values["run"]["tol"]
    sqt = _paths_dfun(sc, False)
    dqt = _paths_dfun(sc, True)
    ba, bb = _baths(sc)
    _, pa = _probabilities(sc, "wigner", ba.kT, sc.seed)
    _, pb = _probabilities(sc, "husimi", ba.kT + bb.kT, sc.seed)
    W0 = _initial_field(sc)
    Wa = _evolve(sc, W0, "fokker_planck")
    Wb = _evolve(sc, W0, "dqt_reduced")
    _write_dfun(sc.out / "dfun_sqt.csv", sqt)
    _write_dfun(sc.out / "dfun_dqt.csv", dqt)
    rows = list(zip(pa.labels, pa.estimates, pa.stderr, pb.estimates, pb.stderr))
    _write_csv(sc.out / "probabilities.csv",
               ["history", "p_sqt", "stderr_sqt", "p_dqt", "stderr_dqt"], rows)
    s_sum = _dfun_summary(sqt, tol)
    d_sum = _dfun_summary(dqt, tol)
    report = {
        "sqt": {"epsilon_max": s_sum["epsilon_max"], "im_ratio": s_sum["im_ratio"]},
        "dqt": {"epsilon_max": d_sum["epsilon_max"], "im_ratio": d_sum["im_ratio"],
                "min_real_entry": d_sum["min_real_entry"]},
        "probability_tv_distance": total_variation(pa, pb),
        "wigner_l1_distance": wigner_distance(Wa, Wb, "L1"),
    }
    return report, ["dfun_sqt.csv", "dfun_dqt.csv", "probabilities.csv"]


_RUN = {
    "dfun": _run_dfun,
    "algebra": _run_algebra,
    "paths": _run_paths,
    "wigner": _run_wigner,
    "langevin": _run_langevin,
    "bath": _run_bath,
    "compare": _run_compare,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_scenario(sc: Scenario) -> dict:
    """Execute a validated scenario and write its artifacts; returns the report."""
    try:
        sc.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc.strerror}", str(sc.out)) from exc
    with threadpool_limits(limits=sc.threads):
        report, files = _RUN[sc.kind](sc)
    _dump_json(sc.out / "report.json", report)
    files = sorted(files + ["report.json"])
    manifest = {
        "kind": sc.kind,
        "seed": sc.seed,
        "threads": sc.threads,
        "config": Path(sc.source).name,
        "parameters": sc.resolved(),
        "versions": {
            "decohist": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "metrics": report,
        "outputs": {name: _sha256(sc.out / name) for name in files},
    }
    _dump_json(sc.out / "manifest.json", manifest)
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decohist", description=__doc__.split("\n\n")[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True, help="INI scenario file")
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="SECTION.KEY=VALUE", help="override one configuration value")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.kind, args.config, args.overrides, args.seed, args.threads,
                           args.out)
        report = run_scenario(sc)
    except ConfigError as exc:
        print(f"decohist: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"decohist: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"decohist: numerical failure in {args.kind}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"decohist: numerical failure in {args.kind}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(_json_safe(report), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
