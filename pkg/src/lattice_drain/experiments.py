"""Dataset generation for the dissipation-spectrum and dynamics figures.

Each run writes CSV tables plus ``manifest.json`` into
``<output_dir>/<experiment>-<config hash>/``. The manifest's ``config``
entry can be fed back to :func:`load_config` to replay the run.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from . import __version__
from .dynamics import (BathSpec, effective_coupling, evolve_exact, intermediate_correlations,
                       light_cone_profile, steady_state, to_site_basis, vacuum)
from .eigensystem import EigenSystem, diagonalize_coupled
from .errors import InputError, NumericError
from .lattice import LatticeModel, model_from_spec
from .spectrum import (approx_dissipation_spectrum, dynamical_matrix, exact_dynamical_spectrum,
                       remainder_r, ring_analytics)

EXPERIMENTS = ("dissipation-spectrum", "gamma-sweep", "ring-analytics",
               "eigenmode-correlations", "lightcone")

SPECTRUM_COLUMNS = ["gamma", "i", "energy", "spacing", "drain_weight", "remainder",
                    "gamma_exact", "gamma_approx", "delta_nu", "regime", "macroscopic", "error"]

DEFAULTS: dict[str, dict[str, Any]] = {
    "dissipation-spectrum": {"model": {"kind": "chain", "n": 25, "j": 1.0},
                             "gammas": [0.5, 2.0, 4.0]},
    "gamma-sweep": {"model": {"kind": "chain", "n": 25, "j": 1.0},
                    "gamma_sweep": {"start": 0.01, "stop": 100.0, "num": 60}},
    "ring-analytics": {"model": {"kind": "ring", "n": 100, "j": 1.0, "flux": float(np.pi / 2)},
                       "gammas": [1.0, 3.0, 5.0]},
    "eigenmode-correlations": {"model": {"kind": "ring", "n": 100, "j": 1.0,
                                         "flux": float(np.pi / 2)},
                               "gammas": [1.0], "times": [2, 5, 10, 20, 35, 50, 100, 200]},
    "lightcone": {"model": {"kind": "ring", "n": 100, "j": 1.0, "flux": float(np.pi / 2)},
                  "gammas": [1.0], "times": [2, 5, 10, 20, 35, 50]},
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _parse_complex(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InputError(f"complex value as a list needs [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict
    gammas: list[float] = field(default_factory=list)
    nbar: float = 1.0
    m: complex | None = None  # None means pure squeezing
    times: list[float] = field(default_factory=list)
    output_dir: str = "runs"
    gamma_sweep: dict | None = None
    jeff: float | None = None
    speed: float | None = None
    buffer: float = 4.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InputError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.gamma_sweep:
            gs = self.gamma_sweep
            try:
                self.gammas = [float(x) for x in np.logspace(np.log10(float(gs["start"])),
                                                             np.log10(float(gs["stop"])),
                                                             int(gs["num"]))]
            except KeyError as exc:
                raise InputError(f"gamma_sweep needs start, stop and num (missing {exc})") from None
        self.gammas = [float(g) for g in self.gammas]
        if not self.gammas:
            raise InputError("at least one gamma value is required")
        if any(g < 0 for g in self.gammas):
            raise InputError("gamma values must be non-negative")
        self.times = [float(t) for t in self.times]
        if any(t < 0 for t in self.times):
            raise InputError("times must be non-negative")
        if self.m is not None:
            self.m = _parse_complex(self.m)

    def bath(self, gamma: float) -> BathSpec:
        if self.m is None:
            return BathSpec.pure_squeezing(self.nbar, gamma)
        return BathSpec(self.nbar, self.m, gamma)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.m is not None:
            d["m"] = [self.m.real, self.m.imag]
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        nxt = cur.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[p] = nxt
        cur = nxt
    cur[parts[-1]] = value


def build_config(raw: Mapping[str, Any] | None = None, experiment: str | None = None,
                 overrides: Iterable[str] = (), output_dir: str | None = None) -> ExperimentConfig:
    """Merge defaults, a raw mapping (config file or manifest) and ``key=value`` overrides."""
    raw = dict(raw or {})
    if isinstance(raw.get("config"), Mapping):
        raw = dict(raw["config"])
    exp = experiment or raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise InputError(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
    merged = copy.deepcopy(DEFAULTS[exp])
    if raw.get("gammas") is not None:
        merged.pop("gamma_sweep", None)
    if "bath" in raw and isinstance(raw["bath"], Mapping):
        raw.update({k: v for k, v in raw.pop("bath").items() if k in ("nbar", "m")})
    merged.update(raw)
    merged["experiment"] = exp
    for item in overrides:
        if "=" not in item:
            raise InputError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        if key == "gammas":
            merged.pop("gamma_sweep", None)
        _set_dotted(merged, key.strip(), yaml.safe_load(val))
    if output_dir is not None:
        merged["output_dir"] = output_dir
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**merged)
    except InputError:
        raise
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad config value: {exc}") from None


def load_config(path: str | Path, **kwargs) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(raw, Mapping):
        raise InputError(f"config {path} must be a mapping")
    try:
        return build_config(raw, **kwargs)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# --- tables -----------------------------------------------------------------

def spectrum_rows(es: EigenSystem, gamma: float, r: np.ndarray | None = None) -> list[dict]:
    if r is None:
        r = remainder_r(es)
    ds = exact_dynamical_spectrum(dynamical_matrix(es, gamma), es, gamma)
    ap = approx_dissipation_spectrum(es, r, gamma)
    return [
        {"gamma": gamma, "i": i, "energy": es.energies[i], "spacing": es.spacing[i],
         "drain_weight": es.drain_weight[i], "remainder": r[i],
         "gamma_exact": ds.rates[i], "gamma_approx": ap.rates[i],
         "delta_nu": ds.delta_nu[i], "regime": ap.regime[i],
         "macroscopic": bool(ds.macroscopic[i]), "error": ""}
        for i in range(es.n_modes)
    ]


def sweep_gamma(model: LatticeModel | EigenSystem, gammas: Iterable[float],
                workers: int = 1) -> list[dict]:
    """Exact and approximate spectra for every gamma, rows ordered by (gamma, i).

    The eigensystem is computed once. A failing gamma produces a single row
    carrying the error message; the sweep carries on.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise InputError("gamma sweep needs at least one value")
    es = model if isinstance(model, EigenSystem) else diagonalize_coupled(model)
    r = remainder_r(es)

    def one(g):
        try:
            return spectrum_rows(es, g, r)
        except (NumericError, InputError, np.linalg.LinAlgError) as exc:
            row = {c: "" for c in SPECTRUM_COLUMNS}
            row.update(gamma=g, error=f"{type(exc).__name__}: {exc}")
            return [row]

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        chunks = list(pool.map(one, gammas))
    return [row for chunk in chunks for row in chunk]


def write_csv(path: Path, columns: list[str], rows: Iterable[Mapping]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_state_csv(path: Path, state) -> None:
    n = state.size
    mm, nn = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    cols = ["m", "n", "normal_re", "normal_im", "anomalous_re", "anomalous_im"]
    rows = ({"m": a, "n": b, "normal_re": state.normal[a, b].real,
             "normal_im": state.normal[a, b].imag, "anomalous_re": state.anomalous[a, b].real,
             "anomalous_im": state.anomalous[a, b].imag}
            for a, b in zip(mm.ravel(), nn.ravel()))
    write_csv(path, cols, rows)


# --- experiments ------------------------------------------------------------

def _tag(x: float) -> str:
    return f"{x:g}".replace("+", "")


def _run_dissipation_spectrum(cfg, model, out, workers):
    es = diagonalize_coupled(model)
    rows = sweep_gamma(es, cfg.gammas, workers)
    files = []
    for g in cfg.gammas:
        name = f"spectrum_gamma{_tag(g)}.csv"
        write_csv(out / name, SPECTRUM_COLUMNS, [r for r in rows if r["gamma"] == g])
        files.append(name)
    return files, {"n_modes": es.n_modes, "n_dropped": es.n_dropped}


def _run_gamma_sweep(cfg, model, out, workers):
    es = diagonalize_coupled(model)
    rows = sweep_gamma(es, cfg.gammas, workers)
    for row in rows:
        ok = row["error"] == ""
        gbar = row["drain_weight"] * row["gamma"] if ok else 0.0
        row["ratio_exact"] = row["gamma_exact"] / gbar if ok and gbar > 0 else ""
        row["ratio_approx"] = row["gamma_approx"] / gbar if ok and gbar > 0 else ""
    write_csv(out / "sweep.csv", SPECTRUM_COLUMNS + ["ratio_exact", "ratio_approx"], rows)
    return ["sweep.csv"], {"n_modes": es.n_modes, "n_points": len(cfg.gammas)}


def _run_ring_analytics(cfg, model, out, workers):
    flux = float(cfg.model.get("flux", np.pi / 2))
    if cfg.model.get("kind") != "ring" or not np.isclose(flux, np.pi / 2):
        raise InputError("ring-analytics needs a ring model with flux pi/2")
    j = model.hop_scale
    es = diagonalize_coupled(model)
    files, summary = [], {}
    for g in cfg.gammas:
        ra = ring_analytics(model.n_sites, j, g)
        ds = exact_dynamical_spectrum(dynamical_matrix(es, g), es, g)
        rows = [{"i": ra.mode_index[k], "k": np.pi * ra.mode_index[k] / model.n_sites,
                 "energy": es.energies[k], "gamma_analytic": ra.rates[k],
                 "gamma_exact": ds.rates[k], "delta_nu": ds.delta_nu[k],
                 "macroscopic": bool(ds.macroscopic[k])} for k in range(es.n_modes)]
        name = f"ring_gamma{_tag(g)}.csv"
        write_csv(out / name, list(rows[0]), rows)
        files.append(name)
        summary[_tag(g)] = {"k_c": ra.k_c, "gamma_0": ra.gamma_0,
                            "gamma_macroscopic_exact": [float(x) for x in ds.rates[ds.macroscopic]]}
    return files, summary


def _dynamics_setup(cfg, model, g):
    es = diagonalize_coupled(model)
    ds = exact_dynamical_spectrum(dynamical_matrix(es, g), es, g)
    return es, ds, cfg.bath(g)


def _run_eigenmode_correlations(cfg, model, out, workers):
    files, summary = [], {}
    for g in cfg.gammas:
        es, ds, bath = _dynamics_setup(cfg, model, g)
        jeff = cfg.jeff if cfg.jeff is not None else effective_coupling(es)
        v0 = vacuum(es.n_modes)
        for t in cfg.times:
            for kind, st in (("exact", evolve_exact(ds, es, bath, v0, t)),
                             ("intermediate", intermediate_correlations(es, bath, jeff, t))):
                name = f"eigen_{kind}_gamma{_tag(g)}_t{_tag(t)}.csv"
                write_state_csv(out / name, st)
                files.append(name)
        name = f"eigen_steady_gamma{_tag(g)}.csv"
        write_state_csv(out / name, steady_state(ds, es, bath))
        files.append(name)
        summary[_tag(g)] = {"jeff": jeff, "basis": "eigenmode"}
    return files, summary


def _run_lightcone(cfg, model, out, workers):
    if model.geometry not in ("chain", "ring"):
        raise InputError("lightcone experiment supports 1D chain and ring models only")
    speed = cfg.speed if cfg.speed is not None else 2 * model.hop_scale
    d = model.distance(model.drain)
    files, summary = [], {}
    for g in cfg.gammas:
        es, ds, bath = _dynamics_setup(cfg, model, g)
        v0 = vacuum(es.n_modes)
        prof_rows = []
        for t in cfg.times:
            st = to_site_basis(evolve_exact(ds, es, bath, v0, t), es)
            name = f"site_gamma{_tag(g)}_t{_tag(t)}.csv"
            write_state_csv(out / name, st)
            files.append(name)
            p = light_cone_profile(st, d, speed, t, cfg.buffer)
            prof_rows.append({"t": t, "radius": p.radius, "inside_max": p.inside_max,
                              "outside_max": p.outside_max, "front_position": p.front_position})
        if prof_rows:
            name = f"lightcone_gamma{_tag(g)}.csv"
            write_csv(out / name, list(prof_rows[0]), prof_rows)
            files.append(name)
        ss = to_site_basis(steady_state(ds, es, bath), es)
        name = f"site_steady_gamma{_tag(g)}.csv"
        write_state_csv(out / name, ss)
        files.append(name)
        summary[_tag(g)] = {"speed": speed, "buffer": cfg.buffer, "basis": "site"}
    return files, summary


_RUNNERS = {
    "dissipation-spectrum": _run_dissipation_spectrum,
    "gamma-sweep": _run_gamma_sweep,
    "ring-analytics": _run_ring_analytics,
    "eigenmode-correlations": _run_eigenmode_correlations,
    "lightcone": _run_lightcone,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Run one experiment and return its manifest (also written to disk)."""
    start = time.perf_counter()
    model = model_from_spec(cfg.model)
    out = Path(cfg.output_dir) / f"{cfg.experiment}-{cfg.digest()}"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    files, summary = _RUNNERS[cfg.experiment](cfg, model, out, workers)
    manifest = {
        "config": cfg.to_dict(),
        "model": {"label": model.label, "n_sites": model.n_sites, "drain": model.drain,
                  "geometry": model.geometry, "shape": list(model.shape),
                  "site_indexing": "row-major (site = y * nx + x)"},
        "run_dir": str(out),
        "files": files,
        "summary": summary,
        "tool": {"name": "lattice_drain", "version": __version__},
        "platform": {"python": platform.python_version(), "numpy": np.__version__,
                     "machine": platform.machine(),
                     "note": "floats written with 17 significant digits; last-bit "
                             "differences across BLAS/LAPACK builds are possible"},
        "wall_time_s": time.perf_counter() - start,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return manifest


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")
