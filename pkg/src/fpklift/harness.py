"""Experiment pipelines behind the CLI subcommands.

Each pipeline writes its data artifacts into the run directory and returns a
list of check rows ``{name, kind, value, threshold, pass}``. ``kind`` is
``"check"`` or ``"negative-control"``; a negative-control row passes when the
corrupted input is detected.
"""

import hashlib
import inspect
import json
import time
from pathlib import Path

import numpy as np

from . import __version__, _rng
from . import cylinder as cyl
from .detflow import SolverConfig, coupled_product_residual, family_residual, mass_check, simulate_coupled, \
    simulate_nlfpk
from .exceptions import ConfigError
from .generator import PRESETS, constant_model, integrability_report, preset
from .lift import EnsemblePathLaw, ce_residual, rinfty_ode_residual, superposition_assemble, superposition_audit
from .measure import MeasurePath, ParticleMeasure, path_chart
from .stochflow import coordinate_sde_residual, lifted_fpk_residual, martingale_report, mgp_test, \
    shift_expectation, simulate_snlfpk, stochastic_mass_check, stochastic_weak_residual
from .testfn import enumerate_family

CHECKS_FILE = "checks.json"
MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.yaml"
NON_DATA = {MANIFEST_FILE, CONFIG_FILE, "summary.txt", "summary.json"}


def _row(name, value, threshold, passed, kind="check"):
    return {"name": name, "kind": kind, "value": value, "threshold": threshold, "pass": bool(passed)}


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def build_family(cfg):
    return enumerate_family(cfg.family_d, cfg.family_depth, cfg.family_r0, max_size=cfg.family_n_coords,
                            steps_per_radius=cfg.family_grid_steps)


def build_model(cfg):
    d = cfg.family_d
    if cfg.model_name == "constant":
        b = cfg.model_b if cfg.model_b is not None else [0.0] * d
        a = cfg.model_a if cfg.model_a is not None else 0.0
        sigma = cfg.model_sigma
        if sigma is None and cfg.model_noise_dim:
            sigma = np.zeros((d, cfg.model_noise_dim))
        c = constant_model(a, b, sigma)
    elif cfg.model_name in PRESETS:
        params = dict(cfg.model_params)
        if "d" in inspect.signature(PRESETS[cfg.model_name]).parameters:
            params.setdefault("d", d)
        elif d != 1:
            raise ConfigError("family.d", f"preset {cfg.model_name!r} is one-dimensional")
        try:
            c = preset(cfg.model_name, **params)
        except TypeError as exc:
            raise ConfigError("model.params", str(exc)) from None
    else:
        raise ConfigError("model.name", f"unknown preset {cfg.model_name!r}")
    if c.dim != d:
        raise ConfigError("family.d", f"model dimension {c.dim} differs from family.d={d}")
    if cfg.model_noise_dim is not None and c.noise_dim != cfg.model_noise_dim:
        raise ConfigError("model.noise_dim", f"model has noise dimension {c.noise_dim}")
    return c


def solver_config(cfg):
    return SolverConfig(cfg.solver_n_particles, float(cfg.solver_dt), float(cfg.solver_t_final),
                        cfg.solver_seed, cfg.solver_save_stride)


def initial_cloud(cfg, mean, index=0):
    """Gaussian cloud of ``solver.n_particles`` equal-weight atoms from stream ``(seed, DATA, index)``."""
    rng = _rng.stream(cfg.solver_seed, _rng.DATA, index)
    n, d = cfg.solver_n_particles, cfg.family_d
    pts = mean + cfg.init_std * rng.standard_normal((n, d))
    return ParticleMeasure(pts, np.full(n, cfg.init_mass / n), dim=d)


def frozen_path(path):
    """Constant path at the initial measure (a non-solution for non-trivial coefficients)."""
    return MeasurePath(path.times, [path[0]] * len(path))


# --- pipelines ---------------------------------------------------------------------------------


def run_simulate_nlfpk(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    path = simulate_nlfpk(c, initial_cloud(cfg, cfg.init_mean), solver_config(cfg))
    path.save_json(out / "path.json")
    res = family_residual(path, c, fam, cfg.checks_n_check)
    res.save_csv(out / "residual.csv")
    path_chart(path, fam, "H").save_csv(out / "coords.csv")
    (out / "family.json").write_text(fam.to_json() + "\n")
    integ = integrability_report(c, path)
    _dump(integ.to_dict(), out / "integrability.json")
    mass = mass_check(path, c, cfg.checks_l_values)
    _dump(mass, out / "mass.json")
    return [
        _row("weak_residual_max", res.max_abs, cfg.checks_tol, res.max_abs <= cfg.checks_tol),
        _row("mass_drift", mass["mass_drift"], 0.0, mass["mass_drift"] == 0.0),
        _row("integrability", float(np.max(np.r_[integ.a.ravel(), integ.b.ravel()])), integ.threshold, integ.passed),
    ]


def _coupled_battery():
    return [cyl.constant(1.0), cyl.linear(1), cyl.product(1, 2), cyl.tanh(1)]


def run_coupled(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    mu_path, nu_path = simulate_coupled(c, initial_cloud(cfg, cfg.init_mean, 0),
                                        initial_cloud(cfg, cfg.init_nu_mean, 1), solver_config(cfg))
    mu_path.save_json(out / "mu_path.json")
    nu_path.save_json(out / "nu_path.json")
    rows, worst = [], 0.0
    with open(out / "residual.csv", "w") as fh:
        fh.write("t,idx,residual\n")
        for k, phi in enumerate(fam.g[: cfg.checks_n_check], start=1):
            for F in _coupled_battery():
                r = coupled_product_residual(mu_path, nu_path, c, phi, F, fam)
                worst = max(worst, r.max_abs)
                for t, v in zip(r.times, r.values[:, 0]):
                    fh.write(f"{float(t)!r},g_{k}*{F.name},{float(v)!r}\n")
    rows.append(_row("coupled_product_residual_max", worst, cfg.checks_tol, worst <= cfg.checks_tol))
    return rows


def _battery(cfg):
    return [] if cfg.checks_battery == "none" else [cyl.linear(1), cyl.product(1, 2), cyl.tanh(1)]


def _members(cfg, c):
    scfg = solver_config(cfg)
    return [simulate_nlfpk(c, initial_cloud(cfg, m, k), scfg, stream_index=k)
            for k, m in enumerate(cfg.init_member_means)]


def run_lift_check(cfg, out, path_dir=None):
    fam, c = build_family(cfg), build_model(cfg)
    if path_dir:
        files = sorted(Path(path_dir).glob("*path*.json"))
        if not files:
            raise ConfigError("--path-dir", f"no *path*.json files in {path_dir}")
        members = [MeasurePath.load_json(f) for f in files]
        weights = [1.0 / len(members)] * len(members)
    else:
        members = _members(cfg, c)
        weights = cfg.ensemble_weights
    eta = EnsemblePathLaw(weights, tuple(members))
    battery = _battery(cfg)
    ce = ce_residual(eta, c, battery, fam)
    ce.save_csv(out / "ce_residual.csv")
    rows = [_row("ce_residual_max", ce.max_abs, cfg.checks_tol, ce.max_abs <= cfg.checks_tol)]
    zres = [rinfty_ode_residual(path_chart(m, fam, "G"), c, m, fam) for m in members]
    zmax = max(float(np.max(np.abs(z.values[:, : cfg.checks_n_check]))) for z in zres)
    zres[0].save_csv(out / "rinfty_residual_member0.csv")
    rows.append(_row("rinfty_ode_residual_max", zmax, cfg.checks_tol, zmax <= cfg.checks_tol))
    return rows


def run_superposition_audit(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    members = _members(cfg, c)
    eta, gammas = superposition_assemble(members, cfg.ensemble_weights)
    battery = None if cfg.checks_battery == "default" else []
    audit = superposition_audit(eta, c, fam, cfg.checks_tol, cfg.checks_n_check, battery, gammas,
                                n_jobs=cfg.runtime_threads)
    _dump(audit, out / "audit.json")
    frozen = len(members) - 1
    bad = list(members)
    bad[frozen] = frozen_path(members[frozen])
    neg = superposition_audit(EnsemblePathLaw(eta.weights, tuple(bad)), c, fam, cfg.checks_tol,
                              cfg.checks_n_check, [], n_jobs=cfg.runtime_threads)
    _dump(neg, out / "audit_negative.json")
    drop = audit["mass_fraction"] - neg["mass_fraction"]
    w = float(eta.weights[frozen])
    return [
        _row("mass_fraction", audit["mass_fraction"], 1.0, audit["mass_fraction"] == 1.0),
        _row("battery_max", audit["battery_max"], cfg.checks_tol, audit["battery_max"] <= cfg.checks_tol),
        _row("marginal_identity", audit["marginal_identity"], True, audit["marginal_identity"]),
        _row("frozen_member_drop", drop, w, drop == w, kind="negative-control"),
    ]


def _ensemble(cfg, c):
    return simulate_snlfpk(c, initial_cloud(cfg, cfg.init_mean), solver_config(cfg), cfg.ensemble_k_paths,
                           n_jobs=cfg.runtime_threads)


def run_simulate_snlfpk(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    ens = _ensemble(cfg, c)
    (out / "noise").mkdir(exist_ok=True)
    (out / "coords").mkdir(exist_ok=True)
    worst, gap = 0.0, 0.0
    funcs = fam.h[: cfg.checks_n_check]
    with open(out / "stochastic_residual.csv", "w") as fh:
        fh.write("realization,idx,max_abs_residual\n")
        for r, (path, W) in enumerate(zip(ens.paths, ens.noises)):
            W.save_csv(out / "noise" / f"W_{r:05d}.csv")
            path_chart(path, fam, "H").save_csv(out / "coords" / f"z_{r:05d}.csv")
            res = stochastic_weak_residual(path, W, c, funcs)
            for i, v in enumerate(res.max_per_index(), start=1):
                fh.write(f"{r},h_{i},{float(v)!r}\n")
            worst = max(worst, res.max_abs)
            coord = coordinate_sde_residual(path, W, c, fam, 1)
            gap = max(gap, float(np.max(np.abs(coord.values[:, 0] - res.values[:, 0]))))
    ens.paths[0].save_json(out / "path_00000.json")
    mass = stochastic_mass_check(ens, c, cfg.checks_l_values)
    _dump(mass, out / "mass.json")
    return [
        _row("stochastic_residual_max", worst, cfg.checks_tol, worst <= cfg.checks_tol),
        _row("coordinate_vs_weak_gap", gap, 1e-12, gap <= 1e-12),
        _row("mass_drift", mass["mass_drift"], 0.0, mass["mass_drift"] == 0.0),
    ]


def run_mgp_check(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    ens = _ensemble(cfg, c)
    rep = martingale_report(ens, c, fam, cfg.checks_i_max, n_jobs=cfg.runtime_threads)
    _dump(rep.to_dict(), out / "martingale.json")
    neg = mgp_test(ens, c.without_drift(), fam, cfg.checks_i_max, n_jobs=cfg.runtime_threads)
    _dump(neg.to_dict(), out / "martingale_negative.json")
    n_fail = sum(not e["pass"] for e in neg.orthogonality)
    orth_ok = all(e["pass"] for e in rep.orthogonality)
    cov_ok = all(e["pass"] for e in rep.covariation)
    return [
        _row("orthogonality", sum(e["pass"] for e in rep.orthogonality), len(rep.orthogonality), orth_ok),
        _row("covariation", sum(e["pass"] for e in rep.covariation), len(rep.covariation), cov_ok),
        _row("drift_dropped_failures", n_fail, 1, n_fail >= 1, kind="negative-control"),
    ]


def run_lifted_check(cfg, out):
    fam, c = build_family(cfg), build_model(cfg)
    ens = _ensemble(cfg, c)
    battery = [cyl.linear(1), cyl.square(1), cyl.product(1, 2), cyl.tanh(1)]
    reports = [lifted_fpk_residual(ens, c, fam, F, n_jobs=cfg.runtime_threads) for F in battery]
    _dump(reports, out / "lifted.json")
    rows = [_row(f"lifted_residual[{r['F']}]", r["max_z"], 4.0, r["pass"]) for r in reports]
    if cfg.model_name == "p1":
        sigma = float(cfg.model_params.get("sigma", 1.0))
        last = reports[1]["rows"][-1]
        exact = shift_expectation(battery[1], ens.paths[0][0], fam, last["t"], sigma)
        z = abs(exact - last["mean_F"]) / last["mean_F_se"]
        _dump({"F": battery[1].name, "t": last["t"], "closed_form": exact, "simulated": last["mean_F"],
               "se": last["mean_F_se"]}, out / "shift_oracle.json")
        rows.append(_row("gaussian_shift_oracle", z, 4.0, z <= 4.0))
    return rows


PIPELINES = {
    "simulate-nlfpk": run_simulate_nlfpk,
    "coupled": run_coupled,
    "lift-check": run_lift_check,
    "superposition-audit": run_superposition_audit,
    "simulate-snlfpk": run_simulate_snlfpk,
    "mgp-check": run_mgp_check,
    "lifted-check": run_lifted_check,
}


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def data_checksums(out):
    out = Path(out)
    return {str(p.relative_to(out)): sha256(p) for p in sorted(out.rglob("*"))
            if p.is_file() and p.name not in NON_DATA}


def run(cmd, cfg, out=None, **kwargs):
    """Execute a pipeline, write checks and manifest; returns ``(exit_status, rows)``."""
    cfg.validate()
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows = PIPELINES[cmd](cfg, out, **kwargs)
    if cfg.checks_battery == "none":
        rows = []  # artifacts only, no acceptance checks selected
    cfg.save(out / CONFIG_FILE)
    _dump(rows, out / CHECKS_FILE)
    manifest = {
        "tool": "fpklift",
        "version": __version__,
        "command": cmd,
        "config_hash": cfg.digest(),
        "seed_ledger": {"master_seed": cfg.solver_seed, "generator": "Philox",
                        "rule": "SeedSequence(seed, spawn_key=(role, index))",
                        "roles": {"init": _rng.INIT, "particle": _rng.PARTICLE, "common": _rng.COMMON,
                                  "data": _rng.DATA}},
        "threads": cfg.runtime_threads,
        "wall_clock_seconds": time.perf_counter() - start,
        "config_file": {CONFIG_FILE: sha256(out / CONFIG_FILE)},
        "files": data_checksums(out),
    }
    _dump(manifest, out / MANIFEST_FILE)
    return (0 if all(r["pass"] for r in rows) else 1), rows


def render_report(run_dir):
    """Text and JSON summaries of a run directory; deterministic given its files."""
    run_dir = Path(run_dir)
    missing = [f for f in (MANIFEST_FILE, CHECKS_FILE) if not (run_dir / f).exists()]
    if missing:
        raise FileNotFoundError(f"missing in {run_dir}: {', '.join(missing)}")
    manifest = json.loads((run_dir / MANIFEST_FILE).read_text())
    rows = json.loads((run_dir / CHECKS_FILE).read_text())
    summary = {
        "command": manifest.get("command"),
        "config_hash": manifest.get("config_hash"),
        "rows": rows,
        "n_rows": len(rows),
        "n_failed": sum(not r["pass"] for r in rows),
        "pass": all(r["pass"] for r in rows),
    }
    lines = [f"command: {summary['command']}", f"config:  {summary['config_hash']}",
             f"checks:  {summary['n_rows']} ({summary['n_failed']} failed)", ""]
    width = max([len(r["name"]) for r in rows] + [4])
    lines.append(f"{'name'.ljust(width)}  {'kind':16}  {'value':>14}  {'threshold':>14}  result")
    for r in rows:
        lines.append(f"{r['name'].ljust(width)}  {r['kind']:16}  {_fmt(r['value']):>14}  "
                     f"{_fmt(r['threshold']):>14}  {'PASS' if r['pass'] else 'FAIL'}")
    lines += ["", f"overall: {'PASS' if summary['pass'] else 'FAIL'}"]
    text = "\n".join(lines) + "\n"
    (run_dir / "summary.txt").write_text(text)
    _dump(summary, run_dir / "summary.json")
    return text, summary


def _fmt(v):
    if isinstance(v, bool) or not isinstance(v, float):
        return str(v)
    return f"{v:.6g}"

