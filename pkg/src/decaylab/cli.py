"""Command-line entry points: simulate, audit, rates, sweep, report.

Exit codes: 0 success, 1 sweep finished with failed children, 2 invalid
configuration or arguments, 3 solver failure, 4 missing run artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from . import analysis, diagnostics, nullgeom, solver
from .core import (
    ConfigError,
    InitialDataSpec,
    build_grid,
    domain_radius,
    table_from_arrays,
    validate_params,
)
from .solver import SolverError


class MissingArtifact(RuntimeError):
    """A required run artifact (snapshot, CSV) is absent."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "scheme": "sv",
    "dx": 0.01,
    "cfl": 0.5,
    "t_end": 200.0,
    "pad": None,
    "gamma": 1.0,
    "R": 1.0,
    "nonlinearity_enabled": True,
}


@dataclass
class RunConfig:
    raw: dict
    params: object
    mp: object
    spec: object
    scheme: object
    dx: float
    cfl: float
    t_end: float
    pad: float
    every_n_steps: int
    snap_every: int
    offsets: tuple
    interior_offsets: tuple
    out_dir: str
    config_hash: str


def _normalize(raw):
    """Apply defaults and flatten types so hashing is stable."""
    cfg = dict(_DEFAULTS)
    cfg.update({k: v for k, v in raw.items() if not isinstance(v, dict)})
    initial = dict(raw.get("initial") or {})
    initial.setdefault("kind", "gaussian")
    diag = dict(raw.get("diagnostics") or {})
    snap = dict(raw.get("snapshot") or {})
    chars = dict(raw.get("characteristics") or {})
    norm = {
        "p": cfg.get("p"),
        "alpha": cfg.get("alpha"),
        "beta": cfg.get("beta"),
        "gamma": cfg["gamma"],
        "R": cfg["R"],
        "scheme": cfg["scheme"],
        "newton_tol": float(cfg.get("newton_tol", 1e-12)),
        "newton_max_iter": int(cfg.get("newton_max_iter", 50)),
        "nonlinearity_enabled": bool(cfg["nonlinearity_enabled"]),
        "dx": float(cfg["dx"]),
        "cfl": float(cfg["cfl"]),
        "t_end": float(cfg["t_end"]),
        "pad": None if cfg["pad"] is None else float(cfg["pad"]),
        "initial": initial,
        "diagnostics": {"every_n_steps": int(diag.get("every_n_steps", 10))},
        "snapshot": {"every_n_steps": int(snap.get("every_n_steps", 2000))},
        "characteristics": {
            "offsets": list(chars.get("offsets", [0.0, 1.0, 5.0])),
            "interior_offsets": list(chars.get("interior_offsets", [])),
        },
    }
    return norm


def _hash_config(norm):
    blob = json.dumps(norm, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _build_spec(initial):
    kw = dict(initial)
    kind = kw.pop("kind", "gaussian")
    table = kw.pop("table", None)
    if table is not None:
        rows = np.asarray(table, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise ConfigError("initial.table must be rows of [x, phi0, phi1]")
        table = table_from_arrays(rows[:, 0], rows[:, 1], rows[:, 2])
    known = {"amplitude", "width", "center", "velocity", "seed"}
    unknown = set(kw) - known
    if unknown:
        raise ConfigError(f"unknown initial-data keys: {sorted(unknown)}")
    return InitialDataSpec(kind=kind, table=table, **kw)


def load_config(source, out_override=None):
    """Parse a YAML mapping (path or dict) into a resolved RunConfig."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        with open(source) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: configuration must be a mapping")
    norm = _normalize(raw)
    params, mp = validate_params(norm)
    spec = _build_spec(norm["initial"])
    scheme = solver.SchemeChoice(
        kind=norm["scheme"],
        newton_tol=norm["newton_tol"],
        newton_max_iter=norm["newton_max_iter"],
    )
    every = norm["diagnostics"]["every_n_steps"]
    snap_every = norm["snapshot"]["every_n_steps"]
    if every < 1:
        raise ConfigError("diagnostics.every_n_steps must be at least 1")
    if snap_every < 1:
        raise ConfigError("snapshot.every_n_steps must be at least 1")
    if snap_every % every:
        raise ConfigError(
            "snapshot.every_n_steps must be a multiple of "
            "diagnostics.every_n_steps so resumed runs align"
        )
    out_dir = out_override or (raw.get("output") or {}).get("dir")
    config_hash = _hash_config(norm)
    if out_dir is None:
        out_dir = os.path.join("runs", config_hash)
    return RunConfig(
        raw=norm,
        params=params,
        mp=mp,
        spec=spec,
        scheme=scheme,
        dx=norm["dx"],
        cfl=norm["cfl"],
        t_end=norm["t_end"],
        pad=norm["pad"],
        every_n_steps=every,
        snap_every=snap_every,
        offsets=tuple(float(a) for a in norm["characteristics"]["offsets"]),
        interior_offsets=tuple(
            float(a) for a in norm["characteristics"]["interior_offsets"]
        ),
        out_dir=out_dir,
        config_hash=config_hash,
    )


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _snapshot_path(out_dir, step_index):
    return os.path.join(out_dir, f"snapshot_{step_index:08d}.csv")


def _latest_snapshot(out_dir):
    names = sorted(
        n for n in os.listdir(out_dir)
        if n.startswith("snapshot_") and n.endswith(".csv")
    )
    return os.path.join(out_dir, names[-1]) if names else None


def _trace_filename(trace):
    return f"trace_{trace.direction}_a{trace.a:g}.csv"


def _update_summary(out_dir, section, payload):
    path = os.path.join(out_dir, "summary.json")
    summary = {}
    if os.path.exists(path):
        with open(path) as fh:
            summary = json.load(fh)
    summary[section] = payload
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return summary


def simulate(cfg, resume=False):
    """Run to t_end, writing diagnostics, traces, snapshots, and a summary
    into cfg.out_dir.  Deterministic: repeated invocations produce
    hash-equal artifacts, and resuming reproduces an uninterrupted run."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    grid = build_grid(cfg.spec, cfg.t_end, cfg.dx, cfg.cfl, cfg.pad)

    traces = [
        nullgeom.CharacteristicTrace(a, d)
        for a in cfg.offsets
        for d in ("outgoing", "incoming")
    ]
    traces += [
        nullgeom.CharacteristicTrace(a, "interior_outgoing")
        for a in cfg.interior_offsets
    ]

    rows = []
    start_state = None
    morawetz_cum = 0.0
    diag_path = os.path.join(cfg.out_dir, "diagnostics.csv")
    if resume:
        snap = _latest_snapshot(cfg.out_dir)
        if snap is None:
            raise MissingArtifact(f"no snapshots to resume from in {cfg.out_dir}")
        start_state, stored_hash = solver.read_snapshot(snap)
        if stored_hash and stored_hash != cfg.config_hash:
            raise ConfigError(
                f"snapshot belongs to config {stored_hash}, not {cfg.config_hash}"
            )
        if os.path.exists(diag_path):
            rows = [
                r
                for r in diagnostics.read_diagnostics_csv(diag_path)
                if r.t <= start_state.grid.t + 1e-12
            ]
        if rows:
            morawetz_cum = rows[-1].morawetz_cum
        for tr in traces:
            path = os.path.join(cfg.out_dir, _trace_filename(tr))
            if os.path.exists(path):
                loaded = nullgeom.CharacteristicTrace.read_csv(path)
                loaded.truncate_after(start_state.grid.t - 0.5 * grid.dt)
                tr._t, tr._phi, tr._dphi = loaded._t, loaded._phi, loaded._dphi
    else:
        with open(os.path.join(cfg.out_dir, "config.yaml"), "w") as fh:
            yaml.safe_dump(cfg.raw, fh, sort_keys=True)

    e0 = diagnostics.weighted_initial_energy(cfg.spec, grid, 0.0, cfg.params)
    e1 = diagnostics.weighted_initial_energy(cfg.spec, grid, 1.0, cfg.params)
    eg = diagnostics.weighted_initial_energy(cfg.spec, grid, cfg.mp.gamma, cfg.params)

    final_state = None
    for state, frame, row in solver.run(
        cfg.spec,
        cfg.params,
        cfg.mp,
        cfg.scheme,
        grid,
        cfg.t_end,
        every_n_steps=cfg.every_n_steps,
        start_state=start_state,
        morawetz_cum=morawetz_cum,
    ):
        for tr in traces:
            tr.update(frame)
        if row is not None:
            rows.append(row)
        k = state.grid.step_index
        if k % cfg.snap_every == 0:
            solver.write_snapshot(
                _snapshot_path(cfg.out_dir, k), state, cfg.config_hash
            )
        final_state = state
    solver.write_snapshot(
        _snapshot_path(cfg.out_dir, final_state.grid.step_index),
        final_state,
        cfg.config_hash,
    )

    diagnostics.write_diagnostics_csv(diag_path, rows, cfg.config_hash)
    flux = {}
    for tr in traces:
        tr.write_csv(os.path.join(cfg.out_dir, _trace_filename(tr)))
        key = f"{tr.direction}_a{tr.a:g}"
        if tr.direction == "interior_outgoing":
            rep = diagnostics.interior_flux(tr, cfg.params, cfg.mp)
            flux[key] = {
                "grad_part": rep.grad_part,
                "potential_part": rep.potential_part,
                "total": rep.total,
            }
        else:
            weighted = diagnostics.null_flux_exterior(tr, cfg.params, e1, "weighted")
            energy = diagnostics.null_flux_exterior(
                tr, cfg.params, 0.5 * e0, "energy"
            )
            flux[key] = {
                "weighted_value": weighted.value,
                "weighted_bound": weighted.bound,
                "weighted_ok": weighted.satisfied,
                "energy_value": energy.value,
                "energy_bound": energy.bound,
                "energy_ok": energy.satisfied,
            }

    last = rows[-1]
    _update_summary(
        cfg.out_dir,
        "run",
        {
            "config_hash": cfg.config_hash,
            "E0": e0,
            "E1": e1,
            "E_gamma": eg,
            "gamma": cfg.mp.gamma,
            "final": last.__dict__,
            "flux": flux,
            "flux_bounds_ok": all(
                v.get("weighted_ok", True) and v.get("energy_ok", True)
                for v in flux.values()
            ),
        },
    )
    return 0


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def _audit_regions(cfg, grid):
    """Default audit regions sized to the configured data and horizon."""
    T = min(4.0, cfg.t_end)
    if T < 1.0:
        raise ConfigError("audits need t_end of at least 1")
    half = -grid.x_min
    d0 = domain_radius(cfg.spec)
    rect_x = min(d0 + T + 1.0, half - 1.0)
    boost_b = min(1.0 + 2.0 * T, half - 1.0)
    return {
        "dt": nullgeom.RegionSpec(kind="rect", T=T, x1=-rect_x, x2=rect_x),
        "scaling": nullgeom.RegionSpec(kind="sigma", R=cfg.mp.R, T=T),
        "boost": nullgeom.RegionSpec(kind="exterior_D", a=1.0, b=boost_b),
        "morawetz": nullgeom.RegionSpec(kind="sigma", R=1.0, T=T),
        "interior": nullgeom.RegionSpec(kind="interior_R", a=0.75 * T, b=1.25 * T),
    }


def _collect_audit_histories(cfg, dx, t_hi, ident_window):
    grid = build_grid(cfg.spec, t_hi, dx, cfg.cfl, cfg.pad)
    bulk = diagnostics.HistoryCollector(grid, 0.0, t_hi, cadence=2)
    ident = diagnostics.HistoryCollector(
        grid, ident_window[0], ident_window[1], cadence=2
    )
    phi0, phi1 = solver.evaluate_initial(cfg.spec, grid.x)
    state = solver.init_state(phi0, phi1, cfg.params, grid)
    n_steps = int(round(t_hi / grid.dt))
    k = 0
    for _, fr in solver.state_frames(state, cfg.params, cfg.scheme, n_steps):
        bulk.update(fr, k)
        ident.update(fr, k)
        k += 1
    return grid, bulk.history(), ident.history()


def audit(cfg, run_dir, multipliers=None, dx_refine=False):
    """Re-run deterministically from the stored configuration and close the
    multiplier identities over their regions; optionally repeat at dx/2 to
    report residual ratios."""
    multipliers = list(multipliers or diagnostics.MULTIPLIERS)
    for m in multipliers:
        if m not in diagnostics.MULTIPLIERS:
            raise ConfigError(
                f"unknown multiplier {m!r}; choose from {diagnostics.MULTIPLIERS}"
            )
    T = min(4.0, cfg.t_end)
    ident_window = (0.25 * T, 0.75 * T)
    dxs = [cfg.dx] + ([0.5 * cfg.dx] if dx_refine else [])
    results = {m: {} for m in multipliers}
    identities = {i: {} for i in diagnostics.IDENTITIES}
    for dx in dxs:
        grid, bulk_hist, ident_hist = _collect_audit_histories(
            cfg, dx, T, ident_window
        )
        regions = _audit_regions(cfg, grid)
        for m in multipliers:
            rep = diagnostics.multiplier_flux_audit(
                bulk_hist, m, regions[m], cfg.params, cfg.mp
            )
            results[m][dx] = rep
        for ident in diagnostics.IDENTITIES:
            identities[ident][dx] = diagnostics.pointwise_identity_residual(
                ident_hist, ident, cfg.params, cfg.mp
            )

    payload = {"multipliers": {}, "identities": {}, "dx_levels": dxs}
    for m in multipliers:
        entry = {}
        for dx, rep in results[m].items():
            entry[f"dx_{dx:g}"] = {
                "residual": rep.residual,
                "bulk_source": rep.bulk_source,
                "boundary_total": rep.boundary_total,
                "segments": rep.segment_fluxes,
                "region": rep.region.kind,
            }
        if dx_refine:
            coarse, fine = results[m][dxs[0]], results[m][dxs[1]]
            entry["ratio"] = (
                coarse.residual / fine.residual if fine.residual > 0 else np.inf
            )
        payload["multipliers"][m] = entry
    for ident, per_dx in identities.items():
        entry = {f"dx_{dx:g}": res for dx, res in per_dx.items()}
        if dx_refine:
            coarse, fine = per_dx[dxs[0]], per_dx[dxs[1]]
            entry["ratio"] = coarse / fine if fine > 0 else np.inf
        payload["identities"][ident] = entry

    with open(os.path.join(run_dir, "audit_report.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    _update_summary(run_dir, "audit", payload)
    return 0


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def rates(cfg, run_dir):
    """Fit decay rates from the stored diagnostics and evaluate weighted
    sups from the stored snapshots."""
    diag_path = os.path.join(run_dir, "diagnostics.csv")
    if not os.path.exists(diag_path):
        raise MissingArtifact(f"{diag_path} not found")
    rows = diagnostics.read_diagnostics_csv(diag_path)
    if not rows:
        raise MissingArtifact(f"{diag_path} holds no diagnostics rows")
    t = np.array([r.t for r in rows])
    linf = np.array([r.linf for r in rows])
    pot = np.array([r.potential for r in rows])
    t_hi = float(t[-1])
    window = (10.0, t_hi)
    if t_hi <= window[0] or int(np.sum((t >= 10.0))) < 20:
        raise MissingArtifact(
            f"diagnostics cover t <= {t_hi}; the fit window needs 20 points past t = 10"
        )
    exps = analysis.exponent_catalog(cfg.params, cfg.mp)
    fit_linf = analysis.fit_loglog(t, linf, window, exps.uniform)
    fit_pot = analysis.fit_loglog(t, pot, window, 0.0)

    snaps = []
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("snapshot_") and name.endswith(".csv"):
            state, _ = solver.read_snapshot(os.path.join(run_dir, name))
            snaps.append((state.grid.t, state.grid.x, state.phi_curr))
    if not snaps:
        raise MissingArtifact(f"no snapshots in {run_dir}")
    ext_sup, int_sup = analysis.weighted_sup_bounds(snaps, exps)

    payload = {
        "exponents": {
            "exterior": exps.exterior_pair,
            "interior_t": exps.interior_t,
            "interior_x": exps.interior_x,
            "uniform": exps.uniform,
            "beta_half_consistent": exps.beta_half_consistent,
            "symmetric_consistent": exps.symmetric_consistent,
        },
        "fits": {
            "linf": fit_linf.__dict__,
            "potential": fit_pot.__dict__,
        },
        "weighted_sups": {"exterior": ext_sup, "interior": int_sup},
        "verdicts": {
            "uniform_decay": fit_linf.margin <= 0.05,
            "sups_finite": bool(np.isfinite(ext_sup) and np.isfinite(int_sup)),
        },
    }
    with open(os.path.join(run_dir, "rates.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    _update_summary(run_dir, "rates", payload)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def sweep(source, out_override=None):
    """Run the cartesian product of sweep lists as independent children and
    fold their summaries into one aggregate table keyed by config hash."""
    with open(source) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: sweep configuration must be a mapping")
    sweep_cfg = raw.pop("sweep", {}) or {}
    out_root = out_override or (raw.get("output") or {}).get("dir") or "sweep_out"
    p_values = sweep_cfg.get("p_values") or [raw.get("p")]
    alpha_values = sweep_cfg.get("alpha_values") or [raw.get("alpha")]
    beta_values = sweep_cfg.get("beta_values") or [raw.get("beta")]
    families = sweep_cfg.get("families") or [raw.get("initial") or {}]
    if not p_values or p_values == [None]:
        raise ConfigError("sweep needs p or sweep.p_values")

    children = []
    seen = set()
    failures = 0
    for p, alpha, beta, family in itertools.product(
        p_values, alpha_values, beta_values, families
    ):
        child_raw = dict(raw)
        child_raw["p"] = p
        child_raw["alpha"] = alpha
        child_raw["beta"] = beta
        child_raw["initial"] = dict(family)
        child_raw.pop("output", None)
        try:
            cfg = load_config(child_raw, out_override="unused")
        except ConfigError as exc:
            print(f"sweep child invalid (p={p}): {exc}", file=sys.stderr)
            failures += 1
            continue
        if cfg.config_hash in seen:
            continue
        seen.add(cfg.config_hash)
        child_dir = os.path.join(out_root, "children", cfg.config_hash)
        cfg.out_dir = child_dir
        children.append((cfg, family))

    records = []
    for cfg, family in children:
        try:
            simulate(cfg)
            rates(cfg, cfg.out_dir)
            with open(os.path.join(cfg.out_dir, "summary.json")) as fh:
                summary = json.load(fh)
            fit = summary["rates"]["fits"]["linf"]
            sups = summary["rates"]["weighted_sups"]
            records.append(
                {
                    "config_hash": cfg.config_hash,
                    "p": cfg.params.p,
                    "alpha": cfg.mp.alpha,
                    "beta": cfg.mp.beta,
                    "family": family.get("kind", "gaussian"),
                    "uniform_exponent": summary["rates"]["exponents"]["uniform"],
                    "slope_linf": fit["slope"],
                    "margin": fit["margin"],
                    "r_squared": fit["r_squared"],
                    "exterior_sup": sups["exterior"],
                    "interior_sup": sups["interior"],
                    "uniform_decay_ok": summary["rates"]["verdicts"]["uniform_decay"],
                    "status": "ok",
                }
            )
        except (ConfigError, SolverError, MissingArtifact, OSError) as exc:
            print(
                f"sweep child {cfg.config_hash} failed: {exc}", file=sys.stderr
            )
            failures += 1
            records.append(
                {
                    "config_hash": cfg.config_hash,
                    "p": cfg.params.p,
                    "alpha": cfg.mp.alpha,
                    "beta": cfg.mp.beta,
                    "family": family.get("kind", "gaussian"),
                    "status": "failed",
                }
            )

    records.sort(key=lambda r: r["config_hash"])
    columns = [
        "config_hash", "p", "alpha", "beta", "family", "uniform_exponent",
        "slope_linf", "margin", "r_squared", "exterior_sup", "interior_sup",
        "uniform_decay_ok", "status",
    ]
    os.makedirs(out_root, exist_ok=True)
    with open(os.path.join(out_root, "aggregate.csv"), "w") as fh:
        fh.write(",".join(columns) + "\n")
        for rec in records:
            fh.write(
                ",".join(
                    repr(rec[c]) if isinstance(rec.get(c), float) else str(rec.get(c, ""))
                    for c in columns
                )
                + "\n"
            )
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def report(run_dir, plots=False):
    """Render a human-readable summary; optionally emit plot-data CSVs of
    t against the sup norm, the potential, and the accumulated cone
    integral."""
    summary_path = os.path.join(run_dir, "summary.json")
    diag_path = os.path.join(run_dir, "diagnostics.csv")
    if not os.path.exists(summary_path) or not os.path.exists(diag_path):
        raise MissingArtifact(f"{run_dir} lacks summary.json or diagnostics.csv")
    with open(summary_path) as fh:
        summary = json.load(fh)
    rows = diagnostics.read_diagnostics_csv(diag_path)
    lines = [f"run {run_dir}"]
    run_block = summary.get("run", {})
    lines.append(
        f"  config {run_block.get('config_hash', '?')}, "
        f"E0 = {run_block.get('E0', float('nan')):.6g}, "
        f"E1 = {run_block.get('E1', float('nan')):.6g}"
    )
    if rows:
        first, last = rows[0], rows[-1]
        lines.append(
            f"  t in [{first.t:g}, {last.t:g}]; E0_norm drift "
            f"{abs(last.E0_norm - first.E0_norm) / max(first.E0_norm, 1e-30):.3e}"
        )
        lines.append(
            f"  linf {first.linf:.4g} -> {last.linf:.4g}; potential "
            f"{first.potential:.4g} -> {last.potential:.4g}; "
            f"morawetz_cum {last.morawetz_cum:.6g}"
        )
    if run_block.get("flux"):
        ok = run_block.get("flux_bounds_ok")
        lines.append(f"  flux bounds satisfied: {ok}")
    if "rates" in summary:
        fit = summary["rates"]["fits"]["linf"]
        lines.append(
            f"  linf slope {fit['slope']:.4f} vs -{fit['compared_exponent']:.4f} "
            f"(margin {fit['margin']:+.4f}, r2 {fit['r_squared']:.3f})"
        )
        sups = summary["rates"]["weighted_sups"]
        lines.append(
            f"  weighted sups: exterior {sups['exterior']:.4g}, "
            f"interior {sups['interior']:.4g}"
        )
    if "audit" in summary:
        for m, entry in sorted(summary["audit"]["multipliers"].items()):
            keys = [k for k in entry if k.startswith("dx_")]
            res = ", ".join(f"{k[3:]}: {entry[k]['residual']:.3e}" for k in sorted(keys))
            ratio = entry.get("ratio")
            suffix = f", ratio {ratio:.2f}" if ratio is not None else ""
            lines.append(f"  audit {m}: residual {res}{suffix}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    with open(os.path.join(run_dir, "report.txt"), "w") as fh:
        fh.write(text)
    if plots and rows:
        series = {
            "plot_linf.csv": [(r.t, r.linf) for r in rows],
            "plot_potential.csv": [(r.t, r.potential) for r in rows],
            "plot_morawetz.csv": [(r.t, r.morawetz_cum) for r in rows],
        }
        for name, pairs in series.items():
            with open(os.path.join(run_dir, name), "w") as fh:
                fh.write("t,value\n")
                for t, v in pairs:
                    fh.write(f"{t!r},{v!r}\n")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _load_run_dir_config(run_dir):
    cfg_path = os.path.join(run_dir, "config.yaml")
    if not os.path.isdir(run_dir) or not os.path.exists(cfg_path):
        raise MissingArtifact(f"{run_dir} is not a run directory (no config.yaml)")
    return load_config(cfg_path, out_override=run_dir)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="decaylab",
        description="Energy-conserving defocusing wave solver with decay "
        "and flux audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a simulation to t_end")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--resume", action="store_true")
    p_sim.add_argument(
        "--dx-refine",
        action="store_true",
        help="also run the dx/2 twin into <out>/refined",
    )

    p_aud = sub.add_parser("audit", help="close multiplier identities on regions")
    p_aud.add_argument("--run", required=True)
    p_aud.add_argument("--multipliers", default=None,
                       help="comma-separated subset of: " + ",".join(diagnostics.MULTIPLIERS))
    p_aud.add_argument("--dx-refine", action="store_true")

    p_rat = sub.add_parser("rates", help="fit decay rates and weighted sups")
    p_rat.add_argument("--run", required=True)

    p_swp = sub.add_parser("sweep", help="run a parameter sweep")
    p_swp.add_argument("--config", required=True)
    p_swp.add_argument("--out", default=None)

    p_rep = sub.add_parser("report", help="render a run summary")
    p_rep.add_argument("--run", required=True)
    p_rep.add_argument("--plots", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = load_config(args.config, out_override=args.out)
            code = simulate(cfg, resume=args.resume)
            if code == 0 and args.dx_refine:
                refined = load_config(
                    {**cfg.raw, "dx": 0.5 * cfg.dx},
                    out_override=os.path.join(cfg.out_dir, "refined"),
                )
                code = simulate(refined)
            return code
        if args.command == "audit":
            cfg = _load_run_dir_config(args.run)
            snaps = _latest_snapshot(args.run)
            if snaps is None:
                raise MissingArtifact(f"no snapshots in {args.run}")
            mults = (
                [m.strip() for m in args.multipliers.split(",") if m.strip()]
                if args.multipliers
                else None
            )
            return audit(cfg, args.run, mults, dx_refine=args.dx_refine)
        if args.command == "rates":
            cfg = _load_run_dir_config(args.run)
            return rates(cfg, args.run)
        if args.command == "sweep":
            return sweep(args.config, out_override=args.out)
        if args.command == "report":
            return report(args.run, plots=args.plots)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
