"""Run schemes over snapshots and write JSON reports and sweep tables."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, to_dict
from .decentral import make_clusters, run_decentralized
from .dual_bound import dual_minimize
from .icic import altruistic, egoistic, sca_solve, terrestrial_icic
from .scenario import build_scenario

CSV_SCHEMA_VERSION = 1
SWEEP_AXES = {
    "pmax": "uav.p_max_dbm",
    "num_ues": "ues.num_ues",
    "altitude": "uav.height",
    "beamwidth": "uav.antenna.half_beamwidth_deg",
}
SWEEP_COLUMNS = (
    "schema_version", "axis", "value", "scheme", "snapshots",
    "uav_rate", "ground_rate", "weighted", "weighted_halfwidth", "bound", "gap",
)
REGION_COLUMNS = ("schema_version", "mu_u", "mu_g", "scheme", "snapshots", "uav_rate", "ground_rate")


class NumericalFailure(RuntimeError):
    """A solver failed on some snapshot."""


def run_snapshot(cfg: ScenarioConfig, snapshot: int) -> dict:
    """All requested schemes plus the dual bound on one snapshot."""
    sc = build_scenario(cfg, snapshot)
    chan, occ, w, P = sc.channel_state, sc.occupancy, sc.weights, sc.P_max
    s = cfg.solver
    out: dict = {"snapshot": snapshot, "blocked_ues": len(occ.blocked), "schemes": {}}
    try:
        for name in cfg.schemes:
            ledger = None
            if name == "egoistic":
                sol = egoistic(chan, occ, P, w)
            elif name == "altruistic":
                sol = altruistic(chan, occ, P, w)
            elif name == "terrestrial":
                sol = terrestrial_icic(chan, occ, sc.nsets, sc.q, P, w)
            elif name == "sca":
                sol = sca_solve(chan, occ, w, P, s.sca_epsilon, s.init_mode, s.sca_max_iters)
            else:
                part = make_clusters(sc.grid, s.cluster_size, chan.F_tilde)
                mode = "one_round" if name == "decentral_one_round" else "iterative"
                sol, ledger = run_decentralized(chan, occ, part, w, P, mode, s.decentral_epsilon, s.sca_max_iters)
            entry = {"rates": _rates(sol.rates), "denied": bool(sol.denied), "power": [float(v) for v in sol.power.p]}
            if sol.diagnostics is not None:
                entry["diagnostics"] = sol.diagnostics.as_dict()
            if ledger is not None:
                entry["ledger"] = ledger.as_dict()
            out["schemes"][name] = entry
        if s.bound:
            d = dual_minimize(chan, occ, w, P, epsilon=s.dual_epsilon)
            out["bound"] = {"value": float(d.g_value), "nu": float(d.nu_star), "evaluations": d.evaluations}
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise NumericalFailure(f"snapshot {snapshot}: {type(exc).__name__}: {exc}") from exc
    return out


def _rates(r) -> dict:
    d = r.as_dict()
    return {k: d[k] for k in ("uav_rate", "ground_rate", "ground_rate_no_uav", "weighted")}


def _mean_hw(values) -> tuple[float, float]:
    """Mean and 95% normal half-width from the standard error."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


def _snapshot_job(args):
    cfg, k = args
    return run_snapshot(cfg, k)


def run_scenario(cfg: ScenarioConfig, parallel: int = 1) -> dict:
    """Report for ``cfg.snapshots`` snapshots; identical for equal configs.

    ``parallel > 1`` spreads snapshots over worker processes.  Each snapshot
    seeds its own streams, so the report does not depend on ``parallel``.
    """
    jobs = [(cfg, k) for k in range(cfg.snapshots)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            snaps = list(ex.map(_snapshot_job, jobs))
    else:
        snaps = [_snapshot_job(j) for j in jobs]

    summary = {}
    for name in cfg.schemes:
        per = [s["schemes"][name]["rates"] for s in snaps]
        summary[name] = {}
        for key in ("uav_rate", "ground_rate", "weighted"):
            m, hw = _mean_hw([r[key] for r in per])
            summary[name][key] = {"mean": m, "halfwidth": hw}
    if cfg.solver.bound:
        m, hw = _mean_hw([s["bound"]["value"] for s in snaps])
        summary["bound"] = {"weighted": {"mean": m, "halfwidth": hw}}
    return {
        "version": __version__,
        "config": to_dict(cfg),
        "snapshots": snaps,
        "summary": summary,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_report(report: dict, out_dir: str | Path, name: str = "report.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(report_json(report))
    return path


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def sweep(cfg: ScenarioConfig, axis: str, values, snapshots: int | None = None, parallel: int = 1):
    """Mean rates per (axis value, scheme).  Returns ``(rows, reports)``.

    The numbers in ``rows`` are copied from the per-value reports so the
    table and the JSON agree exactly.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    diffs = np.diff(np.asarray(values, dtype=float))
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("values must be strictly monotone")
    rows, reports = [], []
    for v in values:
        v = int(v) if axis == "num_ues" else float(v)
        changes = {SWEEP_AXES[axis]: v}
        if snapshots is not None:
            changes["snapshots"] = snapshots
        sub = cfg.replace(**changes)
        rep = run_scenario(sub, parallel)
        reports.append(rep)
        summ = rep["summary"]
        bound = summ.get("bound", {}).get("weighted", {}).get("mean")
        for name in sub.schemes:
            s = summ[name]
            weighted = s["weighted"]["mean"]
            rows.append({
                "schema_version": CSV_SCHEMA_VERSION,
                "axis": axis,
                "value": v,
                "scheme": name,
                "snapshots": sub.snapshots,
                "uav_rate": s["uav_rate"]["mean"],
                "ground_rate": s["ground_rate"]["mean"],
                "weighted": weighted,
                "weighted_halfwidth": s["weighted"]["halfwidth"],
                "bound": "" if bound is None else bound,
                "gap": "" if bound is None else (bound - weighted) / bound,
            })
    return rows, reports


def sweep_csv(rows) -> str:
    return _csv_text(SWEEP_COLUMNS, rows)


def rate_region(cfg: ScenarioConfig, weight_ratios, snapshots: int | None = None, parallel: int = 1):
    """Mean (uav_rate, ground_rate) from SCA over ``mu_g / mu_u`` ratios.

    The two extremes ``mu_g = 0`` and ``mu_u = 0`` are always included, as
    are the egoistic and altruistic points.  Returns ``(rows, reports)``.
    """
    ratios = sorted(float(r) for r in weight_ratios)
    if any(r <= 0 for r in ratios):
        raise ValueError("weight ratios must be positive")
    weights = [(1.0, 0.0)] + [(1.0, r) if r <= 1 else (1.0 / r, 1.0) for r in ratios] + [(0.0, 1.0)]
    rows, reports = [], []
    schemes = ("sca", "egoistic", "altruistic")
    for mu_u, mu_g in weights:
        changes = {"weights.mu_u": mu_u, "weights.mu_g": mu_g, "schemes": list(schemes), "solver.bound": False}
        if snapshots is not None:
            changes["snapshots"] = snapshots
        sub = cfg.replace(**changes)
        rep = run_scenario(sub, parallel)
        reports.append(rep)
        for name in schemes:
            if name != "sca" and (mu_u, mu_g) != (1.0, 0.0):
                continue  # baselines do not depend on the weights
            s = rep["summary"][name]
            rows.append({
                "schema_version": CSV_SCHEMA_VERSION,
                "mu_u": mu_u,
                "mu_g": mu_g,
                "scheme": name,
                "snapshots": sub.snapshots,
                "uav_rate": s["uav_rate"]["mean"],
                "ground_rate": s["ground_rate"]["mean"],
            })
    return rows, reports


def region_csv(rows) -> str:
    return _csv_text(REGION_COLUMNS, rows)
