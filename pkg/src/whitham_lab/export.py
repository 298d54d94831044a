"""Plain-text persistence: per-snapshot CSVs and JSON manifests."""
import json
import os

import numpy as np

from .field_core import RealField
from .wme import trajectory_energy


def _dump(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def grid_dict(grid):
    return {"length": grid.length, "points": grid.points, "origin": grid.origin}


def export_trajectory(traj, directory, every=1, params=None):
    """One CSV per stored snapshot plus ``manifest.json`` with the energy series."""
    os.makedirs(directory, exist_ok=True)
    grid = traj.grid
    idx = list(range(0, traj.nsteps + 1, every))
    if idx[-1] != traj.nsteps:
        idx.append(traj.nsteps)
    files = []
    for j in idx:
        for name, values in zip(traj.names, traj.values[j]):
            fname = f"{name}_{j:06d}.csv"
            RealField(grid, values).to_csv(os.path.join(directory, fname))
            files.append(fname)
    manifest = {
        "grid": grid_dict(grid),
        "k": traj.k,
        "dt": traj.dt,
        "times": [float(traj.times[j]) for j in idx],
        "files": files,
        "parameters": params or {},
    }
    if traj.names == ("r", "u"):
        manifest["energy"] = [float(e) for e in trajectory_energy(traj)[idx]]
    _dump(os.path.join(directory, "manifest.json"), manifest)
    return manifest


def export_residuals(res, directory, every=1):
    """Residual time series (both routes) as ``residuals_eps*.csv``."""
    os.makedirs(directory, exist_ok=True)
    idx = slice(None, None, every)
    cols = np.column_stack([res.times[idx], res.norms["defect"][idx], res.norms["formula"][idx]])
    path = os.path.join(directory, f"residuals_eps{res.eps!r}.csv")
    np.savetxt(path, cols, delimiter=",", header="T,res_H1_defect,res_H1_formula",
               comments="", fmt="%.17g")
    return path


def export_hierarchy_manifest(manifest, directory):
    os.makedirs(directory, exist_ok=True)
    _dump(os.path.join(directory, "hierarchy.json"), manifest)


def export_w_series(row, directory):
    """``T, ||W||_L2, ||W||_H1, ||W1||, ||W2||, validity_energy`` for one table row."""
    os.makedirs(directory, exist_ok=True)
    s = row.series
    cols = np.column_stack([s["T"], s["W_L2"], s["W_H1"], s["W1_L2"], s["W2_L2"],
                            s["validity_energy"]])
    path = os.path.join(directory, f"W_eps{row.eps!r}.csv")
    np.savetxt(path, cols, delimiter=",", header="T,W_L2,W_H1,W1_L2,W2_L2,validity_energy",
               comments="", fmt="%.17g")
    return path


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    _dump(path, payload)
