"""Serialization of fields, histories, and measurement sets.

All files are self-describing (CSV header row or PGM magic) and
round-trip bit-exactly; floats are written with 17 significant digits.
"""

import csv

import numpy as np

from .forward import ExperimentSet

HISTORY_HEADER = ["iter", "stage", "misfit", "err_a", "err_c", "step_a", "step_c"]
MEASUREMENT_HEADER = ["m", "node_index", "arc_position", "g", "h"]


def _fmt(x):
    return format(float(x), ".17g")


def write_field_grid(mesh, field, path):
    """Write a nodal field as a numeric grid, one constant-y row per line."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise ValueError(f"field must have one value per node, got {field.shape}")
    grid = field.reshape(mesh.ny, mesh.nx)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# rows={mesh.ny} cols={mesh.nx} order=row-major\n")
            for row in grid:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write field grid to {path}: {exc}") from exc


def read_field_grid(path):
    """Read a field grid back into a flat nodal array."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows, dtype=float).ravel()


def write_history(history, path):
    """Write iteration records as CSV with the pinned header."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_HEADER)
            for rec in history:
                writer.writerow([
                    rec.iter, rec.stage, _fmt(rec.misfit),
                    "" if rec.err_a is None else _fmt(rec.err_a),
                    "" if rec.err_c is None else _fmt(rec.err_c),
                    _fmt(rec.step_a), _fmt(rec.step_c),
                ])
    except OSError as exc:
        raise OSError(f"cannot write history to {path}: {exc}") from exc


def read_history(path):
    """Read a history CSV into a list of plain dicts."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != HISTORY_HEADER:
            raise ValueError(f"unexpected history header in {path}: {reader.fieldnames}")
        for row in reader:
            out.append({
                "iter": int(row["iter"]),
                "stage": row["stage"],
                "misfit": float(row["misfit"]),
                "err_a": float(row["err_a"]) if row["err_a"] else None,
                "err_c": float(row["err_c"]) if row["err_c"] else None,
                "step_a": float(row["step_a"]),
                "step_c": float(row["step_c"]),
            })
    return out


def write_pgm(mesh, field, path):
    """Write a nodal field as an 8-bit ASCII PGM, linearly scaled."""
    field = np.asarray(field, dtype=float)
    grid = field.reshape(mesh.ny, mesh.nx)[::-1]  # image rows top-down
    lo, hi = float(grid.min()), float(grid.max())
    if hi > lo:
        pix = np.rint((grid - lo) / (hi - lo) * 255.0).astype(int)
    else:
        pix = np.zeros_like(grid, dtype=int)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"P2\n{mesh.nx} {mesh.ny}\n255\n")
            for row in pix:
                fh.write(" ".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write PGM to {path}: {exc}") from exc


def write_measurements(mesh, experiments, path):
    """Write an experiment set as measurement CSV (one row per boundary
    node per experiment)."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MEASUREMENT_HEADER)
            for m, (g, h) in enumerate(zip(experiments.excitations,
                                           experiments.measurements), start=1):
                for k, node in enumerate(mesh.boundary_nodes):
                    writer.writerow([m, int(node),
                                     _fmt(mesh.arc_positions[k]),
                                     _fmt(g[k]), _fmt(h[k])])
    except OSError as exc:
        raise OSError(f"cannot write measurements to {path}: {exc}") from exc


def read_measurements(mesh, path):
    """Read a measurement CSV back into an ExperimentSet for this mesh."""
    per_m = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MEASUREMENT_HEADER:
            raise ValueError(f"unexpected measurement header in {path}: "
                             f"{reader.fieldnames}")
        for row in reader:
            m = int(row["m"])
            per_m.setdefault(m, []).append(
                (int(row["node_index"]), float(row["g"]), float(row["h"])))
    nb = len(mesh.boundary_nodes)
    excitations, measurements = [], []
    for m in sorted(per_m):
        rows = per_m[m]
        if len(rows) != nb:
            raise ValueError(
                f"experiment {m} has {len(rows)} rows, expected {nb}")
        nodes = np.asarray([r[0] for r in rows])
        if not np.array_equal(nodes, mesh.boundary_nodes):
            raise ValueError(
                f"experiment {m} node ordering does not match the mesh boundary")
        excitations.append(np.asarray([r[1] for r in rows]))
        measurements.append(np.asarray([r[2] for r in rows]))
    return ExperimentSet(excitations=excitations, measurements=measurements,
                         delta=0.0)
