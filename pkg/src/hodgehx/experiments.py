"""Experiment drivers behind the command line: tables and exports.

Every table is a CSV file whose leading ``#`` lines record the
configuration, followed by a header row and one row per mesh level.  Wall
times are deliberately left out so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fespace as fs
from .harmonic import assemble_hodge_saddle, compute_harmonic_basis, harmonic_residuals
from .krylov import DEFAULT_SEED, pcg
from .mesh import initial_mesh, quality, refine, write_mesh, write_vtk
from .precond import build_block_hodge, build_hx

PROBLEMS = ("curl", "div", "harmonic", "convergence")
FAMILY_OF = {"curl": "N0", "div": "RT0"}


@dataclass
class ExperimentConfig:
    surface: str = "torus"
    levels: int = 3
    problem: str = "curl"
    c: float = 1.0
    inner: str | None = None
    tol: float = 1e-6
    seed: int = DEFAULT_SEED
    output_dir: str = "results"
    first_level: int | None = None
    maxit: int = 500
    families: tuple[str, ...] = field(default=("N0", "RT0"))

    def __post_init__(self):
        if self.surface not in ("torus", "s3"):
            raise ValueError(f"surface must be torus or s3, got {self.surface!r}")
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.problem in ("curl", "div", "convergence") and not self.c > 0:
            raise ValueError("c must be positive")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.problem == "harmonic" and self.surface != "torus":
            raise ValueError("the harmonic experiment runs on the torus")
        if self.inner is None:
            self.inner = "direct" if self.surface == "torus" else "amg"
        if self.first_level is None:
            # S^3 tables start at the once-refined mesh (128 elements)
            self.first_level = 0 if self.surface == "torus" else 1

    def provenance(self) -> str:
        items = asdict(self)
        items.pop("output_dir")
        if self.problem != "convergence":
            items.pop("families")
        else:
            items["families"] = "+".join(self.families)
        return ",".join(f"{k}={v}" for k, v in items.items())


def meshes(config: ExperimentConfig):
    """Yield ``(level, mesh)`` for the configured levels."""
    mesh, surface = initial_mesh(config.surface)
    for level in range(config.first_level + config.levels):
        if level:
            mesh = refine(mesh, surface)
        if level >= config.first_level:
            yield level, mesh, surface


# ------------------------------------------------------------ manufactured data
def sphere_gradient_field(points: np.ndarray) -> np.ndarray:
    """``u = grad_S phi`` with ``phi = sum x_i`` at the closest points on S^3."""
    x = points / np.linalg.norm(points, axis=1, keepdims=True)
    return 1.0 - x.sum(axis=1, keepdims=True) * x


def check_manufactured_identities(n_points: int = 8, h: float = 1e-3, seed: int = 0) -> dict:
    """Finite-difference check of ``Lap_S x_i = -3 x_i`` and ``curl grad_S phi = 0``.

    Uses the degree-0 homogeneous extension ``f(x / |x|)``, whose ambient
    Laplacian and Jacobian on the unit sphere are the surface ones.
    Returns the maximal deviations.
    """
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((n_points, 4))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    eye = np.eye(4)

    def phi(x):
        return (x / np.linalg.norm(x, axis=-1, keepdims=True)).sum(axis=-1)

    lap = sum((phi(p + h * e) - 2 * phi(p) + phi(p - h * e)) / h**2 for e in eye)
    lap_err = np.max(np.abs(lap + 3.0 * phi(p)))
    def grad_ext(x):
        # ambient gradient of phi(x / |x|); equals u on the sphere
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return sphere_gradient_field(x) / r

    jac = np.stack([(grad_ext(p + h * e) - grad_ext(p - h * e)) / (2 * h) for e in eye], axis=1)
    # curl of a gradient: antisymmetric part of the Jacobian vanishes
    curl_err = np.max(np.abs(jac - np.swapaxes(jac, 1, 2)))
    grad_err = np.max(np.abs(grad_ext(p) - sphere_gradient_field(p)))
    return {"laplacian": float(lap_err), "curl": float(curl_err), "gradient": float(grad_err)}


def torus_rhs(points, normals):
    g = np.ones(3)
    return g - (normals @ g)[:, None] * normals


def rhs_callable(config: ExperimentConfig, family: str):
    """Load function for the curl (N0) or div (RT0) problem."""
    if config.surface == "torus":
        return torus_rhs
    scale = config.c if family == "N0" else 3.0 + config.c
    return lambda pts, nrm: scale * sphere_gradient_field(pts)


def solve_level(mesh, family: str, config: ExperimentConfig):
    """Assemble, precondition and solve one PCG problem; returns ``(x, report)``."""
    op = fs.assemble_whitney(mesh, family, config.c)
    B = build_hx(mesh, family, config.c, config.inner, operator=op)
    b = fs.l2_project_rhs(mesh, family, rhs_callable(config, family))
    return pcg(op.matrix, B, b, tol=config.tol, maxit=config.maxit)


# --------------------------------------------------------------------- tables
def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else f"{float(v):.6e}"
    return str(v)


def _pcg_rows(config):
    family = FAMILY_OF[config.problem]
    for level, mesh, _ in meshes(config):
        _, rep = solve_level(mesh, family, config)
        yield {
            "level": level,
            "N": mesh.n_elements,
            "n_dofs": fs.FeSpace(mesh, family).n_dofs,
            "family": family,
            "iterations": rep.iterations,
            "criterion": rep.stop_criterion_value,
            "converged": rep.converged,
        }


def _harmonic_rows(config):
    for level, mesh, _ in meshes(config):
        system = assemble_hodge_saddle(mesh, "N0")
        B = build_block_hodge(mesh, "N0", config.inner)
        basis = compute_harmonic_basis(system, B, tol=config.tol, seed=config.seed, maxit=config.maxit)
        its = [r.iterations for r in basis.reports]
        crit = [r.stop_criterion_value for r in basis.reports]
        res = [harmonic_residuals(system, z, relative=True) for z in basis.fields]
        yield {
            "level": level,
            "N": mesh.n_elements,
            "n_dofs": system.matrix.shape[0],
            "n_fields": len(basis),
            "iterations": max(its) if its else 0,
            "iterations_all": " ".join(map(str, its)),
            "criterion": max(crit) if crit else 0.0,
            "curl_residual": max((r[0] for r in res), default=0.0),
            "div_residual": max((r[1] for r in res), default=0.0),
            "converged": all(r.converged for r in basis.reports),
        }


def _convergence_rows(config):
    prev = {}
    for level, mesh, _ in meshes(config):
        row = {"level": level, "N": mesh.n_elements}
        ok = True
        for family in config.families:
            x, rep = solve_level(mesh, family, config)
            ok &= rep.converged
            space = fs.FeSpace(mesh, family)
            for tag, tangential in (("", True), ("ambient_", False)):
                err = fs.l2_error(space, x, lambda p, n: sphere_gradient_field(p), tangential=tangential)
                key = f"{tag}{family}"
                # h halves per level, so the order is log2 of the error ratio
                order = np.log2(prev[key] / err) if key in prev else float("nan")
                prev[key] = err
                row[f"error_{key}"] = err
                row[f"order_{key}"] = order
            row[f"iterations_{family}"] = rep.iterations
        row["converged"] = ok
        yield row


def run_table(config: ExperimentConfig, write: bool = True):
    """Run the configured experiment; returns ``(rows, csv_text, path)``."""
    if config.problem == "convergence":
        if config.surface != "s3":
            raise ValueError("the convergence experiment uses the manufactured solution on s3")
        dev = check_manufactured_identities()
        if max(dev.values()) > 1e-4:
            raise RuntimeError(f"manufactured right-hand side failed its FD check: {dev}")
        rows = list(_convergence_rows(config))
    elif config.problem == "harmonic":
        rows = list(_harmonic_rows(config))
    else:
        rows = list(_pcg_rows(config))
    buf = io.StringIO()
    buf.write(f"# hodgehx {config.problem} table\n# config: {config.provenance()}\n")
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        w.writerow(rows[0].keys())
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    text = buf.getvalue()
    path = None
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{config.surface}_{config.problem}_c{config.c:g}.csv"
        path.write_text(text)
    return rows, text, path


def run_mesh(config: ExperimentConfig):
    """Write every mesh of the hierarchy plus a quality table."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for level, mesh, surface in meshes(config):
        write_mesh(mesh, out / f"{config.surface}_level{level}.mesh")
        q = quality(mesh, surface)
        rows.append(
            {
                "level": level,
                "N": mesh.n_elements,
                "vertices": mesh.n_vertices,
                "edges": mesh.n_edges,
                "facets": mesh.n_facets,
                "h_max": q.h_max,
                "c_qu": q.c_qu,
                "normal_error": q.normal_error,
            }
        )
    buf = io.StringIO()
    buf.write(f"# hodgehx mesh table\n# config: surface={config.surface},levels={config.levels},first_level={config.first_level}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rows[0].keys())
    for r in rows:
        w.writerow([_fmt(v) for v in r.values()])
    path = out / f"{config.surface}_meshes.csv"
    path.write_text(buf.getvalue())
    return rows, path


def run_export(config: ExperimentConfig):
    """Mesh file plus legacy VTK (triangle meshes) for the finest level.

    ``harmonic`` attaches the basis fields, ``curl``/``div`` the solution;
    other problems write the mesh only.  Returns the written paths.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    *_, (level, mesh, _) = meshes(config)
    stem = out / f"{config.surface}_level{level}"
    write_mesh(mesh, stem.with_suffix(".mesh"))
    paths = [stem.with_suffix(".mesh")]
    fields = {}
    if config.problem == "harmonic":
        system = assemble_hodge_saddle(mesh, "N0")
        basis = compute_harmonic_basis(
            system, build_block_hodge(mesh, "N0", config.inner), tol=config.tol, seed=config.seed
        )
        space = fs.FeSpace(mesh, "N0")
        for i, z in enumerate(basis.fields, 1):
            fields[f"harmonic_{i}"] = space.evaluate_at_barycenters(z)
    elif config.problem in FAMILY_OF:
        family = FAMILY_OF[config.problem]
        x, _ = solve_level(mesh, family, config)
        fields[f"u_{family}"] = fs.FeSpace(mesh, family).evaluate_at_barycenters(x)
    if mesh.element_dim == 2:
        write_vtk(mesh, stem.with_suffix(".vtk"), fields, title=f"hodgehx {config.surface} {config.problem}")
        paths.append(stem.with_suffix(".vtk"))
    else:
        for name, vals in fields.items():
            p = out / f"{stem.name}_{name}.csv"
            np.savetxt(p, vals, delimiter=",", fmt="%.17g")
            paths.append(p)
    return paths

