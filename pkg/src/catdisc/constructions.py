"""Ruled-disc and discrete-harmonic pipelines producing vertex-mapped grids.

A ruled disc interpolates two boundary curves by geodesics column by column;
a harmonic disc minimizes the discrete quadratic energy of a grid map with a
prescribed boundary trace.  Both feed the induced-metric certifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfConvexityError, PipelineStageError
from .induced import induced_length_metric, quotient_is_monotone
from .mesh import DiscMesh, MappedGraph, grid_index, grid_mesh
from .minimize import RelaxConfig, dominates, non_bubbling, relax_graph
from .model import Kappa
from .spaces import TargetSpace
from .verify import CertReport, certify_induced


@dataclass(frozen=True, eq=False)
class RuledDiscSpec:
    """Two sampled boundary curves plus the grid that rules between them.

    Curves are polylines with chord-length parametrization; for kappa > 0
    the rulings must stay shorter than R_kappa so the connecting geodesics
    are unique.
    """

    eta0: tuple
    eta1: tuple
    grid: tuple
    space: TargetSpace

    def __post_init__(self):
        object.__setattr__(self, "eta0", tuple(self.eta0))
        object.__setattr__(self, "eta1", tuple(self.eta1))
        n_a, n_t = self.grid
        if n_a < 1 or n_t < 1:
            raise ValueError("grid needs at least one cell per side")
        if len(self.eta0) < 1 or len(self.eta1) < 1:
            raise ValueError("each boundary curve needs at least one sample")
        for name, pts in (("eta0", self.eta0), ("eta1", self.eta1)):
            if len(pts) > 1 and not math.isfinite(self.space.curve_length(pts)):
                raise ValueError(f"{name} has unbounded sampled length")
        r = self.space.r_kappa
        if math.isfinite(r):
            for i in range(n_a + 1):
                a = i / n_a
                d = self.space.distance(self.curve_point(0, a), self.curve_point(1, a))
                if d >= r:
                    raise OutOfConvexityError(
                        f"ruling at a={a:.6g} has length {d:.6g} >= R_kappa"
                    )

    def curve_point(self, which: int, a: float):
        """Point at parameter a of eta0/eta1 under chord-length parametrization."""
        pts = self.eta0 if which == 0 else self.eta1
        if len(pts) == 1:
            return pts[0]
        seg = np.array(
            [self.space.distance(p, q) for p, q in zip(pts, pts[1:])]
        )
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        target = min(max(a, 0.0), 1.0) * cum[-1]
        k = int(np.searchsorted(cum[1:-1], target, side="right"))
        if seg[k] < 1e-15:
            return pts[k]
        return self.space.geodesic(pts[k], pts[k + 1], (target - cum[k]) / seg[k])


def ruled_disc_map(spec: RuledDiscSpec) -> MappedGraph:
    """Grid map (a, t) -> geodesic(eta0(a), eta1(a), t)."""
    n_a, n_t = spec.grid
    mesh = grid_mesh(n_a, n_t)
    images = [None] * mesh.n_vertices
    for i in range(n_a + 1):
        a = i / n_a
        p0, p1 = spec.curve_point(0, a), spec.curve_point(1, a)
        for j in range(n_t + 1):
            t = j / n_t
            if t == 0.0:
                img = p0
            elif t == 1.0:
                img = p1
            else:
                img = spec.space.geodesic(p0, p1, t)
            images[grid_index(n_a, n_t, i, j)] = img
    return MappedGraph(mesh, spec.space, images)


@dataclass(frozen=True)
class QuadrangleReport:
    rho: float
    checked_columns: int
    empirical_l: float

    @property
    def ok(self) -> bool:
        return self.checked_columns > 0 and math.isfinite(self.empirical_l)


def quadrangle_bound_check(
    spec: RuledDiscSpec, mg: MappedGraph, rho: float | None = None
) -> QuadrangleReport:
    """Empirical modulus L of the rulings: over adjacent columns whose
    boundary endpoints are rho-close, the max of
    d(gamma_a(t), gamma_b(t)) / (d(eta0(a),eta0(b)) + d(eta1(a),eta1(b)))."""
    n_a, n_t = spec.grid
    sp = spec.space
    if rho is None:
        gaps = []
        for which in (0, 1):
            for i in range(n_a):
                gaps.append(
                    sp.distance(
                        spec.curve_point(which, i / n_a),
                        spec.curve_point(which, (i + 1) / n_a),
                    )
                )
        rho = 10.0 * max(gaps)
    worst = 0.0
    checked = 0
    for i in range(n_a):
        d0 = sp.distance(
            mg.images[grid_index(n_a, n_t, i, 0)],
            mg.images[grid_index(n_a, n_t, i + 1, 0)],
        )
        d1 = sp.distance(
            mg.images[grid_index(n_a, n_t, i, n_t)],
            mg.images[grid_index(n_a, n_t, i + 1, n_t)],
        )
        if d0 > rho or d1 > rho or d0 + d1 < 1e-15:
            continue
        checked += 1
        for j in range(n_t + 1):
            gap = sp.distance(
                mg.images[grid_index(n_a, n_t, i, j)],
                mg.images[grid_index(n_a, n_t, i + 1, j)],
            )
            worst = max(worst, gap / (d0 + d1))
    return QuadrangleReport(rho=float(rho), checked_columns=checked, empirical_l=worst)


@dataclass(frozen=True)
class RuledMinimalityReport:
    max_length_defect: float
    max_proportionality_defect: float
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.max_length_defect <= self.tol
            and self.max_proportionality_defect <= self.tol
        )


def ruled_is_length_minimizing_check(
    mg: MappedGraph, tol: float = 1e-8
) -> RuledMinimalityReport:
    """Each vertical column polyline must realize the endpoint distance and be
    parametrized proportionally (equal consecutive segment lengths)."""
    columns = _grid_columns(mg.mesh)
    sp = mg.space
    length_defect = 0.0
    prop_defect = 0.0
    for col in columns:
        pts = [mg.images[v] for v in col]
        segs = [sp.distance(a, b) for a, b in zip(pts, pts[1:])]
        total = sum(segs)
        length_defect = max(length_defect, abs(total - sp.distance(pts[0], pts[-1])))
        if total > 1e-15:
            prop_defect = max(prop_defect, max(segs) - min(segs))
    return RuledMinimalityReport(
        max_length_defect=float(length_defect),
        max_proportionality_defect=float(prop_defect),
        tol=tol,
    )


def _grid_columns(mesh: DiscMesh) -> list[list[int]]:
    """Vertex indices grouped by first disc coordinate, sorted by the second."""
    cols: dict[float, list[int]] = {}
    for v, (a, _t) in enumerate(mesh.coords):
        cols.setdefault(round(float(a), 12), []).append(v)
    out = []
    for a in sorted(cols):
        out.append(sorted(cols[a], key=lambda v: mesh.coords[v][1]))
    return out


@dataclass(frozen=True, eq=False)
class HarmonicSpec:
    """Disc mesh, boundary trace, and energy weights of a harmonic problem.

    The trace must fit in a ball of radius < R_kappa/2 so the minimizer is
    unique; outside that regime the solver refuses.
    """

    mesh: DiscMesh
    trace: dict
    space: TargetSpace
    weights: np.ndarray | None = None
    tol: float = 1e-10
    max_sweeps: int = 10_000

    def __post_init__(self):
        bnd = set(np.flatnonzero(self.mesh.boundary).tolist())
        if set(self.trace) != bnd:
            raise ValueError("trace must assign exactly the boundary vertices")
        if self.tol <= 0 or self.max_sweeps < 1:
            raise ValueError("tol must be positive, max_sweeps >= 1")
        if self.weights is None:
            object.__setattr__(
                self, "weights", np.ones(len(self.mesh.edges))
            )
        else:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != len(self.mesh.edges) or np.any(w <= 0):
                raise ValueError("one positive weight per edge required")
            object.__setattr__(self, "weights", w)
        pts = [self.trace[v] for v in sorted(bnd)]
        if len(pts) > 1 and self.space.spread(pts) >= self.space.r_kappa / 2.0:
            raise OutOfConvexityError(
                "boundary trace does not fit in a ball of radius < R_kappa/2"
            )


def discrete_energy(mg: MappedGraph, weights=None) -> float:
    """Weighted Dirichlet energy sum w_e * d(f u, f v)^2 over edges."""
    d = mg.edge_lengths()
    w = np.ones(len(d)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(d) or np.any(w <= 0):
        raise ValueError("one positive weight per edge required")
    return float((w * d * d).sum())


@dataclass(frozen=True)
class HarmonicResult:
    graph: MappedGraph
    converged: bool
    sweeps: int
    # Rows (sweep index, energy, max vertex move).
    trace: tuple

    @property
    def energy(self) -> float:
        return self.trace[-1][1] if self.trace else 0.0

    def trace_csv(self) -> str:
        lines = ["sweep,energy,max_move"]
        for s, e, mv in self.trace:
            lines.append(f"{s},{e:.12g},{mv:.12g}")
        return "\n".join(lines) + "\n"


def harmonic_relax(spec: HarmonicSpec) -> HarmonicResult:
    """Minimize the discrete energy by weighted-barycenter coordinate descent.

    Boundary images are fixed to the trace; each sweep visits interior
    vertices in ascending index order and moves each to the weighted
    barycenter of its neighbors' images, which minimizes the local quadratic
    energy; the total energy is non-increasing sweep to sweep.
    """
    mesh, sp = spec.mesh, spec.space
    images: list = [None] * mesh.n_vertices
    for v, p in spec.trace.items():
        images[v] = p
    interior = mesh.interior_vertices()
    # Seed interior images at the trace barycenter so every point starts
    # inside the uniqueness ball.
    if interior:
        seed = sp.barycenter([spec.trace[v] for v in sorted(spec.trace)])
        for v in interior:
            images[v] = seed
    nbr_weight: dict[int, list] = {v: [] for v in interior}
    for (u, v), w in zip(mesh.edges, spec.weights):
        u, v = int(u), int(v)
        if u in nbr_weight:
            nbr_weight[u].append((v, float(w)))
        if v in nbr_weight:
            nbr_weight[v].append((u, float(w)))
    trace = []
    converged = False
    sweeps = 0
    for sweep in range(spec.max_sweeps):
        max_move = 0.0
        for v in interior:
            nbrs, ws = zip(*nbr_weight[v])
            new = sp.barycenter([images[u] for u in nbrs], list(ws))
            max_move = max(max_move, sp.distance(images[v], new))
            images[v] = new
        sweeps = sweep + 1
        energy = discrete_energy(
            MappedGraph(mesh, sp, images), spec.weights
        )
        trace.append((sweeps, energy, max_move))
        if max_move < spec.tol:
            converged = True
            break
    return HarmonicResult(
        MappedGraph(mesh, sp, images), converged, sweeps, tuple(trace)
    )


@dataclass(frozen=True)
class PipelineBundle:
    """Reports of one construction certified across a refinement schedule."""

    construction: str
    kappa: float
    reports: tuple
    # Rows (refinement, max_defect, mean_positive_defect).
    defect_table: tuple
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def defect_csv(self) -> str:
        lines = ["refinement,max_defect,mean_positive_defect"]
        for n, mx, mean in self.defect_table:
            lines.append(f"{n},{mx:.12g},{mean:.12g}")
        return "\n".join(lines) + "\n"


def _stage(name: str):
    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineStageError):
                raise PipelineStageError(name, exc) from exc
            return False

    return _Guard()


def verify_pipeline(
    builder,
    construction: str,
    kappa: float,
    refinements,
    triple_budget: int = 20,
    grid: int = 8,
    tolerance: float = 5e-3,
    seed: int = 0,
    steiner: int = 4,
    run_minimizer: bool = False,
) -> PipelineBundle:
    """Build a construction at each refinement and certify its induced metric.

    `builder(n)` must return the MappedGraph at refinement n.  Any stage
    error propagates as PipelineStageError with the failing stage's tag.
    Optionally relaxes each map with the domination-preserving minimizer and
    records dominance/non-bubbling diagnostics.
    """
    reports = []
    table = []
    extras: dict = {"monotone_quotient": [], "dominance": [], "non_bubbling": []}
    for n in refinements:
        with _stage(f"build:{n}"):
            mg = builder(n)
        with _stage(f"induced:{n}"):
            qm = induced_length_metric(mg)
            extras["monotone_quotient"].append((n, quotient_is_monotone(mg, qm)))
        if run_minimizer:
            with _stage(f"minimize:{n}"):
                res = relax_graph(
                    mg, RelaxConfig(preserve_domination=True, max_iters=200)
                )
                dom = dominates(mg, res.graph)
                extras["dominance"].append((n, dom))
                extras["non_bubbling"].append((n, non_bubbling(res.graph)))
        with _stage(f"certify:{n}"):
            report = certify_induced(
                mg,
                Kappa(kappa),
                triple_budget=triple_budget,
                grid=grid,
                tolerance=tolerance,
                seed=seed,
                refinement=n,
                steiner=steiner,
            )
        reports.append(report)
        table.append((n, report.max_defect, report.mean_positive_defect))
    return PipelineBundle(
        construction=construction,
        kappa=kappa,
        reports=tuple(reports),
        defect_table=tuple(table),
        extras=extras,
    )
