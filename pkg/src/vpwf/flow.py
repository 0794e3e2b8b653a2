"""Explicit time integration of the volume-preserving Willmore flow.

Each step moves vertices along their normals by dt times the normal speed

    xi = -lap(H) - |A0|^2 H + lam,

re-projects the signed volume to the target with a safeguarded Newton
correction along the normals, and enforces monotone energy decay: a step
that raises the bending energy by more than the tolerance is rejected and
retried with half the step.  The accepted trial geometry becomes the next
step's cache, so the flow costs one geometry build per step.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ddg import build_cache
from .errors import (
    DissipationViolationError,
    NonFiniteError,
    ProjectionDivergedError,
    QualityCollapseError,
    StepUnderflowError,
)
from .functionals import lagrange_multiplier, signed_volume, wbar
from .mesh import (
    TriMesh,
    cross_rows,
    dot_rows,
    face_areas_normals,
    face_quality,
)
from . import ddg

MAX_HALVINGS = 20


@dataclass
class QualityConfig:
    """Opt-in mesh maintenance: Delaunay-style flips plus tangential smoothing."""

    enabled: bool = False
    flip_threshold_angle: float = math.pi  # radians; opposite-angle sum
    tangential_smoothing_weight: float = 0.1
    cadence_steps: int = 25
    min_quality: float = 1e-3


@dataclass
class StopRule:
    """Stopping criteria; a tolerance of zero disables that criterion."""

    max_time: float = math.inf
    max_steps: int = 100_000
    speed_tol: float = 0.0
    wbar_tol: float = 0.0


@dataclass
class FlowConfig:
    dt_safety: float = 0.045         # fraction of the h^4 stability heuristic
    dt_max: float = 1e-4
    dt_policy: str = "explicit-adaptive"
    projection_tol: float = 1e-10    # relative volume error after projection
    dissipation_tol: float = 1e-6    # allowed energy increase per step
    stop: StopRule = field(default_factory=StopRule)
    quality: QualityConfig = field(default_factory=QualityConfig)
    record_cadence: int = 10
    kappa_radii: tuple = (0.5, 1.0, 4.0)
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.dt_max <= 0 or self.projection_tol <= 0:
            raise ValueError("dt_max and projection_tol must be positive")
        if self.dissipation_tol <= 0:
            raise ValueError("dissipation_tol must be positive")
        if self.dt_policy != "explicit-adaptive":
            raise ValueError("only the explicit-adaptive policy is implemented")


@dataclass
class FlowState:
    """One point of the evolution plus the running multiplier integrals."""

    mesh: TriMesh
    time: float = 0.0
    step_index: int = 0
    target_volume: float = 0.0
    accum_L43: float = 0.0           # integral of |lam|^(4/3) dt
    accum_L2A: float = 0.0           # integral of lam^2 * area dt
    last_lambda: float = 0.0
    last_max_speed: float = 0.0
    last_dt: float = 0.0
    last_halvings: int = 0
    cache: object = field(default=None, repr=False, compare=False)


@dataclass
class Trajectory:
    """Recorded diagnostics rows, optional snapshots and the final state."""

    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (time, TriMesh)
    stop_reason: str = ""
    final_state: FlowState = None


def initial_state(mesh, cache=None):
    """Flow state at time zero; the current volume becomes the target."""
    return FlowState(
        mesh=mesh,
        target_volume=signed_volume(mesh),
        cache=cache,
    )


def velocity(cache, lam):
    """Normal speed of the flow at every vertex.

    Raises
    ------
    NonFiniteError
        If any entry is NaN or infinite, which signals operator blow-up;
        the caller must reject the step.
    """
    xi = -cache.lap_H - cache.tracefree_sq * cache.H + lam
    if not np.all(np.isfinite(xi)):
        raise NonFiniteError("velocity field contains non-finite entries")
    return xi


def choose_dt(state, cache, config, max_speed=None):
    """Fourth-order explicit stability heuristic.

    dt = min(dt_max, sigma * h_min^4 / (1 + max|xi| * h_min^3)) with h_min
    the shortest edge; halving every edge divides the leading term by 16,
    matching the parabolic scaling of the flow.
    """
    if max_speed is None:
        max_speed = float(np.max(np.abs(velocity(cache, state.last_lambda))))
    h = cache.h_min
    dt = min(config.dt_max,
             config.dt_safety * h ** 4 / (1.0 + max_speed * h ** 3))
    if dt < 1e-18 * config.dt_max:
        raise StepUnderflowError("time step %.3e underflowed" % dt)
    return dt


def _tet_volume_of(corners):
    p0, p1, p2 = corners[:, 0, :], corners[:, 1, :], corners[:, 2, :]
    return -float(np.sum(dot_rows(p0, cross_rows(p1, p2)))) / 6.0


def _volume_project_impl(mesh, normals, target_volume, tol, max_iterations,
                         area_hint):
    """Projection core; also returns the displaced per-face corners."""
    flat = mesh.faces.reshape(-1)
    corners = mesh.positions[flat].reshape(-1, 3, 3)
    v = _tet_volume_of(corners)
    if target_volume == 0.0:
        raise ProjectionDivergedError("target volume is zero")
    rel = abs(v - target_volume) / abs(target_volume)
    if rel >= 0.5:
        raise ProjectionDivergedError(
            "volume error %.2f is too large for a projection" % rel
        )
    if rel <= tol:
        return mesh, corners
    if area_hint is not None:
        total_area = area_hint
    else:
        area, _ = face_areas_normals(mesh, check=False)
        total_area = float(np.sum(area))
    normal_corners = normals[flat].reshape(-1, 3, 3)
    c = 0.0
    best = rel
    for _ in range(max_iterations):
        # dV/dc = -A for motion along the inward-positive normal
        c += (v - target_volume) / total_area
        displaced = corners + c * normal_corners
        v = _tet_volume_of(displaced)
        rel = abs(v - target_volume) / abs(target_volume)
        if rel <= tol:
            out = mesh.with_positions(mesh.positions + c * normals)
            return out, displaced
        if rel >= best:
            # refresh the derivative before declaring failure
            a, _ = face_areas_normals(
                mesh.with_positions(mesh.positions + c * normals),
                check=False,
            )
            total_area = float(np.sum(a))
        best = min(best, rel)
    raise ProjectionDivergedError(
        "volume projection stalled at relative error %.3e" % rel
    )


def volume_project(mesh, normals, target_volume, tol, max_iterations=50,
                   area_hint=None):
    """Move vertices along ``normals`` so the signed volume hits the target.

    Newton iteration on c -> V(f + c*nu) with the first-variation derivative
    dV/dc = -A, safeguarded by a residual-decrease check.  The projection is
    a small correction: it refuses to bridge volume errors of 50% or more.
    """
    out, _ = _volume_project_impl(
        mesh, normals, target_volume, tol, max_iterations, area_hint
    )
    return out


def _advance(state, cache, xi, dt, config):
    """Move, project, rebuild geometry; returns (mesh, cache, wbar)."""
    moved = state.mesh.with_positions(
        state.mesh.positions + dt * xi[:, None] * cache.normals
    )
    projected, corners = _volume_project_impl(
        moved, cache.normals, state.target_volume, config.projection_tol,
        50, cache.total_area,
    )
    trial_cache = build_cache(projected, corners=corners)
    if not (
        np.all(np.isfinite(trial_cache.H))
        and np.all(np.isfinite(trial_cache.lap_H))
    ):
        raise NonFiniteError("curvature blow-up after step")
    return projected, trial_cache, wbar(projected, trial_cache)


def step(state, config, dt_override=None, precomputed=None):
    """One accepted flow step; returns the successor state.

    The energy is not allowed to rise by more than
    dissipation_tol * max(1, wbar): offending trials are retried with
    half the step, up to 20 halvings.  ``precomputed`` lets the driver
    hand over (lam, xi, max_speed, wbar) it already evaluated for its
    stopping checks.
    """
    cache = state.cache if state.cache is not None else build_cache(state.mesh)
    total_area = cache.total_area
    if precomputed is None:
        lam = lagrange_multiplier(cache, total_area)
        xi = velocity(cache, lam)
        max_speed = float(np.max(np.abs(xi)))
        wb = wbar(state.mesh, cache)
    else:
        lam, xi, max_speed, wb = precomputed
    dt = dt_override if dt_override is not None else choose_dt(
        state, cache, config, max_speed
    )
    allowed = wb + config.dissipation_tol * max(1.0, wb)

    halvings = 0
    wb_trial = math.nan
    while True:
        try:
            mesh, trial_cache, wb_trial = _advance(state, cache, xi, dt, config)
            if wb_trial <= allowed:
                break
        except NonFiniteError:
            if dt_override is not None:
                raise
            wb_trial = math.nan
        if halvings >= MAX_HALVINGS:
            raise DissipationViolationError(
                "energy still rising after %d halvings (wbar %.6e -> %.6e)"
                % (halvings, wb, wb_trial)
            )
        dt *= 0.5
        halvings += 1

    new_state = FlowState(
        mesh=mesh,
        time=state.time + dt,
        step_index=state.step_index + 1,
        target_volume=state.target_volume,
        accum_L43=state.accum_L43 + abs(lam) ** (4.0 / 3.0) * dt,
        accum_L2A=state.accum_L2A + lam * lam * total_area * dt,
        last_lambda=lam,
        last_max_speed=max_speed,
        last_dt=dt,
        last_halvings=halvings,
        cache=trial_cache,
    )

    if (
        config.quality.enabled
        and config.quality.cadence_steps > 0
        and new_state.step_index % config.quality.cadence_steps == 0
    ):
        improved = quality_pass(new_state.mesh, config)
        normals = ddg.vertex_normals(improved)
        improved = volume_project(
            improved, normals, state.target_volume, config.projection_tol
        )
        improved_cache = build_cache(improved)
        # mesh maintenance must not break the monotone-energy contract;
        # an energy-raising pass is skipped rather than applied
        if wbar(improved, improved_cache) <= wb_trial + config.dissipation_tol * max(
            1.0, wb_trial
        ):
            new_state = replace(
                new_state, mesh=improved, cache=improved_cache
            )

    return new_state


def _flip_edges(mesh, threshold):
    """Apply non-conflicting Delaunay-style edge flips; returns (mesh, count).

    An interior edge is flipped when the two angles opposite to it sum to
    more than ``threshold``.  Flips are selected greedily, worst first, no
    two sharing a face, and skipped when the flipped edge already exists or
    a resulting face would degenerate.
    """
    f = np.array(mesh.faces)
    n = mesh.vertex_count
    half_a = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    half_b = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    opp = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    face_of = np.tile(np.arange(f.shape[0]), 3)
    code = np.minimum(half_a, half_b) * np.int64(n) + np.maximum(half_a, half_b)
    order = np.argsort(code, kind="stable")
    code_s = code[order]
    # closed oriented mesh: directed halves pair up two by two
    first, second = order[::2], order[1::2]
    if not np.array_equal(code_s[::2], code_s[1::2]):
        raise QualityCollapseError("edge pairing failed; mesh not closed")

    p = mesh.positions

    def corner_angles(apex, left, right):
        u = p[left] - p[apex]
        v = p[right] - p[apex]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.sum(u * v, axis=1)
        return np.arctan2(cross, dot)

    ang1 = corner_angles(opp[first], half_a[first], half_b[first])
    ang2 = corner_angles(opp[second], half_a[second], half_b[second])
    score = ang1 + ang2
    candidates = np.nonzero(score > threshold)[0]
    if candidates.size == 0:
        return mesh, 0

    existing = set(code.tolist())
    used_faces = set()
    flips = []
    for e in candidates[np.argsort(-score[candidates])]:
        fa, fb = int(face_of[first[e]]), int(face_of[second[e]])
        if fa in used_faces or fb in used_faces:
            continue
        i, j = int(half_a[first[e]]), int(half_b[first[e]])
        k, l = int(opp[first[e]]), int(opp[second[e]])
        key = min(k, l) * int(n) + max(k, l)
        if key in existing:
            continue
        # reject flips creating degenerate triangles
        new1 = np.cross(p[i] - p[k], p[l] - p[k])
        new2 = np.cross(p[l] - p[j], p[k] - p[j])
        floor = 2.0 * mesh.area_floor()
        if np.linalg.norm(new1) < floor or np.linalg.norm(new2) < floor:
            continue
        used_faces.update((fa, fb))
        existing.add(key)
        flips.append((fa, fb, i, j, k, l))

    for fa, fb, i, j, k, l in flips:
        f[fa] = (k, i, l)
        f[fb] = (l, j, k)
    return TriMesh(mesh.positions, f), len(flips)


def quality_pass(mesh, config):
    """Edge flips plus tangential-only umbrella smoothing.

    Smoothing moves each vertex by weight times the tangential projection
    of the umbrella vector (neighbor mean minus vertex); the normal
    component is removed exactly, so volume changes only at second order
    and the subsequent re-projection is a tiny correction.
    """
    qc = config.quality
    mesh, _ = _flip_edges(mesh, qc.flip_threshold_angle)

    weight = qc.tangential_smoothing_weight
    if weight != 0.0:
        normals = ddg.vertex_normals(mesh)
        edges = mesh.edges()
        idx = np.concatenate([edges[:, 0], edges[:, 1]])
        other = np.concatenate([edges[:, 1], edges[:, 0]])
        degree = np.bincount(idx, minlength=mesh.vertex_count)
        acc = np.empty((mesh.vertex_count, 3))
        for a in range(3):
            acc[:, a] = np.bincount(
                idx, weights=mesh.positions[other, a],
                minlength=mesh.vertex_count,
            )
        umbrella = acc / degree[:, None] - mesh.positions
        tangential = umbrella - np.sum(
            umbrella * normals, axis=1
        )[:, None] * normals
        mesh = mesh.with_positions(mesh.positions + weight * tangential)

    if float(np.min(face_quality(mesh))) < qc.min_quality:
        raise QualityCollapseError(
            "minimum face quality fell below %.1e" % qc.min_quality
        )
    return mesh


def run(mesh, config, record_fn=None):
    """Drive the flow until a stop criterion fires; returns a Trajectory.

    ``record_fn(state, cache, config) -> row`` produces diagnostics rows
    (the diagnostics module supplies the standard one); rows are recorded
    at the configured cadence, at snapshot times and at the final state.
    """
    if record_fn is None:
        from .diagnostics import record as record_fn

    state = initial_state(mesh, build_cache(mesh))
    traj = Trajectory()
    pending_snapshots = sorted(config.snapshot_times)

    def emit(state):
        traj.records.append(record_fn(state, state.cache, config))

    def snapshot(state):
        traj.snapshots.append((state.time, state.mesh))

    emit(state)
    if pending_snapshots and pending_snapshots[0] <= 0.0:
        while pending_snapshots and pending_snapshots[0] <= 0.0:
            pending_snapshots.pop(0)
        snapshot(state)

    recorded_at = state.step_index
    while True:
        cache = state.cache
        lam = lagrange_multiplier(cache, cache.total_area)
        xi = velocity(cache, lam)
        max_speed = float(np.max(np.abs(xi)))
        wb = wbar(state.mesh, cache)
        stop = config.stop
        if stop.speed_tol > 0.0 and max_speed < stop.speed_tol:
            traj.stop_reason = "speed_tol"
            break
        if stop.wbar_tol > 0.0 and wb < stop.wbar_tol:
            traj.stop_reason = "wbar_tol"
            break
        if state.time >= stop.max_time:
            traj.stop_reason = "max_time"
            break
        if state.step_index >= stop.max_steps:
            traj.stop_reason = "max_steps"
            break

        try:
            state = step(state, config, precomputed=(lam, xi, max_speed, wb))
        except Exception as exc:
            # attach the last good state so callers can save or inspect it
            traj.final_state = state
            exc.last_state = state
            exc.trajectory = traj
            raise

        took_snapshot = False
        if pending_snapshots and state.time >= pending_snapshots[0]:
            while pending_snapshots and state.time >= pending_snapshots[0]:
                pending_snapshots.pop(0)
            snapshot(state)
            took_snapshot = True
        if took_snapshot or (
            config.record_cadence > 0
            and state.step_index % config.record_cadence == 0
        ):
            emit(state)
            recorded_at = state.step_index

    if recorded_at != state.step_index:
        emit(state)
    traj.final_state = state
    return traj
