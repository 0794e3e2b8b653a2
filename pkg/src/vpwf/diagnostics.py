"""Monitored quantities: concentration function, inequalities, sphere fit.

Everything here is a pure read-only function of a mesh snapshot and its
geometry cache.  Ball-based quantities use extrinsic Euclidean balls with
vertex-sampled membership (consistent with the lumped quadrature); the
candidate ball centers are the vertex positions themselves, which
understates the true supremum over all of space by at most a covering
factor, and the error vanishes under refinement.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoFiniteRadiusError, SingularFitError, ZeroVolumeError
from .functionals import (
    lagrange_multiplier,
    scalar_willmore_gradient,
    scale_defect,
    signed_volume,
    translation_defect,
    wbar,
    willmore,
)
from .mesh import face_quality

LI_YAU_THRESHOLD = 8.0 * np.pi

_CHUNK = 512


@dataclass
class DiagnosticsRecord:
    """One time-series row of every monitored scalar."""

    t: float
    area: float
    volume: float
    willmore: float
    wbar: float
    gauss_bonnet_defect: float
    lam: float
    accum_L43: float
    accum_L2A: float
    diameter: float
    diameter_bound: float
    isoperimetric_ratio: float
    kappa: dict
    scale_defect: float
    translation_defect: float
    min_face_quality: float
    li_yau: bool


def _scan_frame(mesh, cache, radii):
    """Fused chunked scan: exact diameter plus kappa at every radius.

    Distances are assembled in float32; every near-maximal pair is
    recomputed in float64, so the diameter is exact.  Ball membership for
    the kappa columns uses the float32 distances directly (the weight sums
    stay float64): across radii the balls are exactly nested, so the
    recorded profile is monotone, and radii not smaller than the diameter
    skip the scan because their ball is the whole surface.  The direct
    :func:`concentration` entry point keeps full float64 membership.
    """
    p = mesh.positions
    n = p.shape[0]
    radii = np.asarray(radii, dtype=np.float64)
    weights = cache.abs_A_sq * cache.mass
    total = float(np.sum(weights))
    p32 = p.astype(np.float32)
    sq32 = np.einsum("ij,ij->i", p32, p32)
    p32_t = np.ascontiguousarray(p32.T)
    scale = float(np.max(np.abs(p))) ** 2 + 1.0
    band = np.float32(1e-5 * scale)

    radii_sq32 = (radii ** 2).astype(np.float32)
    kappa = np.full(radii.size, -np.inf)
    kappa_center = np.zeros(radii.size, dtype=np.int64)

    chunks = []
    max32 = np.float32(0.0)
    for lo in range(0, n, _CHUNK):
        c32 = p32[lo:lo + _CHUNK]
        d32 = c32 @ p32_t
        d32 *= np.float32(-2.0)
        d32 += sq32[None, :]
        d32 += sq32[lo:lo + c32.shape[0], None]
        chunk_max = d32.max()
        chunks.append((lo, d32, chunk_max))
        max32 = max(max32, chunk_max)

    def exact_sq(rows, cols):
        diff = p[rows] - p[cols]
        return np.einsum("ij,ij->i", diff, diff)

    # diameter: exact refinement of every float32 near-maximal pair; the
    # doubled band covers the error of both the winner and the candidates
    best_exact = 0.0
    for lo, d32, chunk_max in chunks:
        if chunk_max < max32 - 2 * band:
            continue
        rows, cols = np.nonzero(d32 >= max32 - 2 * band)
        if rows.size:
            best_exact = max(best_exact,
                             float(exact_sq(rows + lo, cols).max()))
    diam = float(np.sqrt(best_exact))

    for k, r in enumerate(radii):
        if r >= diam:
            kappa[k] = total
            kappa_center[k] = int(np.argmax(weights))
            continue
        r_sq32 = radii_sq32[k]
        best_val, best_center = -np.inf, 0
        for lo, d32, _ in chunks:
            sums = (d32 < r_sq32) @ weights
            arg = int(np.argmax(sums))
            if sums[arg] > best_val:
                best_val, best_center = float(sums[arg]), arg + lo
        kappa[k] = best_val
        kappa_center[k] = best_center

    return diam, kappa, mesh.positions[kappa_center]


def _ball_sums(points, weights, centers, radii_sq):
    """Summed weights inside open balls around each center, per radius.

    Returns an array of shape (len(radii_sq), len(centers)).  The chunked
    distance matrix is assembled in place and each radius reuses it.
    """
    out = np.empty((len(radii_sq), centers.shape[0]))
    pt_sq = np.einsum("ij,ij->i", points, points)
    points_t = np.ascontiguousarray(points.T)
    masked = None
    for lo in range(0, centers.shape[0], _CHUNK):
        c = centers[lo:lo + _CHUNK]
        d_sq = c @ points_t
        d_sq *= -2.0
        d_sq += pt_sq[None, :]
        d_sq += np.einsum("ij,ij->i", c, c)[:, None]
        if masked is None or masked.shape[0] != d_sq.shape[0]:
            masked = np.empty_like(d_sq)
        for k, r_sq in enumerate(radii_sq):
            np.multiply(d_sq < r_sq, weights[None, :], out=masked)
            out[k, lo:lo + c.shape[0]] = masked.sum(axis=1)
    return out


def concentration_profile(mesh, cache, radii):
    """Concentration function at several radii; also the maximizing centers.

    kappa(r) is the largest curvature energy integral(|A|^2) over any open
    ball of radius r centered at a vertex.

    Returns
    -------
    values : (len(radii),) array
    centers : (len(radii), 3) array
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    weights = cache.abs_A_sq * cache.mass
    sums = _ball_sums(
        mesh.positions, weights, mesh.positions, radii ** 2
    )
    best = np.argmax(sums, axis=1)
    values = sums[np.arange(len(radii)), best]
    return values, mesh.positions[best]


def concentration(mesh, cache, radius):
    """Concentration function value and its maximizing center at one radius."""
    values, centers = concentration_profile(mesh, cache, [radius])
    return float(values[0]), centers[0]


def total_curvature_energy(cache):
    """integral(|A|^2) over the whole surface = wbar + 2 * willmore."""
    return float(np.sum(cache.abs_A_sq * cache.mass))


def concentration_radius(mesh, cache, threshold, rel_tol=1e-6):
    """Largest radius whose concentration stays below ``threshold``.

    Bisection on the monotone map r -> kappa(r) to an absolute radius
    tolerance of ``rel_tol`` times the diameter.

    Raises
    ------
    NoFiniteRadiusError
        If the threshold is at least the total curvature energy, in which
        case the supremum is infinite.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    total = total_curvature_energy(cache)
    if threshold >= total:
        raise NoFiniteRadiusError(
            "threshold %.6g >= total curvature energy %.6g"
            % (threshold, total)
        )
    diam = diameter(mesh)
    lo, hi = 0.0, 1.0000001 * diam
    tol = rel_tol * diam
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        value, _ = concentration(mesh, cache, mid)
        if value < threshold:
            lo = mid
        else:
            hi = mid
    return lo


def diameter(mesh):
    """Exact maximum vertex-pair distance.

    The axis-aligned extent gives a cheap lower bound; any endpoint of a
    maximal pair must lie at least half that bound from the centroid, which
    prunes interior vertices before the quadratic scan.
    """
    p = mesh.positions
    lower = float(np.max(p.max(axis=0) - p.min(axis=0)))
    center = p.mean(axis=0)
    dist = np.linalg.norm(p - center, axis=1)
    # an endpoint x of a pair with |x - y| >= lower needs
    # |x - c| >= lower - max_j |y_j - c|
    r_max = float(dist.max())
    cand = p[dist >= lower - r_max - 1e-12 * lower]
    best_sq = lower * lower
    sq = np.einsum("ij,ij->i", cand, cand)
    cand_t = np.ascontiguousarray(cand.T)
    for lo in range(0, cand.shape[0], _CHUNK):
        c = cand[lo:lo + _CHUNK]
        d_sq = c @ cand_t
        d_sq *= -2.0
        d_sq += sq[None, :]
        d_sq += sq[lo:lo + c.shape[0], None]
        best_sq = max(best_sq, float(d_sq.max()))
    return float(np.sqrt(best_sq))


def diameter_bound(area, willmore_energy):
    """(2/pi) * sqrt(area * willmore); an upper bound for the diameter."""
    return (2.0 / np.pi) * np.sqrt(area * willmore_energy)


def diameter_check(mesh, willmore_energy, area=None):
    """Evaluate the diameter inequality; returns (diameter, bound, ok).

    The bound gets a 1e-9 multiplicative slack to absorb roundoff; the
    inequality itself carries the explicit constant 2/pi.
    """
    if area is None:
        from .functionals import area as area_fn

        area = area_fn(mesh)
    d = diameter(mesh)
    bound = diameter_bound(area, willmore_energy)
    return d, bound, d <= bound * (1.0 + 1e-9)


def isoperimetric_ratio(area, volume):
    """sqrt(area) / cbrt(|volume|), scale invariant."""
    if volume == 0.0:
        raise ZeroVolumeError("isoperimetric ratio undefined at zero volume")
    return float(np.sqrt(area) / np.abs(volume) ** (1.0 / 3.0))


def area_ratio(mesh, cache, center, radius):
    """Vertex-sampled ball area divided by radius squared.

    The density that the monotonicity inequality controls; approaches pi
    for small balls centered on a smooth point of the surface.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=np.float64)
    d_sq = np.einsum(
        "ij,ij->i", mesh.positions - center, mesh.positions - center
    )
    return float(np.sum(cache.mass[d_sq < radius * radius])) / radius ** 2


def sphere_fit(mesh, weights=None):
    """Best-fit sphere of the vertex set.

    Linear algebraic fit (|p|^2 = 2<c, p> + r^2 - |c|^2) refined by five
    Gauss-Newton iterations on the geometric distance.  Residuals and the
    reported deviations are weighted by the vertex areas unless explicit
    ``weights`` are given.

    Returns
    -------
    (center, radius, rms_deviation, max_deviation)

    Raises
    ------
    SingularFitError
        If the vertices are coplanar to 1e-12.
    """
    p = mesh.positions
    if weights is None:
        from .ddg import lumped_mass
        from .errors import MeshError

        try:
            weights = lumped_mass(mesh)
        except MeshError:
            weights = np.ones(p.shape[0])
    w = np.asarray(weights, dtype=np.float64)
    sw = np.sqrt(w / np.sum(w))
    a = np.column_stack([2.0 * p, np.ones(p.shape[0])]) * sw[:, None]
    rhs = np.einsum("ij,ij->i", p, p) * sw
    sol, _, rank, svals = np.linalg.lstsq(a, rhs, rcond=None)
    if rank < 4 or svals[-1] < 1e-12 * svals[0]:
        raise SingularFitError("vertices are coplanar; sphere fit singular")
    center = sol[:3]
    radius = float(np.sqrt(max(sol[3] + center @ center, 0.0)))

    for _ in range(5):
        delta = p - center
        dist = np.linalg.norm(delta, axis=1)
        res = dist - radius
        jac = np.empty((p.shape[0], 4))
        jac[:, :3] = -delta / np.where(dist > 0, dist, 1.0)[:, None]
        jac[:, 3] = -1.0
        jw = jac * sw[:, None]
        upd, _, _, _ = np.linalg.lstsq(jw, -res * sw, rcond=None)
        center = center + upd[:3]
        radius = float(radius + upd[3])

    delta = p - center
    dist = np.linalg.norm(delta, axis=1)
    res = dist - radius
    rms = float(np.sqrt(np.sum(w * res ** 2) / np.sum(w)))
    return center, radius, rms, float(np.max(np.abs(res)))


def record(state, cache, config):
    """Assemble the full diagnostics row for one flow state."""
    mesh = state.mesh
    area = cache.total_area
    volume = signed_volume(mesh)
    w = willmore(mesh, cache)
    wb = wbar(mesh, cache)
    chi = mesh.topology().euler_characteristic
    lam = lagrange_multiplier(cache, area)
    radii = tuple(config.kappa_radii)
    diam, kappa_vals, _ = _scan_frame(mesh, cache, radii)
    bound = diameter_bound(area, w)
    kappa = dict(zip(radii, kappa_vals.tolist()))
    return DiagnosticsRecord(
        t=state.time,
        area=area,
        volume=volume,
        willmore=w,
        wbar=wb,
        gauss_bonnet_defect=wb - (2.0 * w - 4.0 * np.pi * chi),
        lam=lam,
        accum_L43=state.accum_L43,
        accum_L2A=state.accum_L2A,
        diameter=diam,
        diameter_bound=bound,
        isoperimetric_ratio=isoperimetric_ratio(area, volume),
        kappa=kappa,
        scale_defect=scale_defect(mesh, cache),
        translation_defect=translation_defect(cache),
        min_face_quality=float(np.min(face_quality(mesh))),
        li_yau=bool(w < LI_YAU_THRESHOLD),
    )
