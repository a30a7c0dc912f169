"""Property transforms: map an input image to a property-emphasizing image.

Each pre-decision flow applies exactly one of these before its inference
engine; the identity transform marks the flow trained on raw input. All
transforms are pure functions of the 28x28 input and the parameter record,
produce uint8 images in [0, 255], and involve no randomness, so a stored
system replays bit-identically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import UnknownPropertyError

SIDE = 28

_N8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


class PropertyId(str, enum.Enum):
    """Identity of a property transform; `IDENTITY` marks the flow with none."""

    STROKE = "stroke"
    CIRCLE = "circle"
    CROSSING = "crossing"
    ELLIPSE = "ellipse"
    ELLIPSE_CIRCLE = "ellipse_circle"
    ENDPOINT = "endpoint"
    ENCLOSED_REGION = "enclosed_region"
    LINE = "line"
    CONVEX_HULL = "convex_hull"
    CORNER = "corner"
    IDENTITY = "identity"


EXPLAINABLE_PROPERTIES: Tuple[PropertyId, ...] = tuple(
    p for p in PropertyId if p is not PropertyId.IDENTITY
)

#: Short labels used in printed explainability matrices.
MATRIX_LABELS: Dict[PropertyId, str] = {
    PropertyId.STROKE: "Stroke",
    PropertyId.CIRCLE: "Circle",
    PropertyId.CROSSING: "Crossing",
    PropertyId.ELLIPSE: "Ellipse",
    PropertyId.ELLIPSE_CIRCLE: "Ell-Cir",
    PropertyId.ENDPOINT: "Endpoint",
    PropertyId.ENCLOSED_REGION: "Encl. Reg.",
    PropertyId.LINE: "Line",
    PropertyId.CONVEX_HULL: "Convex Hull",
    PropertyId.CORNER: "Corner",
    PropertyId.IDENTITY: "No Property",
}


def parse_property(name: str) -> PropertyId:
    """Resolve a serialized property name, guarding config files."""
    try:
        return PropertyId(name)
    except ValueError:
        raise UnknownPropertyError(
            f"unknown property {name!r}; expected one of "
            f"{[p.value for p in PropertyId]}"
        ) from None


@dataclass(frozen=True)
class TransformParams:
    """Declared constants of the transform sub-procedures.

    These live in one record so a stored system is self-describing and an
    alternate interpretation of a transform can be swapped in without
    touching the fusion layer.
    """

    binarize_threshold: int = 128
    line_max_deviation: float = 1.0   # px, point-to-chord distance
    line_min_length: int = 6          # skeleton pixels per straight run
    fit_error_gate: float = 0.15      # mean radial error / fitted radius
    eccentricity_split: float = 0.55  # circle below, ellipse at or above
    conic_min_component: int = 8      # fg pixels; smaller blobs fit trivially
    harris_k: float = 0.04
    harris_threshold_ratio: float = 0.01

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_PARAMS = TransformParams()


def binarize(image: np.ndarray, threshold: int = DEFAULT_PARAMS.binarize_threshold) -> np.ndarray:
    """Foreground mask: 1 where intensity >= threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    return (np.asarray(image) >= threshold).astype(np.uint8)


def _neighbor_planes(img: np.ndarray) -> List[np.ndarray]:
    # P2..P9 clockwise from north, each aligned with img.
    p = np.pad(img, 1)
    return [
        p[:-2, 1:-1],   # N
        p[:-2, 2:],     # NE
        p[1:-1, 2:],    # E
        p[2:, 2:],      # SE
        p[2:, 1:-1],    # S
        p[2:, :-2],     # SW
        p[1:-1, :-2],   # W
        p[:-2, :-2],    # NW
    ]


def _neighbor_count(img: np.ndarray) -> np.ndarray:
    return np.sum(_neighbor_planes(img), axis=0)


def skeletonize(binary: np.ndarray) -> np.ndarray:
    """Thin a binary image to a one-pixel-wide skeleton.

    Iterative two-subpass thinning over the 8-neighborhood. The batch
    deletion can annihilate very small components outright (a solid 2x2
    block satisfies both subpass conditions everywhere), so any component
    that would vanish is restored as its single innermost pixel, keeping
    the component count of the input.
    """
    img = (np.asarray(binary) > 0).astype(np.uint8)
    original = img.copy()
    while True:
        changed = False
        for subpass in (0, 1):
            n = _neighbor_planes(img)
            count = np.sum(n, axis=0)
            ring = n + [n[0]]
            transitions = sum(
                ((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.uint8)
                for i in range(8)
            )
            cond = (img == 1) & (count >= 2) & (count <= 6) & (transitions == 1)
            if subpass == 0:
                cond &= (n[0] * n[2] * n[4] == 0) & (n[2] * n[4] * n[6] == 0)
            else:
                cond &= (n[0] * n[2] * n[6] == 0) & (n[0] * n[4] * n[6] == 0)
            if cond.any():
                img[cond] = 0
                changed = True
        if not changed:
            break
    _thin_residual_blocks(img)

    for component in _components(original, connectivity=8):
        rows = tuple(p[0] for p in component)
        cols = tuple(p[1] for p in component)
        if not img[rows, cols].any():
            img[_innermost_pixel(original, component)] = 1
    return img


def _thin_residual_blocks(img: np.ndarray) -> None:
    """Remove leftover solid 2x2 blocks the batch thinning can leave.

    Deletes, one pixel at a time in scan order, block members whose
    deletion keeps the 8-neighborhood connected (exactly one 0->1
    transition around the ring), so connectivity is untouched.
    """

    def in_block(r, c):
        for dr, dc in ((0, 0), (0, -1), (-1, 0), (-1, -1)):
            r0, c0 = r + dr, c + dc
            if 0 <= r0 and r0 + 1 < img.shape[0] and 0 <= c0 and c0 + 1 < img.shape[1]:
                if img[r0 : r0 + 2, c0 : c0 + 2].all():
                    return True
        return False

    changed = True
    while changed:
        changed = False
        for r in range(img.shape[0]):
            for c in range(img.shape[1]):
                if not img[r, c] or not in_block(r, c):
                    continue
                ring = [
                    img[r + dr, c + dc]
                    if 0 <= r + dr < img.shape[0] and 0 <= c + dc < img.shape[1]
                    else 0
                    for dr, dc in (
                        (-1, 0), (-1, 1), (0, 1), (1, 1),
                        (1, 0), (1, -1), (0, -1), (-1, -1),
                    )
                ]
                transitions = sum(
                    ring[i] == 0 and ring[(i + 1) % 8] == 1 for i in range(8)
                )
                if transitions == 1:
                    img[r, c] = 0
                    changed = True


def _components(mask: np.ndarray, connectivity: int) -> List[List[Tuple[int, int]]]:
    # Flood fill; components ordered by their first pixel in scan order.
    offsets = _N8 if connectivity == 8 else _N4
    seen = np.zeros_like(mask, dtype=bool)
    components = []
    for r in range(mask.shape[0]):
        for c in range(mask.shape[1]):
            if not mask[r, c] or seen[r, c]:
                continue
            stack = [(r, c)]
            seen[r, c] = True
            pixels = []
            while stack:
                pr, pc = stack.pop()
                pixels.append((pr, pc))
                for dr, dc in offsets:
                    nr, nc = pr + dr, pc + dc
                    if (
                        0 <= nr < mask.shape[0]
                        and 0 <= nc < mask.shape[1]
                        and mask[nr, nc]
                        and not seen[nr, nc]
                    ):
                        seen[nr, nc] = True
                        stack.append((nr, nc))
            components.append(pixels)
    return components


def _innermost_pixel(mask: np.ndarray, component: List[Tuple[int, int]]) -> Tuple[int, int]:
    dist = _distance_to_background(mask)
    return max(component, key=lambda p: (dist[p], -p[0], -p[1]))


def _distance_to_background(binary: np.ndarray) -> np.ndarray:
    """Exact euclidean distance from each foreground pixel to the background.

    Pixels outside the frame count as background. Brute force over pixel
    pairs; at 28x28 that is at most 784x784 squared distances.
    """
    fg = np.argwhere(binary > 0)
    dist = np.zeros(binary.shape, dtype=np.float64)
    if len(fg) == 0:
        return dist
    bg = np.argwhere(binary == 0)
    edge = 1.0 + np.minimum.reduce(
        [fg[:, 0], fg[:, 1], SIDE - 1 - fg[:, 0], SIDE - 1 - fg[:, 1]]
    ).astype(np.float64)
    if len(bg) == 0:
        nearest = edge
    else:
        d2 = ((fg[:, None, :] - bg[None, :, :]) ** 2).sum(axis=2)
        nearest = np.minimum(np.sqrt(d2.min(axis=1)), edge)
    dist[fg[:, 0], fg[:, 1]] = nearest
    return dist


def _dilate(mask: np.ndarray) -> np.ndarray:
    p = np.pad(mask, 1)
    out = p[1:-1, 1:-1].copy()
    for dr, dc in _N8:
        out |= p[1 + dr : 1 + dr + SIDE, 1 + dc : 1 + dc + SIDE]
    return out


def _render(mask: np.ndarray) -> np.ndarray:
    return (np.asarray(mask, dtype=bool) * np.uint8(255)).astype(np.uint8)


# --- sub-procedures, one per explainable property ---


def _stroke(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    dist = _distance_to_background(binary)
    peak = dist.max()
    if peak == 0:
        return np.zeros((SIDE, SIDE), dtype=np.uint8)
    return np.rint(255.0 * dist / peak).astype(np.uint8)


def _endpoint(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    skel = skeletonize(binary)
    mask = (skel == 1) & (_neighbor_count(skel) == 1)
    return _render(_dilate(mask))


def _crossing(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    skel = skeletonize(binary)
    mask = (skel == 1) & (_neighbor_count(skel) >= 3)
    return _render(_dilate(mask))


def _line(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    skel = skeletonize(binary)
    out = np.zeros((SIDE, SIDE), dtype=bool)
    for path in _skeleton_paths(skel):
        for run in _straight_runs(path, params.line_max_deviation):
            if len(run) >= params.line_min_length:
                for r, c in run:
                    out[r, c] = True
    return _render(out)


def _skeleton_paths(skel: np.ndarray) -> List[List[Tuple[int, int]]]:
    """Decompose a skeleton into ordered pixel paths.

    Paths run between nodes (pixels of degree != 2) through degree-2
    chains; leftover pure cycles are walked from their smallest pixel.
    """
    pixels = {(int(r), int(c)) for r, c in np.argwhere(skel > 0)}

    def neighbors(p):
        return [
            (p[0] + dr, p[1] + dc)
            for dr, dc in _N8
            if (p[0] + dr, p[1] + dc) in pixels
        ]

    degree = {p: len(neighbors(p)) for p in pixels}
    nodes = {p for p, d in degree.items() if d != 2}
    paths: List[List[Tuple[int, int]]] = []
    used_steps = set()

    for node in sorted(nodes):
        for first in sorted(neighbors(node)):
            if (node, first) in used_steps:
                continue
            path = [node, first]
            used_steps.add((node, first))
            used_steps.add((first, node))
            prev, cur = node, first
            while cur not in nodes:
                nxt_options = [q for q in sorted(neighbors(cur)) if q != prev]
                if not nxt_options:
                    break
                nxt = nxt_options[0]
                used_steps.add((cur, nxt))
                used_steps.add((nxt, cur))
                path.append(nxt)
                prev, cur = cur, nxt
            paths.append(path)

    covered = {p for path in paths for p in path}
    remaining = sorted(pixels - covered)
    while remaining:
        start = remaining[0]
        path = [start]
        prev, cur = None, start
        while True:
            nxt_options = [q for q in sorted(neighbors(cur)) if q != prev]
            if not nxt_options:
                break
            nxt = nxt_options[0]
            if nxt == start:
                break
            path.append(nxt)
            prev, cur = cur, nxt
        paths.append(path)
        covered.update(path)
        remaining = sorted(pixels - covered)
    return paths


def _straight_runs(
    path: List[Tuple[int, int]], max_deviation: float
) -> List[List[Tuple[int, int]]]:
    """Greedy maximal sub-runs whose points stay within max_deviation of
    the chord through the run's endpoints. Adjacent runs share their
    breakpoint pixel."""
    runs = []
    i = 0
    while i < len(path) - 1:
        j = i + 1
        while j + 1 < len(path) and _chord_fits(path, i, j + 1, max_deviation):
            j += 1
        runs.append(path[i : j + 1])
        i = j
    return runs


def _chord_fits(path, i, j, max_deviation) -> bool:
    (r0, c0), (r1, c1) = path[i], path[j]
    dr, dc = r1 - r0, c1 - c0
    norm = math.hypot(dr, dc)
    if norm == 0:
        return True
    for r, c in path[i + 1 : j]:
        if abs(dr * (c - c0) - dc * (r - r0)) / norm > max_deviation:
            return False
    return True


def _boundary(mask: np.ndarray, component: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    # Component pixels with a 4-neighbor outside the foreground (frame
    # border counts as background).
    out = []
    for r, c in component:
        for dr, dc in _N4:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < SIDE and 0 <= nc < SIDE) or not mask[nr, nc]:
                out.append((r, c))
                break
    return out


def _fit_circle(points: np.ndarray) -> Optional[Tuple[np.ndarray, float, float]]:
    """Least-squares circle through boundary points.

    Returns (center, radius, mean radial error) or None when degenerate.
    """
    if len(points) < 3:
        return None
    x = points[:, 1].astype(np.float64)
    y = points[:, 0].astype(np.float64)
    a = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    try:
        sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if rank < 3:
        return None
    cx, cy = sol[0] / 2.0, sol[1] / 2.0
    r2 = sol[2] + cx * cx + cy * cy
    if r2 <= 0:
        return None
    radius = math.sqrt(r2)
    err = np.abs(np.hypot(x - cx, y - cy) - radius).mean()
    return np.array([cy, cx]), radius, err


def _fit_ellipse(points: np.ndarray) -> Optional[dict]:
    """Direct least-squares conic fit constrained to an ellipse.

    Returns center, semi-axes (a >= b), axis frame, eccentricity, and the
    mean radial error of the points, or None when the fit is degenerate.
    """
    if len(points) < 5:
        return None
    x = points[:, 1].astype(np.float64)
    y = points[:, 0].astype(np.float64)
    # Center the coordinates for conditioning.
    mx, my = x.mean(), y.mean()
    xc, yc = x - mx, y - my
    d1 = np.column_stack([xc * xc, xc * yc, yc * yc])
    d2 = np.column_stack([xc, yc, np.ones_like(xc)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
        m = s1 + s2 @ t
        # Premultiply by the inverse of the ellipse constraint matrix.
        m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
        eigvals, eigvecs = np.linalg.eig(m)
    except np.linalg.LinAlgError:
        return None
    a1 = None
    for idx in range(3):
        if abs(eigvals[idx].imag) > 1e-9:
            continue
        v = np.real(eigvecs[:, idx])
        if 4.0 * v[0] * v[2] - v[1] ** 2 > 0:
            a1 = v
            break
    if a1 is None:
        return None
    coeffs = np.concatenate([a1, t @ a1])  # A, B, C, D, E, F on centered coords
    A, B, C, D, E, F = coeffs
    disc = B * B - 4.0 * A * C
    if disc >= 0:
        return None
    x0 = (2.0 * C * D - B * E) / disc
    y0 = (2.0 * A * E - B * D) / disc
    mu = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    q = np.array([[A, B / 2.0], [B / 2.0, C]])
    lam, frame = np.linalg.eigh(q)
    if mu * lam[0] >= 0 or mu * lam[1] >= 0:
        return None
    axes = np.sqrt(-mu / lam)  # descending: lam ascending -> axes descending
    a_semi, b_semi = float(axes[0]), float(axes[1])
    center = np.array([y0 + my, x0 + mx])
    ecc = math.sqrt(max(0.0, 1.0 - (b_semi / a_semi) ** 2))

    # Radial error in the axis-aligned frame.
    u = np.column_stack([x - center[1], y - center[0]]) @ frame
    theta = np.arctan2(u[:, 1], u[:, 0])
    expected = (a_semi * b_semi) / np.sqrt(
        (b_semi * np.cos(theta)) ** 2 + (a_semi * np.sin(theta)) ** 2
    )
    err = float(np.abs(np.hypot(u[:, 0], u[:, 1]) - expected).mean())
    return {
        "center": center,
        "a": a_semi,
        "b": b_semi,
        "eccentricity": ecc,
        "error": err,
    }


def _conic_boundaries(
    binary: np.ndarray, params: TransformParams
) -> List[Tuple[List[Tuple[int, int]], bool, bool]]:
    """Per component: (boundary pixels, passes circle gate, passes ellipse gate)."""
    results = []
    for component in _components(binary, connectivity=8):
        if len(component) < params.conic_min_component:
            continue
        boundary = _boundary(binary, component)
        pts = np.array(boundary)
        ellipse = _fit_ellipse(pts)
        ecc = ellipse["eccentricity"] if ellipse else 0.0
        circle = _fit_circle(pts)
        circle_ok = (
            circle is not None
            and circle[2] <= params.fit_error_gate * circle[1]
            and ecc < params.eccentricity_split
        )
        ellipse_ok = (
            ellipse is not None
            and ellipse["error"] <= params.fit_error_gate * ellipse["a"]
            and ecc >= params.eccentricity_split
        )
        results.append((boundary, circle_ok, ellipse_ok))
    return results


def _conic_render(binary, params, want_circle, want_ellipse) -> np.ndarray:
    out = np.zeros((SIDE, SIDE), dtype=bool)
    for boundary, circle_ok, ellipse_ok in _conic_boundaries(binary, params):
        if (want_circle and circle_ok) or (want_ellipse and ellipse_ok):
            for r, c in boundary:
                out[r, c] = True
    return _render(out)


def _circle(binary, params):
    return _conic_render(binary, params, want_circle=True, want_ellipse=False)


def _ellipse(binary, params):
    return _conic_render(binary, params, want_circle=False, want_ellipse=True)


def _ellipse_circle(binary, params):
    return _conic_render(binary, params, want_circle=True, want_ellipse=True)


def _enclosed_region(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    # Background not reachable from the frame border under 4-connectivity.
    background = binary == 0
    reached = np.zeros_like(background)
    stack = [
        (r, c)
        for r in range(SIDE)
        for c in range(SIDE)
        if (r in (0, SIDE - 1) or c in (0, SIDE - 1)) and background[r, c]
    ]
    for r, c in stack:
        reached[r, c] = True
    while stack:
        r, c = stack.pop()
        for dr, dc in _N4:
            nr, nc = r + dr, c + dc
            if 0 <= nr < SIDE and 0 <= nc < SIDE and background[nr, nc] and not reached[nr, nc]:
                reached[nr, nc] = True
                stack.append((nr, nc))
    return _render(background & ~reached)


def _convex_hull(binary: np.ndarray, params: TransformParams) -> np.ndarray:
    points = [(int(c), int(r)) for r, c in np.argwhere(binary > 0)]
    out = np.zeros((SIDE, SIDE), dtype=bool)
    if not points:
        return _render(out)
    hull = _monotone_chain(points)
    if len(hull) == 1:
        out[hull[0][1], hull[0][0]] = True
        return _render(out)
    for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1]):
        for r, c in _bresenham((y0, x0), (y1, x1)):
            out[r, c] = True
    return _render(out)


def _monotone_chain(points: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Convex hull of lattice points, counterclockwise without repeats."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _bresenham(p0: Tuple[int, int], p1: Tuple[int, int]) -> List[Tuple[int, int]]:
    r0, c0 = p0
    r1, c1 = p1
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    out = []
    r, c = r0, c0
    while True:
        out.append((r, c))
        if (r, c) == (r1, c1):
            break
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
    return out


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T
_GAUSS_3 = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 16.0


def _conv3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    p = np.pad(img, 1)
    h, w = img.shape
    out = np.zeros_like(img, dtype=np.float64)
    for i in range(3):
        for j in range(3):
            out += kernel[i, j] * p[i : i + h, j : j + w]
    return out


def harris_response(image: np.ndarray, k: float = DEFAULT_PARAMS.harris_k) -> np.ndarray:
    """Corner response det(M) - k*trace(M)^2 of the Gaussian-weighted
    structure tensor over 3x3 windows of Sobel gradients."""
    img = np.asarray(image, dtype=np.float64) / 255.0
    ix = _conv3(img, _SOBEL_X)
    iy = _conv3(img, _SOBEL_Y)
    sxx = _conv3(ix * ix, _GAUSS_3)
    syy = _conv3(iy * iy, _GAUSS_3)
    sxy = _conv3(ix * iy, _GAUSS_3)
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _corner(image: np.ndarray, params: TransformParams) -> np.ndarray:
    response = harris_response(image, params.harris_k)
    peak = response.max()
    if peak <= 0:
        return np.zeros((SIDE, SIDE), dtype=np.uint8)
    keep = response >= params.harris_threshold_ratio * peak
    out = np.where(keep, 255.0 * response / peak, 0.0)
    return np.rint(out).astype(np.uint8)


_BINARY_PROCEDURES = {
    PropertyId.STROKE: _stroke,
    PropertyId.CIRCLE: _circle,
    PropertyId.CROSSING: _crossing,
    PropertyId.ELLIPSE: _ellipse,
    PropertyId.ELLIPSE_CIRCLE: _ellipse_circle,
    PropertyId.ENDPOINT: _endpoint,
    PropertyId.ENCLOSED_REGION: _enclosed_region,
    PropertyId.LINE: _line,
    PropertyId.CONVEX_HULL: _convex_hull,
}


def apply_transform(
    prop: "PropertyId | str",
    image: np.ndarray,
    params: TransformParams = DEFAULT_PARAMS,
) -> np.ndarray:
    """Apply one property transform to a 28x28 intensity image.

    The identity property returns its input unchanged; every other
    property produces a fresh uint8 image emphasizing where the property
    holds. Accepts serialized property names and raises
    :class:`UnknownPropertyError` for names outside the enum.
    """
    if isinstance(prop, str) and not isinstance(prop, PropertyId):
        prop = parse_property(prop)
    image = np.asarray(image)
    if image.shape != (SIDE, SIDE):
        raise ValueError(f"expected a {SIDE}x{SIDE} image, got {image.shape}")
    if prop is PropertyId.IDENTITY:
        return image
    if prop is PropertyId.CORNER:
        return _corner(image, params)
    procedure = _BINARY_PROCEDURES.get(prop)
    if procedure is None:
        raise UnknownPropertyError(f"no transform registered for {prop!r}")
    return procedure(binarize(image, params.binarize_threshold), params)


def transform_stack(
    prop: "PropertyId | str",
    images: np.ndarray,
    params: TransformParams = DEFAULT_PARAMS,
) -> np.ndarray:
    """Apply one transform across a stack of images."""
    images = np.asarray(images)
    if (prop if isinstance(prop, PropertyId) else parse_property(prop)) is PropertyId.IDENTITY:
        return images
    if len(images) == 0:
        return images.copy()
    return np.stack([apply_transform(prop, img, params) for img in images])
