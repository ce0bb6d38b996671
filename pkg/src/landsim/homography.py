"""Descriptor matching and planar homography estimation.

Implements nearest-neighbour descriptor matching with a ratio test,
the normalized DLT homography solver, a RANSAC wrapper around it, and
perspective projection of a rectangular template into the scene image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    EmptyInput,
    InsufficientMatches,
    NoConsensus,
    ProjectiveDegeneracy,
)


@dataclass
class FeatureSet:
    """2D keypoints with one fixed-dimension descriptor per point."""

    points: np.ndarray      # (n, 2) pixel coordinates
    descriptors: np.ndarray  # (n, k)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.descriptors = np.asarray(self.descriptors, dtype=float)
        if len(self.points) != len(self.descriptors):
            raise ValueError("points and descriptors must have equal length")
        if self.descriptors.ndim != 2 or self.descriptors.shape[1] < 2:
            raise ValueError("descriptors must be (n, k) with k >= 2")

    @property
    def k(self) -> int:
        return self.descriptors.shape[1]

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class MatchSet:
    """Pairs of (template_index, scene_index) with their descriptor distances."""

    pairs: np.ndarray      # (m, 2) int
    distances: np.ndarray  # (m,)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class Homography:
    """3x3 projective map, normalized so h[2, 2] == 1."""

    h: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(self.h[2, 2]) > 1e-12:
            self.h = self.h / self.h[2, 2]
        if abs(np.linalg.det(self.h)) <= 1e-12:
            raise DegenerateConfiguration("homography is not invertible")


@dataclass
class TemplateSpec:
    """Pixel dimensions of the landing-pad template image.

    ``physical_side`` is the real pad side length in meters; only the
    world simulator uses it.
    """

    w_t: float
    h_t: float
    physical_side: float = 1.0

    def __post_init__(self):
        if self.w_t <= 0 or self.h_t <= 0:
            raise ValueError("template dimensions must be positive")

    def corners_and_centroid(self) -> np.ndarray:
        """Four corners (TL, TR, BR, BL) followed by the centroid, (5, 2)."""
        w, h = self.w_t, self.h_t
        return np.array([
            [0.0, 0.0], [w, 0.0], [w, h], [0.0, h], [w / 2.0, h / 2.0],
        ])


def match_descriptors(template: FeatureSet, scene: FeatureSet,
                      ratio: float = 0.8) -> MatchSet:
    """Match each template descriptor to its nearest scene descriptor.

    Nearest neighbours under Euclidean distance, filtered by Lowe's
    ratio test: a pair survives only when nearest/second-nearest < ratio
    (pairs are always kept when the scene has a single feature).
    """
    if len(template) == 0 or len(scene) == 0:
        raise EmptyInput("feature sets must be non-empty")
    if template.k != scene.k:
        raise DimensionMismatch(
            f"descriptor dims differ: {template.k} vs {scene.k}")
    if not 0 < ratio <= 1:
        raise ValueError("ratio must be in (0, 1]")

    # all-pairs distance table; n and m are small in this pipeline
    diff = template.descriptors[:, None, :] - scene.descriptors[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))

    n = len(template)
    best = np.argmin(dist, axis=1)
    d_best = dist[np.arange(n), best]
    if dist.shape[1] == 1:
        keep = np.ones(n, dtype=bool)
    else:
        two = np.partition(dist, 1, axis=1)[:, :2]
        d_second = two[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = d_best / d_second
        # 0/0 (duplicate zero-distance neighbours) is ambiguous unless
        # the ratio test is disabled
        r = np.where(np.isnan(r), 0.0 if ratio == 1.0 else 1.0, r)
        keep = r < ratio

    idx = np.flatnonzero(keep)
    pairs = np.column_stack([idx, best[idx]])
    return MatchSet(pairs.astype(int), d_best[idx])


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity transform sending pts to zero mean and mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.sqrt((centered ** 2).sum(axis=1)).mean()
    scale = np.sqrt(2.0) / mean_dist if mean_dist > 1e-12 else 1.0
    t = np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    normalized = centered * scale
    return normalized, t


def estimate_homography_dlt(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Least-squares homography from src -> dst point correspondences.

    Normalized DLT: both point sets are Hartley-normalized, the 2n x 9
    design matrix is solved by SVD, and the result is denormalized and
    scaled so h[2, 2] = 1.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise InsufficientMatches(f"need >= 4 correspondences, got {n}")

    src_n, t_src = _hartley_normalization(src)
    dst_n, t_dst = _hartley_normalization(dst)

    x, y = src_n[:, 0], src_n[:, 1]
    xp, yp = dst_n[:, 0], dst_n[:, 1]
    zero = np.zeros(n)
    one = np.ones(n)
    a = np.empty((2 * n, 9))
    a[0::2] = np.column_stack([-x, -y, -one, zero, zero, zero,
                               x * xp, y * xp, xp])
    a[1::2] = np.column_stack([zero, zero, zero, -x, -y, -one,
                               x * yp, y * yp, yp])

    _, s, vt = np.linalg.svd(a)
    # rank < 8 means the solution space is >1-dimensional: degenerate input
    if s[min(7, len(s) - 1)] < 1e-9 * s[0]:
        raise DegenerateConfiguration("design matrix is rank-deficient")

    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(h[2, 2]) < 1e-12:
        raise DegenerateConfiguration("h33 vanished; degenerate geometry")
    return Homography(h)


def symmetric_transfer_error(h: Homography, src: np.ndarray,
                             dst: np.ndarray) -> np.ndarray:
    """Forward plus inverse reprojection error per correspondence (px)."""
    h_inv = np.linalg.inv(h.h)
    fwd = _apply(h.h, src) - dst
    bwd = _apply(h_inv, dst) - src
    return np.sqrt((fwd ** 2).sum(axis=1)) + np.sqrt((bwd ** 2).sum(axis=1))


def _apply(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    ones = np.ones((len(pts), 1))
    mapped = (h @ np.hstack([pts, ones]).T).T
    w = mapped[:, 2]
    # leave non-finite rows for the caller's threshold test to reject
    with np.errstate(divide="ignore", invalid="ignore"):
        return mapped[:, :2] / w[:, None]


def ransac_homography(src: np.ndarray, dst: np.ndarray,
                      inlier_threshold_px: float = 3.0,
                      max_iters: int = 500,
                      seed: int = 0) -> tuple[Homography, np.ndarray]:
    """Robust homography fit: minimal DLT hypotheses + consensus scoring.

    Samples 4 correspondences per iteration, scores by symmetric
    transfer error, keeps the largest consensus set and refits the DLT
    on all of its inliers. Deterministic for a fixed seed.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    n = len(src)
    if n < 4:
        raise NoConsensus(f"need >= 4 correspondences, got {n}")
    if inlier_threshold_px <= 0:
        raise ValueError("inlier threshold must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    rng = np.random.default_rng(seed)
    # all sample index sets drawn up front; hypotheses are evaluated in
    # chunks so clean data exits after the first batch
    samples = np.argsort(rng.random((max_iters, n)), axis=1)[:, :4]

    best_mask = None
    best_count = 0
    any_valid = False
    chunk = 64
    for lo in range(0, max_iters, chunk):
        idx = samples[lo:lo + chunk]
        err, valid = _score_minimal_sets(src, dst, idx)
        if not valid.any():
            continue
        any_valid = True
        inliers = valid[:, None] & (err < inlier_threshold_px)
        counts = inliers.sum(axis=1)
        best = int(np.argmax(counts))
        if counts[best] > best_count:
            best_count = int(counts[best])
            best_mask = inliers[best]
        if best_count == n:
            break  # every pair already in consensus; more sampling is moot

    if not any_valid:
        raise DegenerateConfiguration("every sampled minimal set was degenerate")
    if best_mask is None or best_count < 4:
        raise NoConsensus(f"best consensus has {best_count} inliers")

    refined = estimate_homography_dlt(src[best_mask], dst[best_mask])
    # re-classify against the refit model; a noisy minimal hypothesis
    # under-counts inliers near the threshold
    err = symmetric_transfer_error(refined, src, dst)
    mask = np.isfinite(err) & (err < inlier_threshold_px)
    if mask.sum() >= 4 and mask.sum() > best_mask.sum():
        refined = estimate_homography_dlt(src[mask], dst[mask])
        best_mask = mask
    return refined, best_mask


def _score_minimal_sets(src: np.ndarray, dst: np.ndarray,
                        idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fit a homography to each 4-point sample and score all pairs.

    Minimal solver: the exact 8x8 linear system with h33 fixed to 1
    (cheap and sufficient for hypothesis generation; the consensus
    refit uses the normalized DLT). Returns (symmetric transfer errors
    (m, n), validity mask (m,)); degenerate samples are invalid.
    """
    m = len(idx)
    n = len(src)
    # one global similarity normalization per point set keeps the 8x8
    # systems well-scaled so an absolute determinant test is meaningful
    src_n, t_src = _hartley_normalization(src)
    dst_n, t_dst = _hartley_normalization(dst)
    src4 = src_n[idx]
    dst4 = dst_n[idx]

    x, y = src4[..., 0], src4[..., 1]
    xp, yp = dst4[..., 0], dst4[..., 1]
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    a = np.empty((m, 8, 8))
    a[:, 0::2] = np.stack([x, y, one, zero, zero, zero,
                           -x * xp, -y * xp], axis=2)
    a[:, 1::2] = np.stack([zero, zero, zero, x, y, one,
                           -x * yp, -y * yp], axis=2)
    b = np.empty((m, 8))
    b[:, 0::2] = xp
    b[:, 1::2] = yp

    det_a = np.linalg.det(a)
    # near-singular hypotheses that slip through just score few inliers
    valid = np.abs(det_a) > 1e-10
    a_safe = np.where(valid[:, None, None], a, np.eye(8))
    h8 = np.linalg.solve(a_safe, b[..., None])[..., 0]

    h_n = np.empty((m, 3, 3))
    h_n[:, :2] = h8[:, :6].reshape(m, 2, 3)
    h_n[:, 2, :2] = h8[:, 6:]
    h_n[:, 2, 2] = 1.0
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    det = np.linalg.det(h)
    valid &= np.abs(det) > 1e-12
    h_safe = np.where(valid[:, None, None], h, np.eye(3))
    h_inv = np.linalg.inv(h_safe)

    ones = np.ones((n, 1))
    src_h = np.hstack([src, ones]).T   # (3, n)
    dst_h = np.hstack([dst, ones]).T

    with np.errstate(divide="ignore", invalid="ignore"):
        fwd = h_safe @ src_h           # (m, 3, n)
        fwd_xy = fwd[:, :2] / fwd[:, 2][:, None, :]
        bwd = h_inv @ dst_h
        bwd_xy = bwd[:, :2] / bwd[:, 2][:, None, :]
    err = (np.linalg.norm(fwd_xy - dst.T[None], axis=1)
           + np.linalg.norm(bwd_xy - src.T[None], axis=1))
    err = np.where(np.isfinite(err), err, np.inf)
    return err, valid


def project_template(h: Homography, t: TemplateSpec) -> np.ndarray:
    """Map the template's 4 corners and centroid into the scene, (5, 2).

    The centroid is the mapped template center, not the average of the
    mapped corners (the two differ under perspective).
    """
    pts = t.corners_and_centroid()
    ones = np.ones((5, 1))
    mapped = (h.h @ np.hstack([pts, ones]).T).T
    w = mapped[:, 2]
    if np.any(np.abs(w) < 1e-9):
        raise ProjectiveDegeneracy("a template point mapped to infinity")
    return mapped[:, :2] / w[:, None]
