"""Embedding-space geometry.

Unit-vector utilities, deterministic derivation of orthogonal pivot
directions from a seed, uniform sphere sampling, and the density of the
angle between independent uniform directions in d dimensions (which is what
concentrates cosine scores around zero in high dimension and justifies the
zero prior median used by offline detection).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, pi
from typing import TYPE_CHECKING, Optional

import numpy as np

from pmark.errors import DimMismatchError, DomainError, InvalidShapeError, ZeroVectorError
from pmark.rng import DOMAIN_PIVOTS, Stream, stream

if TYPE_CHECKING:  # pragma: no cover
    from pmark.keys import MasterKey

NORM_TOLERANCE = 1e-9
ORTHOGONALITY_TOLERANCE = 1e-8
_ZERO_NORM = 1e-12


def normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||, as float64. Raises ZeroVectorError for ||v|| < 1e-12."""
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm < _ZERO_NORM:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:.3e}")
    return arr / norm


def cosine(u: np.ndarray, w: np.ndarray) -> float:
    """Inner product of two unit vectors, clamped to [-1, 1]."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(w, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(a @ b, -1.0, 1.0))


@dataclass(frozen=True)
class PivotSet:
    """b mutually orthogonal unit vectors in R^d, with their derivation seed.

    ``matrix`` has shape (b, d); row j-1 is channel j's pivot. Pivots are
    never serialized: they are always re-derived from the seed, so the
    derivation below is part of the on-disk key format.
    """

    matrix: np.ndarray
    derivation_seed: int

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def channel_count(self) -> int:
        return self.matrix.shape[0]

    def pivot(self, j: int) -> np.ndarray:
        """Pivot for 1-based channel index j."""
        from pmark.errors import ChannelOutOfRangeError

        if not 1 <= j <= self.channel_count:
            raise ChannelOutOfRangeError(f"channel {j} outside 1..{self.channel_count}")
        return self.matrix[j - 1]

    def gram_defect(self) -> float:
        """max |G - I| over the Gram matrix G; ~0 for a valid pivot set."""
        gram = self.matrix @ self.matrix.T
        return float(np.max(np.abs(gram - np.eye(self.channel_count))))


def generate_pivots(key: "MasterKey") -> PivotSet:
    """Derive the orthogonal pivot set for a master key.

    Draws a d x b matrix of i.i.d. standard normals from the key's pivot
    stream (row-major fill), takes the reduced Householder QR factorization,
    and flips column signs so every diagonal entry of R is non-negative.
    That sign convention makes the result unique, so the same key always
    reproduces bit-identical pivots.
    """
    d, b = key.dim, key.channels
    if b > d:
        raise InvalidShapeError(f"cannot fit {b} orthogonal channels in dimension {d}")
    gauss = stream(key.seed, DOMAIN_PIVOTS).normals(d * b).reshape(d, b)
    q, r = np.linalg.qr(gauss, mode="reduced")
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return PivotSet(matrix=np.ascontiguousarray((q * signs).T), derivation_seed=key.seed)


def angle_density(theta, d: int):
    """Density at ``theta`` of the angle between independent uniform
    directions on the (d-1)-sphere:

        p_d(theta) = Gamma(d/2) / (Gamma((d-1)/2) * sqrt(pi)) * sin(theta)**(d-2)

    on [0, pi]. Scalar or array ``theta``; integrates to 1 for every d >= 2.
    """
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    arr = np.asarray(theta, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > pi):
        raise DomainError("theta outside [0, pi]")
    log_coeff = lgamma(d / 2.0) - lgamma((d - 1) / 2.0) - 0.5 * np.log(pi)
    if d == 2:
        out = np.full_like(arr, np.exp(log_coeff))
        return float(out) if np.isscalar(theta) else out
    sin_theta = np.sin(arr)
    with np.errstate(divide="ignore"):
        log_density = log_coeff + (d - 2) * np.log(sin_theta)
    out = np.where(sin_theta > 0.0, np.exp(log_density), 0.0)
    return float(out) if np.isscalar(theta) else out


def sample_sphere(rng: Stream, d: int, size: Optional[int] = None) -> np.ndarray:
    """Uniform samples on the unit sphere S^(d-1) via normalized Gaussians.

    Returns shape (d,) for ``size=None``, else (size, d).
    """
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    n = 1 if size is None else int(size)
    g = rng.normals(n * d).reshape(n, d)
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms < _ZERO_NORM):  # probability zero, but stay total
        bad = norms < _ZERO_NORM
        g[bad] = rng.normals(int(bad.sum()) * d).reshape(-1, d)
        norms = np.linalg.norm(g, axis=1)
    g /= norms[:, None]
    return g[0] if size is None else g
