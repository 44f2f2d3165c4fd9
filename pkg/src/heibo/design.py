"""Maximin Latin hypercube designs and box-domain scaling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

MAX_SWAPS = 5000


@dataclass(frozen=True)
class Domain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ValueError("domain bounds must be finite with lower < upper")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @classmethod
    def cube(cls, lo: float, hi: float, d: int) -> "Domain":
        return cls((lo,) * d, (hi,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))


def _check(points, domain):
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != domain.d:
        raise ValueError(f"domain mismatch: points have {points.shape[-1]} coordinates, domain has {domain.d}")
    return points


def scale(points, domain: Domain) -> np.ndarray:
    """Map unit-cube points into ``domain``."""
    points = _check(points, domain)
    return domain.lo + points * (domain.hi - domain.lo)


def unscale(points, domain: Domain) -> np.ndarray:
    """Inverse of :func:`scale`."""
    points = _check(points, domain)
    return (points - domain.lo) / (domain.hi - domain.lo)


def min_distance(X) -> float:
    X = np.atleast_2d(X)
    if X.shape[0] < 2:
        return np.inf
    return float(pdist(X).min())


def _random_lhd(rng, n, d):
    mid = (np.arange(n) + 0.5) / n
    return np.stack([rng.permutation(mid) for _ in range(d)], axis=1)


def maximin_lhd(n: int, d: int, seed: int = 0, restarts: int = 50, swaps=None) -> np.ndarray:
    """Centered Latin hypercube on ``[0, 1]^d`` with large minimum interpoint distance.

    ``restarts`` random designs are improved in parallel by hill-climbing on
    random within-column swaps of two rows.  A swap is kept when it increases
    the minimum pairwise distance, or keeps it and reduces the number of pairs
    attaining it.  The best design over restarts is returned.

    ``swaps`` defaults to ``min(10 n^2, 5000)`` proposals per restart.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    R = max(1, int(restarts))
    if swaps is None:
        swaps = min(10 * n * n, MAX_SWAPS)
    X = np.stack([_random_lhd(rng, n, d) for _ in range(R)])  # (R, n, d)
    diff = X[:, :, None, :] - X[:, None, :, :]
    D2 = np.einsum("rijk,rijk->rij", diff, diff)
    eye = np.eye(n, dtype=bool)
    D2[:, eye] = np.inf
    best = D2.min(axis=(1, 2))
    count = (D2 == best[:, None, None]).sum(axis=(1, 2))
    ridx = np.arange(R)
    for _ in range(int(swaps) if d > 1 or n > 2 else 0):
        col = rng.integers(d, size=R)
        i1 = rng.integers(n, size=R)
        i2 = (i1 + rng.integers(1, n, size=R)) % n
        Xn = X.copy()
        v1 = Xn[ridx, i1, col].copy()
        Xn[ridx, i1, col] = Xn[ridx, i2, col]
        Xn[ridx, i2, col] = v1
        row1 = ((Xn[ridx, i1][:, None, :] - Xn) ** 2).sum(axis=2)
        row2 = ((Xn[ridx, i2][:, None, :] - Xn) ** 2).sum(axis=2)
        row1[ridx, i1] = np.inf
        row2[ridx, i2] = np.inf
        Dn = D2.copy()
        Dn[ridx, i1, :] = row1
        Dn[ridx, :, i1] = row1
        Dn[ridx, i2, :] = row2
        Dn[ridx, :, i2] = row2
        new_best = Dn.min(axis=(1, 2))
        new_count = (Dn == new_best[:, None, None]).sum(axis=(1, 2))
        accept = (new_best > best) | ((new_best == best) & (new_count < count))
        if accept.any():
            X[accept] = Xn[accept]
            D2[accept] = Dn[accept]
            best = np.where(accept, new_best, best)
            count = np.where(accept, new_count, count)
    order = np.lexsort((count, -best))
    return X[order[0]].copy()
