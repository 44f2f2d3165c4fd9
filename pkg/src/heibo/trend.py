"""Complete polynomial trend bases and BIC order selection.

Monomials are enumerated degree by degree.  Within one degree they are ordered
by the number of distinct variables involved, then lexicographically, which
gives ``1, x1, ..., xd, x1^2, ..., xd^2, x1 x2, ..., x(d-1) xd`` for order two.
Every order's basis is therefore a prefix of the next order's basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def monomial_exponents(order: int, dim: int) -> tuple:
    """Exponent tuples of every monomial of total degree ``<= order``."""
    if order < 0 or dim < 1:
        raise ValueError("need order >= 0 and dim >= 1")
    out = []
    for degree in range(order + 1):
        terms = []
        for combo in combinations_with_replacement(range(dim), degree):
            exps = [0] * dim
            for j in combo:
                exps[j] += 1
            terms.append(tuple(exps))
        terms.sort(key=lambda e: (sum(1 for v in e if v), tuple(-v for v in e)))
        out.extend(terms)
    return tuple(out)


def basis_count(order: int, dim: int) -> int:
    if order < 0 or dim < 1:
        raise ValueError("need order >= 0 and dim >= 1")
    return comb(dim + order, order)


@dataclass(frozen=True)
class TrendModel:
    order: int
    dim: int
    exponents: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 0 or self.dim < 1:
            raise ValueError("need order >= 0 and dim >= 1")
        object.__setattr__(self, "exponents", monomial_exponents(self.order, self.dim))

    @property
    def q(self) -> int:
        return len(self.exponents)

    def design_matrix(self, X) -> np.ndarray:
        """Rows ``p(x_i)`` for each row of ``X``; shape ``(m, q)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points have {X.shape[1]} coordinates, trend expects {self.dim}")
        E = np.asarray(self.exponents, dtype=float)  # (q, d)
        if self.order == 0:
            return np.ones((X.shape[0], 1))
        return np.prod(X[:, None, :] ** E[None, :, :], axis=2)


def basis_eval(model: TrendModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ValueError(f"dimension mismatch: expected a point with {model.dim} coordinates")
    return model.design_matrix(x[None, :])[0]


def bic_value(data, kernel, order: int, nugget: float = 1e-8) -> float:
    from .gp import profile_loglik

    X = np.atleast_2d(data.X)
    n, d = X.shape
    model = TrendModel(order, d)
    ll = profile_loglik(data, kernel, model, nugget)
    return -2.0 * ll + model.q * np.log(n)


def select_order_bic(data, kernel, candidates=(0, 1, 2), nugget: float = 1e-8) -> int:
    """Pick the polynomial order minimizing ``-2 loglik + q log n``.

    Orders with ``q >= n`` are skipped; ties go to the smaller order.
    """
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("empty candidate list")
    n, d = np.atleast_2d(data.X).shape
    best, best_val = None, np.inf
    for order in candidates:
        if basis_count(order, d) >= n:
            continue
        val = bic_value(data, kernel, order, nugget)
        if best is None or val < best_val:
            best, best_val = order, val
    if best is None:
        raise ValueError(f"no feasible trend order among {candidates} for n={n}, d={d}")
    return best
