"""Bivariate polynomials with symbolic derivatives."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True, eq=False)
class Poly2D:
    """p(x, y) = sum_{i,j} coef[i, j] x^i y^j."""

    coef: np.ndarray

    @classmethod
    def from_terms(cls, terms):
        terms = [(int(i), int(j), float(c)) for i, j, c in terms]
        if any(i < 0 or j < 0 for i, j, _ in terms):
            raise ValueError("negative exponent in polynomial term")
        deg_x = max((i for i, _, _ in terms), default=0)
        deg_y = max((j for _, j, _ in terms), default=0)
        coef = np.zeros((deg_x + 1, deg_y + 1))
        for i, j, c in terms:
            coef[i, j] += c
        return cls(coef)

    @classmethod
    def constant(cls, value):
        return cls(np.array([[float(value)]]))

    def __call__(self, x, y):
        return P.polyval2d(x, y, self.coef)

    def dx(self):
        if self.coef.shape[0] == 1:
            return Poly2D(np.zeros((1, 1)))
        return Poly2D(P.polyder(self.coef, axis=0))

    def dy(self):
        if self.coef.shape[1] == 1:
            return Poly2D(np.zeros((1, 1)))
        return Poly2D(P.polyder(self.coef, axis=1))

    @property
    def is_zero(self):
        return not np.any(self.coef)

    @property
    def degree(self):
        nz = np.argwhere(self.coef != 0)
        if nz.size == 0:
            return 0
        return int(nz.sum(axis=1).max())

    def terms(self):
        return [[int(i), int(j), float(self.coef[i, j])] for i, j in np.argwhere(self.coef != 0)]
