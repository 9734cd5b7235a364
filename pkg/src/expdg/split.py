"""The linear/nonlinear split R(u) = L u + N(u) shared by the DG operators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import FieldState


def _wrap(fn: Callable[[np.ndarray], np.ndarray], template):
    def apply(u):
        if isinstance(u, FieldState) and isinstance(template, FieldState):
            return template.with_vector(fn(u.as_vector()))
        return fn(np.asarray(u, dtype=float).ravel())
    return apply


@dataclass(eq=False)
class SplitOperator:
    """L (linear, frozen at a reference state) and N (nonlinear remainder).

    ``apply_L`` and ``apply_N`` act on flat vectors; the ``L``/``N``/``rhs``
    wrappers also accept FieldStates and return the same type.
    """

    reference: FieldState | np.ndarray
    apply_L: Callable[[np.ndarray], np.ndarray]
    apply_N: Callable[[np.ndarray], np.ndarray]
    quadrature: str = "collocation"

    @property
    def size(self) -> int:
        ref = self.reference
        return ref.values.size if isinstance(ref, FieldState) else np.asarray(ref).size

    def L(self, u):
        return _wrap(self.apply_L, self.reference)(u)

    def N(self, u):
        return _wrap(self.apply_N, self.reference)(u)

    def rhs(self, u):
        return _wrap(lambda v: self.apply_L(v) + self.apply_N(v), self.reference)(u)
