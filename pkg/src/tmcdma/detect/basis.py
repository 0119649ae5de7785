"""Change-of-basis machinery.

A local frame is given by d unit vectors expressed in global coordinates.
The global-to-local transformation has entry ``T[r, c] = <e_c, l_r>``, the
dot product of global axis c with local vector r, so its rows are simply
the local unit vectors. A point with global coordinates ``x`` has local
coordinates ``T @ x``; for an orthonormal frame ``T.T`` maps back.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ..errors import BasisError, ContractError


@dataclass(frozen=True)
class TransformationMatrix:
    T: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=float)
        if T.ndim != 2:
            raise ContractError("transformation matrix must be 2-D")
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    @property
    def shape(self):
        return self.T.shape

    def transpose(self):
        """Inverse map for an orthonormal frame."""
        return TransformationMatrix(self.T.T)

    def is_orthonormal(self, atol=1e-10):
        d = self.T.shape[1]
        return (self.T.shape[0] == d
                and np.allclose(self.T.T @ self.T, np.eye(d), rtol=0, atol=atol))


@dataclass(frozen=True)
class ConstellationPoint:
    """Noiseless observation ``T b`` for one candidate bit pattern.

    ``complexity_weight`` is a free annotation slot; nothing in the
    detectors reads it.
    """
    coordinates: np.ndarray
    label: np.ndarray
    complexity_weight: float = field(default=0.0)


def build_change_of_basis(local_basis, atol=1e-9):
    """Build the global-to-local transformation for a set of unit vectors.

    Parameters
    ----------
    local_basis : sequence of array_like
        The local unit vectors, each given in global coordinates. All must
        share the same dimension d.

    Returns
    -------
    TransformationMatrix
        ``T[r, c]`` is the dot product of global axis ``c`` with local vector
        ``r``.

    Raises
    ------
    BasisError
        If any vector deviates from unit length by more than ``atol``.
    """
    vecs = np.atleast_2d(np.asarray(local_basis, dtype=float))
    d = vecs.shape[1]
    axes = np.eye(d)
    for r, v in enumerate(vecs):
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > atol:
            raise BasisError(f"local basis vector {r} has norm {norm:.12g}")
    T = np.array([[axes[c] @ vecs[r] for c in range(d)]
                  for r in range(vecs.shape[0])])
    return TransformationMatrix(T)


def compose_transformations(T, U):
    """Composite ``T o U``: apply ``U`` first, then ``T``."""
    if T.shape[1] != U.shape[0]:
        raise ContractError(
            f"cannot compose {T.shape} after {U.shape}: inner dimensions differ")
    return TransformationMatrix(T.T @ U.T)


def apply_transformation(T, x):
    """Map a vector (or a stack of row vectors) through ``T``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != T.shape[1]:
        raise ContractError(
            f"vector of length {x.shape[-1]} does not fit a {T.shape} transformation")
    if x.ndim == 1:
        return T.T @ x
    return x @ T.T.T


def constellation(T):
    """Enumerate ``{T b : b in {-1, +1}^d}`` in lexicographic label order."""
    d = T.shape[1]
    pts = []
    for bits in product((-1, 1), repeat=d):
        b = np.array(bits, dtype=np.int8)
        pts.append(ConstellationPoint(apply_transformation(T, b), b))
    return pts
