"""Structured grids over the unit ball and node-valued fields."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

INTERIOR = 0
BOUNDARY_ADJACENT = 1
EXTERIOR = 2

# nodes closer than this fraction of h to the sphere along an axis are
# treated as boundary (Dirichlet) nodes
THETA_SNAP = 1e-6


class Grid:
    """Uniform grid on [-1, 1]^N restricted to the open unit ball.

    ``M`` nodes per axis (odd, so the origin is a node), spacing ``h = 2/(M-1)``.
    Unknowns are the nodes strictly inside the ball, stored in lexicographic
    order of the full array (axis 0 slowest, axis N-1 = x_N fastest).
    """

    def __init__(self, dimension, M):
        if dimension not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {dimension}")
        if M < 5 or M % 2 == 0:
            raise ValueError(f"cells_per_axis M must be odd and >= 5, got {M}")
        self.dimension = N = int(dimension)
        self.M = M = int(M)
        self.h = 2.0 / (M - 1)
        # exact mirror symmetry: (2i - (M-1)) / (M-1) negates exactly
        self.axis = (2.0 * np.arange(M) - (M - 1)) / (M - 1)
        self.shape = (M,) * N

        mesh = np.meshgrid(*([self.axis] * N), indexing="ij")
        r2 = sum(c * c for c in mesh)
        inside = r2 < 1.0
        # arms[..., d, 0] toward -e_d, arms[..., d, 1] toward +e_d, in units of h
        while True:
            arms = np.ones(self.shape + (N, 2))
            for d in range(N):
                root = np.sqrt(np.maximum(mesh[d] ** 2 + 1.0 - r2, 0.0))
                for side, sign in ((0, -1), (1, 1)):
                    nb = np.roll(inside, -sign, axis=d)
                    edge = [slice(None)] * N
                    edge[d] = -1 if sign > 0 else 0
                    nb[tuple(edge)] = False
                    dist = (root - sign * mesh[d]) / self.h
                    arms[..., d, side] = np.where(nb, 1.0, np.minimum(dist, 1.0))
            snap = inside & (arms.min(axis=(-1, -2)) < THETA_SNAP)
            if not snap.any():
                break
            inside &= ~snap

        self.inside = inside
        self.nodes = np.flatnonzero(inside.ravel())
        self.n = self.nodes.size
        self.index = -np.ones(M ** N, dtype=np.int64)
        self.index[self.nodes] = np.arange(self.n)
        sub = np.unravel_index(self.nodes, self.shape)
        self.points = np.stack([self.axis[s] for s in sub], axis=-1)
        self.arms = arms.reshape(-1, N, 2)[self.nodes]
        self.mask = np.full(self.shape, EXTERIOR, dtype=np.int8)
        adjacent = (self.arms < 1.0).any(axis=(-1, -2))
        self.mask.ravel()[self.nodes] = np.where(adjacent, BOUNDARY_ADJACENT, INTERIOR)
        self._sub = sub

    def __repr__(self):
        return f"Grid(N={self.dimension}, M={self.M}, unknowns={self.n})"

    @property
    def cell_volume(self):
        return self.h ** self.dimension

    @cached_property
    def radius(self):
        return np.linalg.norm(self.points, axis=-1)

    @cached_property
    def origin(self):
        """Unknown index of the origin node."""
        mid = (self.M - 1) // 2
        flat = np.ravel_multi_index((mid,) * self.dimension, self.shape)
        return int(self.index[flat])

    @cached_property
    def reflection(self):
        """Permutation of unknowns induced by x_N -> -x_N."""
        sub = list(self._sub)
        sub[-1] = self.M - 1 - sub[-1]
        flat = np.ravel_multi_index(tuple(sub), self.shape)
        perm = self.index[flat]
        assert (perm >= 0).all()
        return perm

    @cached_property
    def upper(self):
        """Boolean selector of unknowns with x_N > 0."""
        return self.points[:, -1] > 0

    @cached_property
    def operator(self):
        """Sparse SPD matrix of -Laplace_h with homogeneous Dirichlet data.

        Interior nodes use the 2N+1 point stencil.  An arm of length theta*h
        that reaches the sphere contributes 1/(theta h^2) to the diagonal
        (unequal-arm boundary closure with a linear ghost value), which keeps
        the matrix symmetric and an M-matrix.
        """
        N, h2 = self.dimension, self.h * self.h
        diag = (1.0 / self.arms).sum(axis=(-1, -2)) / h2
        rows, cols = [], []
        for d in range(N):
            step = self.M ** (N - 1 - d)
            for side, sign in ((0, -1), (1, 1)):
                has = self.arms[:, d, side] == 1.0
                nb_flat = self.nodes[has] + sign * step
                nb = self.index[nb_flat]
                ok = nb >= 0
                rows.append(np.flatnonzero(has)[ok])
                cols.append(nb[ok])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        off = sp.csr_matrix(
            (np.full(rows.size, -1.0 / h2), (rows, cols)), shape=(self.n, self.n)
        )
        A = (off + sp.diags(diag)).tocsr()
        A.sort_indices()
        return A

    def field(self, values=None):
        if values is None:
            values = np.zeros(self.n)
        return ScalarField(self, np.asarray(values, dtype=float))

    def sample(self, func):
        """Field of ``func(points)`` at the unknowns."""
        return self.field(func(self.points))

    def to_full(self, values, fill=0.0):
        out = np.full(self.M ** self.dimension, fill, dtype=float)
        out[self.nodes] = values
        return out.reshape(self.shape)

    def integrate(self, values, weight=None):
        """Node-quadrature integral over the ball."""
        v = np.asarray(values, dtype=float)
        if weight is not None:
            v = v * weight
        return float(v.sum() * self.cell_volume)


@dataclass
class ScalarField:
    """Node values on a Grid; exterior nodes are implicitly zero."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"field has {self.values.shape} values, grid has {self.grid.n} unknowns"
            )

    def __add__(self, other):
        return self.grid.field(self.values + _vals(other))

    def __sub__(self, other):
        return self.grid.field(self.values - _vals(other))

    def __mul__(self, c):
        return self.grid.field(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.grid.field(-self.values)

    def copy(self):
        return self.grid.field(self.values.copy())

    def reflected(self):
        """u(x', -x_N)."""
        return self.grid.field(self.values[self.grid.reflection])

    def full(self):
        return self.grid.to_full(self.values)

    def l1(self):
        return self.grid.integrate(np.abs(self.values))

    def l2(self):
        return float(np.sqrt(self.grid.integrate(self.values ** 2)))

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


def discrete_l2(grid, values):
    return float(np.sqrt(np.sum(values * values) * grid.cell_volume))
