"""Matrix-valued fields over a truncated unitary dual.

A MatrixField holds one complex d_xi x d_xi block per irrep up to a
cutoff (invariant symbols, Fourier coefficients, weights).  A
SpatialSymbol holds one such block per quadrature node (symbols
a(x, xi), phases).  Blocks of a field flagged diagonal store only the
diagonal as 1-d arrays.
"""

import numpy as np

from .groups import get_group, AliasingError


class MatrixField:
    def __init__(self, group_id, irreps, blocks, diagonal=False):
        self.group_id = group_id
        self.irreps = list(irreps)
        self.blocks = list(blocks)
        self.diagonal = bool(diagonal)
        for xi, blk in zip(self.irreps, self.blocks):
            want = (xi.dim,) if self.diagonal else (xi.dim, xi.dim)
            if blk.shape != want:
                raise ValueError("block of shape %s for irrep of dim %d"
                                 % (blk.shape, xi.dim))

    @property
    def cutoff(self):
        return max(xi.casimir for xi in self.irreps)

    def dense(self, i):
        return np.diag(self.blocks[i]).astype(complex) if self.diagonal else self.blocks[i]

    def dense_blocks(self):
        return [self.dense(i) for i in range(len(self.irreps))]

    def to_dense(self):
        if not self.diagonal:
            return self
        return MatrixField(self.group_id, self.irreps, self.dense_blocks())

    def copy(self):
        return MatrixField(self.group_id, self.irreps,
                           [b.copy() for b in self.blocks], self.diagonal)

    def adjoint(self):
        if self.diagonal:
            return MatrixField(self.group_id, self.irreps,
                               [b.conj() for b in self.blocks], True)
        return MatrixField(self.group_id, self.irreps,
                           [b.conj().T for b in self.blocks])

    def matmul(self, other):
        _check_same_dual(self, other)
        if self.diagonal and other.diagonal:
            return MatrixField(self.group_id, self.irreps,
                               [a * b for a, b in zip(self.blocks, other.blocks)], True)
        return MatrixField(self.group_id, self.irreps,
                           [a @ b for a, b in zip(self.dense_blocks(),
                                                  other.dense_blocks())])

    def __add__(self, other):
        _check_same_dual(self, other)
        if self.diagonal and other.diagonal:
            return MatrixField(self.group_id, self.irreps,
                               [a + b for a, b in zip(self.blocks, other.blocks)], True)
        return MatrixField(self.group_id, self.irreps,
                           [a + b for a, b in zip(self.dense_blocks(),
                                                  other.dense_blocks())])

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c):
        return MatrixField(self.group_id, self.irreps,
                           [c * b for b in self.blocks], self.diagonal)

    def op_norms(self):
        """Operator norm of every block (array ordered like the irreps)."""
        if self.diagonal:
            return np.array([np.abs(b).max() if b.size else 0.0 for b in self.blocks])
        return np.array([np.linalg.norm(b, 2) for b in self.blocks])

    def hs_norm_sq(self):
        """sum_xi d_xi ||block||_HS^2."""
        return float(sum(xi.dim * (np.abs(b) ** 2).sum()
                         for xi, b in zip(self.irreps, self.blocks)))

    def truncate(self, cutoff_casimir):
        keep = [i for i, xi in enumerate(self.irreps)
                if xi.casimir <= cutoff_casimir + 1e-12]
        return MatrixField(self.group_id, [self.irreps[i] for i in keep],
                           [self.blocks[i] for i in keep], self.diagonal)

    @staticmethod
    def zeros(group_id, irreps):
        return MatrixField(group_id, irreps,
                           [np.zeros((xi.dim, xi.dim), complex) for xi in irreps])

    @staticmethod
    def identity(group_id, irreps):
        return MatrixField(group_id, irreps,
                           [np.ones(xi.dim, complex) for xi in irreps], diagonal=True)


def _check_same_dual(a, b):
    if a.group_id != b.group_id or len(a.irreps) != len(b.irreps):
        raise ValueError("fields live on different duals")


class SpatialSymbol:
    """x-dependent matrix field sampled on a quadrature grid.

    values[i] has shape (n_nodes, d_i, d_i) for the i-th irrep.
    """

    def __init__(self, grid, irreps, values):
        self.grid = grid
        self.irreps = list(irreps)
        self.values = list(values)
        n = grid.n_nodes
        for xi, v in zip(self.irreps, self.values):
            if v.shape != (n, xi.dim, xi.dim):
                raise ValueError("value block shape %s, expected %s"
                                 % (v.shape, (n, xi.dim, xi.dim)))

    @property
    def group_id(self):
        return self.grid.group.group_id

    @property
    def cutoff(self):
        return max(xi.casimir for xi in self.irreps)

    @staticmethod
    def from_invariant(field, grid):
        n = grid.n_nodes
        vals = [np.broadcast_to(blk, (n,) + blk.shape).copy()
                for blk in field.dense_blocks()]
        return SpatialSymbol(grid, field.irreps, vals)

    @staticmethod
    def from_callable(grid, irreps, fn):
        """fn(node_coords, irrep) -> (d, d) block; sampled at every node."""
        coords = grid.nodes()
        vals = []
        for xi in irreps:
            v = np.stack([np.asarray(fn(coords[i], xi), dtype=complex)
                          for i in range(coords.shape[0])])
            vals.append(v)
        return SpatialSymbol(grid, irreps, vals)

    def at_node(self, i):
        return MatrixField(self.group_id, self.irreps,
                           [v[i] for v in self.values])

    def invariant_part(self):
        """Haar average over x (equals the field itself for multipliers)."""
        w = self.grid.weights()
        return MatrixField(self.group_id, self.irreps,
                           [np.einsum("n,nij->ij", w, v) for v in self.values])

    def adjoint_pointwise(self):
        return SpatialSymbol(self.grid, self.irreps,
                             [v.conj().transpose(0, 2, 1) for v in self.values])

    def matmul(self, other):
        if self.grid is not other.grid or len(self.irreps) != len(other.irreps):
            raise ValueError("symbols live on different grids or duals")
        return SpatialSymbol(self.grid, self.irreps,
                             [a @ b for a, b in zip(self.values, other.values)])

    def __add__(self, other):
        return SpatialSymbol(self.grid, self.irreps,
                             [a + b for a, b in zip(self.values, other.values)])

    def __sub__(self, other):
        return SpatialSymbol(self.grid, self.irreps,
                             [a - b for a, b in zip(self.values, other.values)])

    def scale(self, c):
        return SpatialSymbol(self.grid, self.irreps, [c * v for v in self.values])

    def sup_op_norm(self, casimir_cutoff=None):
        """sup over nodes and irreps (optionally <= a casimir cutoff) of ||.||_op."""
        out = 0.0
        for xi, v in zip(self.irreps, self.values):
            if casimir_cutoff is not None and xi.casimir > casimir_cutoff + 1e-12:
                continue
            out = max(out, np.linalg.norm(v, 2, axis=(1, 2)).max())
        return out

    def truncate(self, cutoff_casimir):
        keep = [i for i, xi in enumerate(self.irreps)
                if xi.casimir <= cutoff_casimir + 1e-12]
        return SpatialSymbol(self.grid, [self.irreps[i] for i in keep],
                             [self.values[i] for i in keep])


# --------------------------------------------------------------------------
# transforms on fields
# --------------------------------------------------------------------------

def fourier_transform(samples, grid, cutoff):
    """Matrix Fourier transform of grid samples, up to the index cutoff.

    cutoff is |k|_inf on the torus and the top spin l on SU(2).
    """
    g = grid.group
    irreps = g.enumerate_dual(cutoff)
    if g.group_id == "SU2":
        blocks = g.fourier_transform_blocks(samples, grid, cutoff)
        return MatrixField(g.group_id, irreps, blocks)
    box = g.fourier_transform_box(samples, grid, cutoff)
    K = int(cutoff)
    blocks = [box[tuple(k + K for k in xi.label)].reshape(1, 1) for xi in irreps]
    return MatrixField(g.group_id, irreps, blocks)


def inverse_transform(field, grid):
    """Samples of sum_xi d_xi Tr[xi(x) fhat(xi)] at the grid nodes."""
    g = grid.group
    if g.group_id == "SU2":
        two_lc = max(xi.label for xi in field.irreps)
        blocks = [np.zeros((two_l + 1, two_l + 1), complex)
                  for two_l in range(two_lc + 1)]
        for xi, blk in zip(field.irreps, field.dense_blocks()):
            blocks[xi.label] = blk
        return g.inverse_transform_blocks(blocks, grid)
    K = max(max(abs(k) for k in xi.label) for xi in field.irreps)
    box = np.zeros((2 * K + 1,) * g.n, dtype=complex)
    for xi, blk in zip(field.irreps, field.blocks):
        box[tuple(k + K for k in xi.label)] = blk.reshape(())  # d=1
    return g.inverse_transform_box(box, grid)


def plancherel_norm(field):
    """(sum_xi d_xi ||fhat(xi)||_HS^2)^{1/2}."""
    return float(np.sqrt(field.hs_norm_sq()))


def grid_l2_norm(samples, grid):
    w = grid.weights()
    return float(np.sqrt((w * np.abs(np.asarray(samples)) ** 2).sum()))
