"""Representation theory, Haar quadrature and matrix Fourier transforms.

Two groups are supported: the torus T^n and SU(2).  Points are given in
angle coordinates (x in [0, 2pi)^n for the torus; Euler angles
(phi, theta, psi) in [0,2pi) x [0,pi] x [0,4pi) for SU(2)).  The
normalised Haar measure is dx/(2pi)^n resp. sin(theta) dphi dtheta dpsi
/ (16 pi^2).

Fourier conventions:

    fhat(xi) = int_G f(x) xi(x)^* dx,
    f(x)     = sum_xi d_xi Tr[ xi(x) fhat(xi) ].

Grids integrate products of matrix coefficients up to their declared
band limit exactly (uniform nodes on the torus; uniform in phi/psi and
Gauss-Legendre in cos(theta) on SU(2)).
"""

import numpy as np
from dataclasses import dataclass, field
from functools import lru_cache

from .wigner import (
    jmatrices,
    wigner_d,
    su2_matrix,
    su2_exp,
    euler_from_su2,
)


@dataclass(frozen=True)
class Irrep:
    """A class of irreducible unitary representations.

    label is the frequency vector (tuple of ints) on T^n and the integer
    two_l = 2l on SU(2); casimir is the bi-invariant Laplacian eigenvalue
    (|k|^2 resp. l(l+1)).
    """

    group_id: str
    label: object
    dim: int
    casimir: float

    @property
    def weight(self):
        """The elliptic weight <xi> = (1 + casimir)^{1/2}."""
        return float(np.sqrt(1.0 + self.casimir))


class GroupPoint:
    """A group element in the coordinates of its group's fundamental domain."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        self.coords = np.asarray(coords, dtype=float)

    def __repr__(self):
        return "GroupPoint(%s)" % np.array2string(self.coords, precision=6)


class ResourceError(RuntimeError):
    """A requested grid or band limit exceeds the configured memory budget."""


class AliasingError(ValueError):
    """A transform was requested beyond the exactness range of its grid."""


MAX_GRID_NODES = 80_000_000


# --------------------------------------------------------------------------
# torus
# --------------------------------------------------------------------------

class TorusGrid:
    def __init__(self, group, band_limit):
        self.group = group
        self.band_limit = int(band_limit)
        self.n_per_axis = 2 * self.band_limit + 1
        if self.n_per_axis ** group.n > MAX_GRID_NODES:
            raise ResourceError("torus grid of band limit %d exceeds node budget" % band_limit)
        self.axes = [2.0 * np.pi * np.arange(self.n_per_axis) / self.n_per_axis
                     for _ in range(group.n)]

    @property
    def n_nodes(self):
        return self.n_per_axis ** self.group.n

    @property
    def shape(self):
        return (self.n_per_axis,) * self.group.n

    def nodes(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def weights(self):
        return np.full(self.n_nodes, 1.0 / self.n_nodes)


class Torus:
    """The n-torus with characters e^{i k.x}."""

    def __init__(self, n=1):
        self.n = int(n)
        self.group_id = "T%d" % self.n

    dim = property(lambda self: self.n)

    def identity(self):
        return GroupPoint(np.zeros(self.n))

    def multiply(self, p, q):
        return GroupPoint(np.mod(p.coords + q.coords, 2.0 * np.pi))

    def inverse(self, p):
        return GroupPoint(np.mod(-p.coords, 2.0 * np.pi))

    def exp(self, coeffs):
        return GroupPoint(np.mod(np.asarray(coeffs, dtype=float), 2.0 * np.pi))

    def enumerate_dual(self, cutoff):
        """All characters with |k|_inf <= cutoff, sorted by casimir then label."""
        if cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        rng = range(-int(cutoff), int(cutoff) + 1)
        labels = [()]
        for _ in range(self.n):
            labels = [lab + (k,) for lab in labels for k in rng]
        labels.sort(key=lambda lab: (float(np.dot(lab, lab)), lab))
        return [Irrep(self.group_id, lab, 1, float(np.dot(lab, lab))) for lab in labels]

    def rep_matrix(self, irrep, point):
        k = np.asarray(irrep.label, dtype=float)
        return np.array([[np.exp(1j * np.dot(k, point.coords))]])

    def rep_matrices(self, irrep, coords):
        """Vectorised characters at an (N, n) coordinate array; shape (N, 1, 1)."""
        k = np.asarray(irrep.label, dtype=float)
        return np.exp(1j * coords @ k)[:, None, None]

    def haar_grid(self, band_limit):
        return TorusGrid(self, band_limit)

    def generator_symbol(self, j, irrep):
        """dxi(X_j) for the coordinate field X_j = d/dx_j; equals i k_j."""
        return np.array([[1j * irrep.label[j]]])

    # -- transforms ---------------------------------------------------------

    def fourier_transform_box(self, samples, grid, cutoff):
        """Fourier coefficients on the box |k|_inf <= cutoff as an ndarray.

        Index [i1, ..., in] of the output corresponds to k_j = i_j - cutoff.
        """
        if cutoff > grid.band_limit:
            raise AliasingError("cutoff %d exceeds grid band limit %d"
                                % (cutoff, grid.band_limit))
        f = np.asarray(samples, dtype=complex).reshape(grid.shape)
        fh = np.fft.fftn(f) / f.size
        idx = [np.arange(-cutoff, cutoff + 1) % grid.n_per_axis for _ in range(self.n)]
        return fh[np.ix_(*idx)]

    def inverse_transform_box(self, box, grid):
        """Samples on the grid from box coefficients (inverse of the above)."""
        K = (box.shape[0] - 1) // 2
        if K > grid.band_limit:
            raise AliasingError("coefficients exceed grid band limit")
        full = np.zeros(grid.shape, dtype=complex)
        idx = [np.arange(-K, K + 1) % grid.n_per_axis for _ in range(self.n)]
        full[np.ix_(*idx)] = box
        return (np.fft.ifftn(full) * full.size).ravel()


# --------------------------------------------------------------------------
# SU(2)
# --------------------------------------------------------------------------

class SU2Grid:
    """Euler-angle product grid, exact for coefficients up to the band limit.

    band_limit is in units of l (may be half-integral); internally the
    integer two_lb = 2*band_limit is used.  Node counts: uniform phi with
    2*two_lb+1 points on [0,2pi), uniform psi with 2*two_lb+2 points on
    [0,4pi), and floor(two_lb/2)+1 Gauss-Legendre nodes in cos(theta).
    """

    def __init__(self, group, band_limit):
        self.group = group
        self.two_lb = int(round(2 * band_limit))
        self.band_limit = self.two_lb / 2.0
        self.n_phi = 2 * self.two_lb + 1
        self.n_psi = 2 * self.two_lb + 2
        self.n_theta = self.two_lb // 2 + 1
        if self.n_phi * self.n_psi * self.n_theta > MAX_GRID_NODES:
            raise ResourceError("SU(2) grid of band limit %s exceeds node budget"
                                % band_limit)
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.psi = 4.0 * np.pi * np.arange(self.n_psi) / self.n_psi
        u, w = np.polynomial.legendre.leggauss(self.n_theta)
        order = np.argsort(-u)  # theta ascending
        self.theta = np.arccos(u[order])
        self.w_theta = w[order] / 2.0
        self._dcache = {}
        self._phase_cache = {}

    @property
    def shape(self):
        return (self.n_phi, self.n_theta, self.n_psi)

    @property
    def n_nodes(self):
        return self.n_phi * self.n_theta * self.n_psi

    def nodes(self):
        p, t, s = np.meshgrid(self.phi, self.theta, self.psi, indexing="ij")
        return np.stack([p.ravel(), t.ravel(), s.ravel()], axis=-1)

    def weights(self):
        w = np.ones(self.n_phi)[:, None, None] / self.n_phi \
            * self.w_theta[None, :, None] \
            * np.ones(self.n_psi)[None, None, :] / self.n_psi
        return w.ravel()

    def dmatrix(self, two_l):
        if two_l not in self._dcache:
            self._dcache[two_l] = wigner_d(two_l, self.theta)
        return self._dcache[two_l]

    def phases(self, two_lc):
        """Phase matrices e^{+i m phi_a}, e^{+i n psi_c} on the two_m grid [-two_lc, two_lc]."""
        if two_lc not in self._phase_cache:
            m = np.arange(-two_lc, two_lc + 1) / 2.0
            ephi = np.exp(1j * np.outer(self.phi, m))
            epsi = np.exp(1j * np.outer(self.psi, m))
            self._phase_cache[two_lc] = (ephi, epsi)
        return self._phase_cache[two_lc]


class SU2:
    """SU(2) with the spin representations t^l, d_l = 2l+1."""

    def __init__(self):
        self.group_id = "SU2"

    n = 3
    dim = 3

    def identity(self):
        return GroupPoint(np.zeros(3))

    def point_matrix(self, p):
        return su2_matrix(*p.coords)

    def multiply(self, p, q):
        return GroupPoint(euler_from_su2(self.point_matrix(p) @ self.point_matrix(q)))

    def inverse(self, p):
        return GroupPoint(euler_from_su2(self.point_matrix(p).conj().T))

    def exp(self, coeffs):
        return GroupPoint(euler_from_su2(su2_exp(coeffs)))

    def enumerate_dual(self, cutoff):
        """All spins l = 0, 1/2, ..., <= cutoff, sorted by casimir."""
        if cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        two_lc = int(np.floor(2 * cutoff + 1e-9))
        return [Irrep(self.group_id, two_l, two_l + 1, (two_l / 2.0) * (two_l / 2.0 + 1.0))
                for two_l in range(two_lc + 1)]

    def rep_matrix(self, irrep, point):
        phi, theta, psi = point.coords
        two_l = irrep.label
        m = np.arange(-two_l, two_l + 1, 2) / 2.0
        d = wigner_d(two_l, np.array([theta]))[0]
        return np.exp(-1j * phi * m)[:, None] * d * np.exp(-1j * psi * m)[None, :]

    def rep_matrices(self, irrep, coords):
        coords = np.atleast_2d(coords)
        two_l = irrep.label
        m = np.arange(-two_l, two_l + 1, 2) / 2.0
        d = wigner_d(two_l, coords[:, 1])
        ep = np.exp(-1j * np.outer(coords[:, 0], m))
        eq = np.exp(-1j * np.outer(coords[:, 2], m))
        return ep[:, :, None] * d * eq[:, None, :]

    def haar_grid(self, band_limit):
        return SU2Grid(self, band_limit)

    def generator_symbol(self, j, irrep):
        """dxi(X_j) = -i J_j at the given spin; skew-Hermitian."""
        return -1j * jmatrices(irrep.label)[j]

    # -- transforms ---------------------------------------------------------

    def fourier_transform_blocks(self, samples, grid, cutoff):
        """Blocks fhat(l), two_l = 0..2*cutoff, each (d, d) complex."""
        two_lc = int(round(2 * cutoff))
        if two_lc > grid.two_lb:
            raise AliasingError("cutoff l=%s exceeds grid band limit l=%s"
                                % (cutoff, grid.band_limit))
        f = np.asarray(samples, dtype=complex).reshape(grid.shape)
        ephi, epsi = grid.phases(two_lc)
        g = np.einsum("am,abc,cn->mbn", ephi, f, epsi, optimize=True)
        g /= (grid.n_phi * grid.n_psi)
        blocks = []
        for two_l in range(two_lc + 1):
            sl = slice(two_lc - two_l, two_lc + two_l + 1, 2)
            sub = g[sl, :, sl]  # (d, n_theta, d)
            dmat = grid.dmatrix(two_l)  # (n_theta, d, d)
            # fhat_ij = int f(x) conj(t_ji(x)) dx, t_ji = e^{-i m_j phi} d_ji e^{-i m_i psi}
            blocks.append(np.einsum("b,bji,jbi->ij", grid.w_theta, dmat, sub,
                                    optimize=True))
        return blocks

    def inverse_transform_blocks(self, blocks, grid):
        """Samples of sum_l d_l Tr[t^l(x) fhat(l)] on the grid (flattened)."""
        two_lc = len(blocks) - 1
        if two_lc > grid.two_lb:
            raise AliasingError("coefficients exceed grid band limit")
        ephi, epsi = grid.phases(two_lc)
        h = np.zeros((2 * two_lc + 1, grid.n_theta, 2 * two_lc + 1), dtype=complex)
        for two_l, blk in enumerate(blocks):
            sl = slice(two_lc - two_l, two_lc + two_l + 1, 2)
            dmat = grid.dmatrix(two_l)
            # Tr[t^l(x) M] = sum_{m n} t_{mn} M_{nm}
            h[sl, :, sl] += (two_l + 1) * np.einsum("bij,ji->ibj", dmat, blk,
                                                    optimize=True)
        f = np.einsum("am,mbn,cn->abc", ephi.conj(), h, epsi.conj(), optimize=True)
        return f.ravel()


# --------------------------------------------------------------------------
# group registry and shared operations
# --------------------------------------------------------------------------

_REGISTRY = {}


def get_group(group_id):
    """Group object for an id like "T1", "T2" or "SU2"."""
    if group_id not in _REGISTRY:
        if group_id == "SU2":
            _REGISTRY[group_id] = SU2()
        elif group_id.startswith("T") and group_id[1:].isdigit():
            _REGISTRY[group_id] = Torus(int(group_id[1:]))
        else:
            raise ValueError("unsupported group id: %r" % group_id)
    return _REGISTRY[group_id]


def enumerate_dual(group, cutoff):
    if isinstance(group, str):
        group = get_group(group)
    return group.enumerate_dual(cutoff)


def rep_matrix(irrep, point):
    return get_group(irrep.group_id).rep_matrix(irrep, point)


def haar_grid(group, band_limit):
    if isinstance(group, str):
        group = get_group(group)
    return group.haar_grid(band_limit)
