"""Quantization, symbol extraction, difference operators and expansions.

The quantization is Af(x) = sum_xi d_xi Tr[xi(x) a(x,xi) fhat(xi)] and
the symbol of an operator is a(x,xi) = xi(x)^* (A xi)(x), applied
columnwise to the matrix coefficients.

Difference operators act through their generating function q (vanishing
at the identity): Delta_q sigma = F(q . F^{-1} sigma).  On the torus
the canonical collection q_j = e^{-i x_j} - 1 acts exactly as the
forward shift sigma(k + e_j) - sigma(k); on SU(2) the collection is
built from entries of t^{1/2}(x) - I and is applied by quadrature.

Asymptotic expansions (composition, adjoint, parametrix) follow the
global Taylor series: the terms are (Delta^alpha a)(D^(alpha) b) where
D^(alpha) is the derivative family dual to the monomials q^alpha.  On
the torus these dual operators are the Newton (falling-factorial)
operators binom(D_j, alpha_j), D_j = -i d/dx_j, which make the series
exact on band-limited symbols; on SU(2) the first-order-exact
convention (1/alpha! times products of the dual basis fields) is used.
"""

import numpy as np
from dataclasses import dataclass
from itertools import product as iproduct
from math import factorial

from .groups import get_group, GroupPoint, AliasingError
from .fields import (
    MatrixField,
    SpatialSymbol,
    fourier_transform,
    inverse_transform,
)


class NonEllipticError(ValueError):
    def __init__(self, node, irrep, message="symbol is singular"):
        super().__init__("%s at node %s, irrep %s" % (message, node, irrep))
        self.node = node
        self.irrep = irrep


# --------------------------------------------------------------------------
# quantization
# --------------------------------------------------------------------------

def _torus_box(sym):
    """Spatial symbol values as an (n_nodes, *box) array (d = 1 on T^n)."""
    grid = sym.grid
    n = grid.group.n
    K = max(max(abs(c) for c in xi.label) for xi in sym.irreps)
    box = np.zeros((grid.n_nodes,) + (2 * K + 1,) * n, dtype=complex)
    for xi, v in zip(sym.irreps, sym.values):
        box[(slice(None),) + tuple(c + K for c in xi.label)] = v[:, 0, 0]
    return box, K


def _torus_phases(grid, K):
    """Phase tensor e^{i k . x} of shape (n_nodes, (2K+1)^n ...)."""
    coords = grid.nodes()
    ks = [np.arange(-K, K + 1) for _ in range(grid.group.n)]
    out = np.ones((coords.shape[0],) + (2 * K + 1,) * grid.group.n, dtype=complex)
    for j, kj in enumerate(ks):
        ph = np.exp(1j * np.outer(coords[:, j], kj))
        shape = [coords.shape[0]] + [1] * grid.group.n
        shape[1 + j] = 2 * K + 1
        out = out * ph.reshape(shape)
    return out


def quantize_apply(sym, f_samples):
    """Apply Op(sigma) to grid samples; returns samples on the same grid."""
    grid = sym.grid
    g = grid.group
    if g.group_id == "SU2":
        two_lc = max(xi.label for xi in sym.irreps)
        if two_lc > grid.two_lb:
            raise AliasingError("symbol cutoff exceeds grid band limit")
        fh = g.fourier_transform_blocks(f_samples, grid, two_lc / 2.0)
        ephi, epsi = grid.phases(two_lc)
        shape = grid.shape
        out = np.zeros(shape, dtype=complex)
        for xi, v in zip(sym.irreps, sym.values):
            two_l = xi.label
            m = v @ fh[two_l]  # (N, d, d)
            m = m.reshape(shape + m.shape[1:])
            sl = slice(two_lc - two_l, two_lc + two_l + 1, 2)
            dmat = grid.dmatrix(two_l)
            w1 = np.einsum("bij,cj,abcji->abci", dmat, epsi.conj()[:, sl], m,
                           optimize=True)
            out += xi.dim * np.einsum("ai,abci->abc", ephi.conj()[:, sl], w1,
                                      optimize=True)
        return out.ravel()
    # torus
    box, K = _torus_box(sym)
    if K > grid.band_limit:
        raise AliasingError("symbol cutoff exceeds grid band limit")
    fbox = g.fourier_transform_box(f_samples, grid, K)
    ph = _torus_phases(grid, K)
    axes = tuple(range(1, 1 + g.n))
    return np.asarray((ph * box * fbox[None, ...]).sum(axis=axes)).ravel()


def identity_symbol(grid, cutoff):
    g = grid.group
    irreps = g.enumerate_dual(cutoff)
    return SpatialSymbol.from_invariant(MatrixField.identity(g.group_id, irreps), grid)


# --------------------------------------------------------------------------
# black-box operators and symbol extraction
# --------------------------------------------------------------------------

def vector_field_operator(group, coeffs, order=1, step=1e-3):
    """Left-invariant derivative along X = sum_a coeffs[a] X_a as a black box.

    Returns op(f_eval, coords) -> values, computed by 5-point central
    differencing of t -> f(x exp(tX)).
    """
    coeffs = np.asarray(coeffs, dtype=float)

    def shifted(coords, t):
        e = group.exp(t * coeffs)
        return np.array([group.multiply(GroupPoint(c), e).coords
                         for c in np.atleast_2d(coords)])

    def op(f_eval, coords):
        coords = np.atleast_2d(coords)
        h = step
        vals = {t: f_eval(shifted(coords, t * h))
                for t in (-2, -1, 0, 1, 2)}
        if order == 1:
            return (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h)
        if order == 2:
            return (-vals[-2] + 16 * vals[-1] - 30 * vals[0]
                    + 16 * vals[1] - vals[2]) / (12 * h * h)
        raise ValueError("order must be 1 or 2")

    return op


def compose_operators(*ops):
    """Composition op1 o op2 o ... of black-box operators in evaluator form."""
    def op(f_eval, coords):
        if len(ops) == 1:
            return ops[0](f_eval, coords)
        rest = compose_operators(*ops[1:])
        inner = lambda pts: rest(f_eval, pts)
        return ops[0](inner, coords)
    return op


def scaled_operator(c, op0):
    return lambda f_eval, coords: c * op0(f_eval, coords)


def sum_operators(*ops):
    def op(f_eval, coords):
        out = ops[0](f_eval, coords)
        for o in ops[1:]:
            out = out + o(f_eval, coords)
        return out
    return op


def quantized_operator(sym):
    """Op(sigma) as a black box; usable only at the nodes of sigma's grid."""
    grid = sym.grid

    def op(f_eval, coords):
        samples = f_eval(grid.nodes())
        out = quantize_apply(sym, samples)
        nodes = grid.nodes()
        coords = np.atleast_2d(coords)
        idx = []
        for c in coords:
            j = np.argmin(np.abs(nodes - c).sum(axis=1))
            if np.abs(nodes[j] - c).max() > 1e-10:
                raise ValueError("quantized operators evaluate at grid nodes only")
            idx.append(j)
        return out[idx]

    return op


def extract_symbol(op, group, irrep, point):
    """a(x, xi) = xi(x)^* (A xi)(x) for a black-box operator A."""
    coords = np.atleast_2d(point.coords)
    d = irrep.dim
    applied = np.empty((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            f_eval = lambda pts, i=i, j=j: group.rep_matrices(irrep, pts)[:, i, j]
            applied[i, j] = op(f_eval, coords)[0]
    return group.rep_matrix(irrep, point).conj().T @ applied


def vector_field_symbol(group, coeffs, cutoff):
    """sigma_X(xi) = dxi(X) for X = sum_a coeffs[a] X_a; skew-Hermitian."""
    coeffs = np.asarray(coeffs)
    irreps = group.enumerate_dual(cutoff)
    blocks = []
    for xi in irreps:
        b = np.zeros((xi.dim, xi.dim), dtype=complex)
        for a, c in enumerate(coeffs):
            if c != 0:
                b = b + c * group.generator_symbol(a, xi)
        blocks.append(b)
    return MatrixField(group.group_id, irreps, blocks)


# --------------------------------------------------------------------------
# difference operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DifferenceOperator:
    """First-order difference operator Delta_q with generator q.

    kind is "shift" (torus; data = integer shift vector s, with
    q_s(x) = e^{-i s.x} - 1 and Delta sigma(k) = sigma(k+s) - sigma(k))
    or "entry" (SU(2); data = (i, j) entry of t^{1/2}(x) - I).
    """

    group_id: str
    kind: str
    data: tuple
    vanishing_order: int = 1

    @property
    def coupling_width(self):
        if self.kind == "shift":
            return max(abs(s) for s in self.data)
        return 0.5  # one half-spin on SU(2)

    def q_samples(self, coords):
        g = get_group(self.group_id)
        coords = np.atleast_2d(coords)
        if self.kind == "shift":
            s = np.asarray(self.data, dtype=float)
            return np.exp(-1j * coords @ s) - 1.0
        i, j = self.data
        xi_half = g.enumerate_dual(0.5)[1]
        t = g.rep_matrices(xi_half, coords)
        return t[:, i, j] - (1.0 if i == j else 0.0)


def torus_shift_difference(group, j, sign=1):
    s = [0] * group.n
    s[j] = int(sign)
    return DifferenceOperator(group.group_id, "shift", tuple(s))


def su2_entry_difference(i, j):
    return DifferenceOperator("SU2", "entry", (int(i), int(j)))


def admissible_collection(group):
    """The canonical strongly admissible first-order collection.

    Torus: q_j = e^{-i x_j} - 1 (forward shifts).  SU(2): the entries
    (t11 - 1, t12, t21) of t^{1/2} - I, whose gradients span the Lie
    algebra and whose only common zero is the identity.
    """
    if group.group_id == "SU2":
        return [su2_entry_difference(0, 0), su2_entry_difference(0, 1),
                su2_entry_difference(1, 0)]
    return [torus_shift_difference(group, j) for j in range(group.n)]


def apply_difference(diff, field, grid=None, assume_padded=False):
    """Delta_q of a MatrixField or SpatialSymbol (same kind returned).

    By default the input is treated as the truncation of an ambient
    symbol, so the result is restricted to the margin-interior (cutoff
    shrinks by the coupling width).  With assume_padded=True the input
    is taken to be exactly supported (zero beyond its cutoff) and the
    result keeps the boundary blocks, growing by the coupling width.

    Torus fields use the exact shift path; everything else multiplies
    the kernel by q on a grid covering cutoff + coupling width (pass
    `grid`, or one is built).
    """
    if isinstance(field, MatrixField):
        g = get_group(field.group_id)
        if diff.kind == "shift":
            if assume_padded:
                field = _pad_torus_field(g, field, diff)
            return _shift_difference_field(g, diff, field)
        out = _kernel_difference_field(g, diff, field, grid)
        return out if assume_padded else _drop_su2_boundary(out)
    sym = field
    g = sym.grid.group
    if diff.kind == "shift":
        if assume_padded:
            sym = _pad_torus_symbol(g, sym, diff)
        out_irreps, take = _shift_index_maps(g, diff, sym.irreps)
        vals = [sym.values[plus] - sym.values[pos] for pos, plus in take]
        return SpatialSymbol(sym.grid, out_irreps, vals)
    out = _kernel_difference_spatial(g, diff, sym, grid)
    return out if assume_padded else _drop_su2_boundary(out)


def _pad_torus_field(group, field, diff):
    width = diff.coupling_width
    K = max(max(abs(c) for c in xi.label) for xi in field.irreps)
    irreps = group.enumerate_dual(K + width)
    index = {xi.label: i for i, xi in enumerate(field.irreps)}
    blocks = [field.dense(index[xi.label]) if xi.label in index
              else np.zeros((1, 1), complex) for xi in irreps]
    return MatrixField(field.group_id, irreps, blocks)


def _pad_torus_symbol(group, sym, diff):
    width = diff.coupling_width
    K = max(max(abs(c) for c in xi.label) for xi in sym.irreps)
    irreps = group.enumerate_dual(K + width)
    return _align_sym(sym, irreps)


def _drop_su2_boundary(out):
    two_top = max(xi.label for xi in out.irreps)
    keep = (two_top - 2) / 2.0  # drop the two highest half-spins
    cutoff = keep * (keep + 1.0)
    return out.truncate(cutoff)


def _shift_index_maps(group, diff, irreps):
    s = tuple(diff.data)
    index = {xi.label: i for i, xi in enumerate(irreps)}
    out_irreps, take = [], []
    for i, xi in enumerate(irreps):
        lab = tuple(a + b for a, b in zip(xi.label, s))
        if lab in index:
            out_irreps.append(xi)
            take.append((i, index[lab]))
    if not out_irreps:
        raise AliasingError("no margin left for the requested shift difference")
    return out_irreps, take


def _shift_difference_field(group, diff, field):
    out_irreps, take = _shift_index_maps(group, diff, field.irreps)
    blocks = [field.dense(plus) - field.dense(pos) for pos, plus in take]
    return MatrixField(field.group_id, out_irreps, blocks)


def _kernel_difference_field(group, diff, field, grid):
    two_lc = max(xi.label for xi in field.irreps)
    if grid is None or grid.two_lb < two_lc + 1:
        grid = group.haar_grid((two_lc + 1) / 2.0)
    kernel = inverse_transform(field, grid)
    q = diff.q_samples(grid.nodes())
    out = fourier_transform(q * kernel, grid, (two_lc + 1) / 2.0)
    return out


def _kernel_difference_spatial(group, diff, sym, grid):
    two_lc = max(xi.label for xi in sym.irreps)
    work = grid if grid is not None and grid.two_lb >= two_lc + 1 \
        else group.haar_grid((two_lc + 1) / 2.0)
    q = diff.q_samples(work.nodes())
    out_irreps = group.enumerate_dual((two_lc + 1) / 2.0)
    n = sym.grid.n_nodes
    vals = [np.zeros((n, xi.dim, xi.dim), complex) for xi in out_irreps]
    for i in range(n):
        fld = sym.at_node(i)
        kernel = inverse_transform(fld, work)
        out = fourier_transform(q * kernel, work, (two_lc + 1) / 2.0)
        for b, blk in enumerate(out.blocks):
            vals[b][i] = blk
    return SpatialSymbol(sym.grid, out_irreps, vals)


def apply_difference_multi(diffs, alpha, field, grid=None, assume_padded=False):
    """Delta^alpha = prod_j Delta_{q_j}^{alpha_j} applied left to right."""
    out = field
    for j, a in enumerate(alpha):
        for _ in range(a):
            out = apply_difference(diffs[j], out, grid, assume_padded)
    return out


def leibniz_defect(sigma, tau, group, grid=None):
    """Max block norm of Delta_q(sigma tau) - Leibniz expansion, all first-order q.

    Uses the exact product rules q_s(xy) = q_s(x) + q_s(y) + q_s(x) q_s(y)
    on the torus and q_ij(xy) = q_ij(x) + q_ij(y) + sum_r q_ir(x) q_rj(y)
    on SU(2); the defect is a quadrature/shift consistency check.
    """
    worst = 0.0
    prod = sigma.matmul(tau)
    if group.group_id != "SU2":
        for j in range(group.n):
            dq = torus_shift_difference(group, j)
            lhs = apply_difference(dq, prod, grid, assume_padded=True)
            ds = apply_difference(dq, sigma, grid, assume_padded=True)
            dt = apply_difference(dq, tau, grid, assume_padded=True)
            st = _align(sigma, lhs.irreps).matmul(dt)
            ts = ds.matmul(_align(tau, lhs.irreps))
            rhs = st + ts + ds.matmul(dt)
            worst = max(worst, _field_dist(lhs, rhs))
        return worst
    ds = {(i, j): apply_difference(su2_entry_difference(i, j), sigma, grid,
                                   assume_padded=True)
          for i in range(2) for j in range(2)}
    dt = {(i, j): apply_difference(su2_entry_difference(i, j), tau, grid,
                                   assume_padded=True)
          for i in range(2) for j in range(2)}
    for i in range(2):
        for j in range(2):
            lhs = apply_difference(su2_entry_difference(i, j), prod, grid,
                                   assume_padded=True)
            rhs = _align(sigma, lhs.irreps).matmul(dt[(i, j)]) \
                + ds[(i, j)].matmul(_align(tau, lhs.irreps))
            for r in range(2):
                rhs = rhs + ds[(r, j)].matmul(dt[(i, r)])
            worst = max(worst, _field_dist(lhs, rhs))
    return worst


def _align(field, irreps):
    index = {xi.label: i for i, xi in enumerate(field.irreps)}
    blocks = []
    for xi in irreps:
        if xi.label in index:
            blocks.append(field.dense(index[xi.label]))
        else:
            blocks.append(np.zeros((xi.dim, xi.dim), complex))
    return MatrixField(field.group_id, irreps, blocks)


def _field_dist(a, b):
    return max(np.abs(x - y).max() for x, y in zip(a.dense_blocks(), b.dense_blocks()))


# --------------------------------------------------------------------------
# derivative basis dual to an admissible collection
# --------------------------------------------------------------------------

class DerivativeBasis:
    """Vector fields X_{j,D} with X_{j,D} q_(k)(.^{-1})(e) = delta_jk.

    The coefficient matrix against the standard generators is solved from
    the analytic gradients of the q's at the identity.  Derivatives of
    band-limited spatial symbols are evaluated exactly on the Fourier
    side; `numeric_duality_defect` re-checks the defining property with
    5-point central differences.
    """

    def __init__(self, group, diffs=None):
        self.group = group
        self.diffs = diffs if diffs is not None else admissible_collection(group)
        n = group.n
        if len(self.diffs) != n:
            raise ValueError("collection must have dim(G) members")
        m = np.zeros((n, n), dtype=complex)
        for k, dq in enumerate(self.diffs):
            for a in range(n):
                m[k, a] = self._grad_inv(dq, a)
        self.coeffs = np.linalg.inv(m).T  # X_{j,D} = sum_a coeffs[j,a] X_a

    def _grad_inv(self, dq, a):
        """X_a [q(.^{-1})](e), analytic."""
        g = self.group
        if dq.kind == "shift":
            s = np.asarray(dq.data, dtype=float)
            return 1j * s[a]  # d/dt (e^{+i s.x(t)} - 1), x(t) = -t e_a... see below
        i, j = dq.data
        xi_half = g.enumerate_dual(0.5)[1]
        return -g.generator_symbol(a, xi_half)[i, j]

    def field_symbol(self, j, irrep):
        g = self.group
        out = np.zeros((irrep.dim, irrep.dim), dtype=complex)
        for a in range(g.n):
            c = self.coeffs[j, a]
            if c != 0:
                out = out + c * g.generator_symbol(a, irrep)
        return out

    # -- exact Fourier-side x-derivatives -----------------------------------

    def derivative(self, sym, beta):
        """Plain product d^(beta) = X_{1,D}^{b1} ... X_{n,D}^{bn} of a spatial symbol."""
        out = sym
        for j, b in enumerate(beta):
            for _ in range(b):
                out = self._first_derivative(out, j)
        return out

    def _first_derivative(self, sym, j):
        grid = sym.grid
        g = grid.group
        vals = []
        for xi, v in zip(sym.irreps, sym.values):
            d = xi.dim
            flat = v.reshape(grid.n_nodes, d * d).T  # (d^2, N)
            der = np.empty_like(flat)
            for r in range(d * d):
                der[r] = _x_derivative_samples(self, flat[r], grid, j)
            vals.append(der.T.reshape(v.shape))
        return SpatialSymbol(grid, sym.irreps, vals)

    def numeric_duality_defect(self, step=1e-3):
        """max_jk |X_{j,D} q_(k)(.^{-1})(e) - delta_jk| by central differences."""
        g = self.group
        n = g.n
        worst = 0.0
        e = g.identity()
        for jj in range(n):
            x_coeffs = self.coeffs[jj]
            for kk, dq in enumerate(self.diffs):
                def f_eval(pts, dq=dq):
                    vals = []
                    for c in np.atleast_2d(pts):
                        inv = g.inverse(GroupPoint(c))
                        vals.append(dq.q_samples(inv.coords[None, :])[0])
                    return np.array(vals)
                tot = 0.0 + 0.0j
                for a in range(n):
                    ca = x_coeffs[a]
                    if ca == 0:
                        continue
                    basis = np.zeros(n)
                    basis[a] = 1.0
                    op = vector_field_operator(g, basis, order=1, step=step)
                    tot += ca * op(f_eval, e.coords[None, :])[0]
                worst = max(worst, abs(tot - (1.0 if jj == kk else 0.0)))
        return worst


def _x_derivative_samples(basis, samples, grid, j):
    """Exact X_{j,D}-derivative of band-limited grid samples."""
    g = grid.group
    if g.group_id == "SU2":
        cutoff = grid.band_limit
        fh = fourier_transform(samples, grid, (grid.two_lb) / 2.0)
        blocks = [basis.field_symbol(j, xi) @ blk
                  for xi, blk in zip(fh.irreps, fh.dense_blocks())]
        return inverse_transform(MatrixField("SU2", fh.irreps, blocks), grid)
    box = g.fourier_transform_box(samples, grid, grid.band_limit)
    K = grid.band_limit
    ks = [np.arange(-K, K + 1) for _ in range(g.n)]
    mult = np.zeros_like(box)
    for a in range(g.n):
        c = basis.coeffs[j, a]
        if c == 0:
            continue
        shape = [1] * g.n
        shape[a] = 2 * K + 1
        mult = mult + c * (1j * ks[a]).reshape(shape)
    return g.inverse_transform_box(box * mult, grid)


# --------------------------------------------------------------------------
# Taylor-dual derivative terms and asymptotic expansions
# --------------------------------------------------------------------------

def _multi_indices(n, total):
    """All alpha in N_0^n with |alpha| = total, lexicographic."""
    if n == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend([(first,) + rest for rest in _multi_indices(n - 1, total - first)])
    out.sort()
    return out


def _newton_multiplier(K, n, alpha):
    """prod_j binom(m_j, alpha_j) on the torus mode box |m|_inf <= K."""
    ks = np.arange(-K, K + 1).astype(float)
    out = np.ones((2 * K + 1,) * n)
    for j, a in enumerate(alpha):
        c = np.ones_like(ks)
        for i in range(a):
            c = c * (ks - i) / (i + 1.0)
        shape = [1] * n
        shape[j] = 2 * K + 1
        out = out * c.reshape(shape)
    return out


def taylor_term(sym, alpha, basis):
    """The derivative term dual to q^alpha in the global Taylor series.

    Torus: the Newton operators prod_j binom(D_j, alpha_j) (series exact
    on band-limited symbols).  SU(2): (1/alpha!) times the plain product
    of the dual basis fields (exact through first order).
    """
    grid = sym.grid
    g = grid.group
    if g.group_id != "SU2":
        K = grid.band_limit
        mult = _newton_multiplier(K, g.n, alpha)
        vals = []
        for xi, v in zip(sym.irreps, sym.values):
            flat = v[:, 0, 0].reshape(grid.shape)
            box = np.fft.fftn(flat) / flat.size
            idx = [np.arange(-K, K + 1) % grid.n_per_axis for _ in range(g.n)]
            small = box[np.ix_(*idx)] * mult
            full = np.zeros(grid.shape, dtype=complex)
            full[np.ix_(*idx)] = small
            vals.append((np.fft.ifftn(full) * flat.size).ravel()[:, None, None])
        return SpatialSymbol(grid, sym.irreps, vals)
    c = 1.0
    for a in alpha:
        c /= factorial(a)
    return basis.derivative(sym, alpha).scale(c)


def _align_sym(sym, irreps):
    index = {xi.label: i for i, xi in enumerate(sym.irreps)}
    n = sym.grid.n_nodes
    vals = []
    for xi in irreps:
        if xi.label in index:
            vals.append(sym.values[index[xi.label]])
        else:
            vals.append(np.zeros((n, xi.dim, xi.dim), complex))
    return SpatialSymbol(sym.grid, irreps, vals)


def _common_irreps(a, b):
    lb = {xi.label for xi in b.irreps}
    return [xi for xi in a.irreps if xi.label in lb]


def composition_expansion(sig_a, sig_b, order, basis=None, diffs=None):
    """sum_{|alpha| <= order} (Delta^alpha sig_a)(D^(alpha) sig_b).

    Both symbols must live on the same grid; the result is aligned to the
    irreps on which all difference margins exist.
    """
    grid = sig_a.grid
    g = grid.group
    if basis is None:
        basis = DerivativeBasis(g, diffs)
    diffs = basis.diffs
    acc = None
    for total in range(order + 1):
        for alpha in _multi_indices(len(diffs), total):
            da = apply_difference_multi(diffs, alpha, sig_a, grid)
            db = taylor_term(sig_b, alpha, basis)
            common = _common_irreps(da, db)
            term = _align_sym(da, common).matmul(_align_sym(db, common))
            acc = term if acc is None else _align_sym(acc, common) + term
    return acc


def adjoint_expansion(sig_a, order, basis=None, diffs=None):
    """sum_{|alpha| <= order} Delta^alpha D^(alpha) (sig_a^*)."""
    grid = sig_a.grid
    g = grid.group
    if basis is None:
        basis = DerivativeBasis(g, diffs)
    diffs = basis.diffs
    star = sig_a.adjoint_pointwise()
    acc = None
    for total in range(order + 1):
        for alpha in _multi_indices(len(diffs), total):
            term = apply_difference_multi(diffs, alpha,
                                          taylor_term(star, alpha, basis), grid)
            if acc is None:
                acc = term
            else:
                common = _common_irreps(acc, term)
                acc = _align_sym(acc, common) + _align_sym(term, common)
    return acc


def pointwise_inverse(sym, rcond=1e-12):
    """Blockwise inverse of a spatial symbol; raises NonEllipticError if singular."""
    vals = []
    for xi, v in zip(sym.irreps, sym.values):
        sv = np.linalg.svd(v, compute_uv=False)
        scale = max(sv[:, 0].max(), 1e-300)
        bad = sv[:, -1] <= rcond * scale
        if bad.any():
            raise NonEllipticError(int(np.argmax(bad)), xi)
        vals.append(np.linalg.inv(v))
    return SpatialSymbol(sym.grid, sym.irreps, vals)


def ellipticity_bound(sym, weights_m):
    """sup_{x, xi} || W(xi)^m a(x,xi)^{-1} ||_op for a diagonal weight field.

    weights_m maps an irrep to its (d,) weight diagonal (already raised
    to the power m).
    """
    inv = pointwise_inverse(sym)
    out = 0.0
    for xi, v in zip(inv.irreps, inv.values):
        w = weights_m(xi)
        out = max(out, np.linalg.norm(w[None, :, None] * v, 2, axis=(1, 2)).max())
    return out


def parametrix(sig_a, order, basis=None, diffs=None):
    """Right parametrix sum_{k <= order} B_k with B_0 = a^{-1} and

    B_N = -a^{-1} sum_{k<N} sum_{|gamma|=N-k} (Delta^gamma a)(D^(gamma) B_k).
    """
    grid = sig_a.grid
    g = grid.group
    if basis is None:
        basis = DerivativeBasis(g, diffs)
    diffs = basis.diffs
    ainv = pointwise_inverse(sig_a)
    bs = [ainv]
    for nn in range(1, order + 1):
        acc = None
        for k in range(nn):
            for gamma in _multi_indices(len(diffs), nn - k):
                da = apply_difference_multi(diffs, gamma, sig_a, grid)
                db = taylor_term(bs[k], gamma, basis)
                common = _common_irreps(da, db)
                term = _align_sym(da, common).matmul(_align_sym(db, common))
                acc = term if acc is None else _align_sym(acc, common) + term
        common = _common_irreps(ainv, acc)
        bn = _align_sym(ainv, common).matmul(_align_sym(acc, common)).scale(-1.0)
        bs.append(bn)
    total = bs[0]
    for b in bs[1:]:
        common = _common_irreps(total, b)
        total = _align_sym(total, common) + _align_sym(b, common)
    return total


# --------------------------------------------------------------------------
# dense operator matrices in the Plancherel basis
# --------------------------------------------------------------------------

def plancherel_basis_index(group, band_limit):
    """Ordered (irrep, i, j) labels of the basis sqrt(d_xi) xi_ij."""
    out = []
    for xi in group.enumerate_dual(band_limit):
        for i in range(xi.dim):
            for j in range(xi.dim):
                out.append((xi, i, j))
    return out


def operator_matrix(sym, band_limit):
    """Dense matrix of Op(sigma) in the Plancherel-orthonormal basis.

    Exact provided the symbol's grid integrates products of its x-modes
    with coefficients up to the band limit.
    """
    grid = sym.grid
    g = grid.group
    basis = plancherel_basis_index(g, band_limit)
    dim = len(basis)
    irreps = g.enumerate_dual(band_limit)
    offsets = {}
    pos = 0
    for xi in irreps:
        offsets[xi.label] = pos
        pos += xi.dim ** 2
    sym_index = {xi.label: i for i, xi in enumerate(sym.irreps)}
    mat = np.zeros((dim, dim), dtype=complex)
    col = 0
    for xi in irreps:
        if xi.label not in sym_index:
            col += xi.dim ** 2
            continue
        v = sym.values[sym_index[xi.label]]  # (N, d, d)
        t = g.rep_matrices(xi, grid.nodes())  # (N, d, d)
        w = np.einsum("nik,nkj->nij", t, v)  # xi(x) sigma_x(xi)
        for i in range(xi.dim):
            for j in range(xi.dim):
                fh = fourier_transform(w[:, i, j], grid, band_limit)
                for eta, blk in zip(fh.irreps, fh.blocks):
                    r0 = offsets[eta.label]
                    d_eta = eta.dim
                    coef = np.sqrt(xi.dim * eta.dim) * blk.T  # entry (a,b) = blk[b,a]
                    rows = slice(r0, r0 + d_eta * d_eta)
                    mat[rows, col] += coef.ravel()
                col += 1
    return mat
