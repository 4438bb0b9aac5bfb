"""Symbol calculus: quantization, differences, expansions, parametrix."""

import numpy as np
import pytest

from subpdo.groups import Torus, SU2, GroupPoint
from subpdo.fields import (
    MatrixField,
    SpatialSymbol,
    fourier_transform,
    inverse_transform,
)
from subpdo.symbols import (
    quantize_apply,
    identity_symbol,
    extract_symbol,
    quantized_operator,
    vector_field_operator,
    vector_field_symbol,
    compose_operators,
    scaled_operator,
    sum_operators,
    DifferenceOperator,
    torus_shift_difference,
    su2_entry_difference,
    admissible_collection,
    apply_difference,
    apply_difference_multi,
    leibniz_defect,
    DerivativeBasis,
    taylor_term,
    composition_expansion,
    adjoint_expansion,
    parametrix,
    pointwise_inverse,
    operator_matrix,
    plancherel_basis_index,
    NonEllipticError,
)

T1 = Torus(1)
G2 = SU2()


# -- independent dense-matrix oracle on T^1 ---------------------------------

def dense_op_matrix_t1(sig_fn, K, KB):
    """Matrix of Op(sigma) on e^{ikx}, k=-KB..KB, via direct FFT rows.

    sig_fn(x_array, k) -> values; built independently of the package's
    operator_matrix (plain FFT of sigma(., k) e^{ikx}).
    """
    N = 8 * (KB + K) + 8
    x = 2 * np.pi * np.arange(N) / N
    ks = np.arange(-KB, KB + 1)
    mat = np.zeros((2 * KB + 1, 2 * KB + 1), complex)
    for col, k in enumerate(ks):
        g = sig_fn(x, k) * np.exp(1j * k * x)
        gh = np.fft.fft(g) / N
        mat[:, col] = gh[ks % N]
    return mat


def extract_symbol_from_matrix(mat, KB, x):
    """sigma(x, k) at the given x nodes from a dense matrix (oracle inverse)."""
    ks = np.arange(-KB, KB + 1)
    sig = np.zeros((x.size, ks.size), complex)
    for col, k in enumerate(ks):
        f = mat[:, col]  # coefficients of A e^{ikx}
        vals = (np.exp(1j * np.outer(x, ks)) * f).sum(axis=1)
        sig[:, col] = np.exp(-1j * k * x) * vals
    return sig


def torus_symbol(grid, cutoff, fn):
    irreps = T1.enumerate_dual(cutoff)
    x = grid.nodes()[:, 0]
    vals = [np.asarray(fn(x, xi.label[0]), dtype=complex)[:, None, None]
            * np.ones((1, 1, 1)) for xi in irreps]
    vals = [np.broadcast_to(v, (x.size, 1, 1)).copy() for v in vals]
    return SpatialSymbol(grid, irreps, vals)


# -- quantization -----------------------------------------------------------

def test_identity_symbol_is_identity_operator():
    grid = T1.haar_grid(8)
    x = grid.axes[0]
    f = np.exp(3j * x) - 2.0 * np.exp(-1j * x) + 0.25
    out = quantize_apply(identity_symbol(grid, 6), f)
    assert np.abs(out - f).max() < 1e-10


def test_su2_identity_symbol():
    grid = G2.haar_grid(3)
    rng = np.random.default_rng(0)
    irreps = G2.enumerate_dual(1.5)
    fld = MatrixField("SU2", irreps,
                      [rng.standard_normal((xi.dim, xi.dim)).astype(complex)
                       for xi in irreps])
    f = inverse_transform(fld, grid)
    out = quantize_apply(identity_symbol(grid, 1.5), f)
    assert np.abs(out - f).max() < 1e-10


def test_su2_laplacian_symbol_eigenvalue():
    # sigma_L(t^l) = l(l+1) I; on f = t^1_{00} the operator gives 2 f
    grid = G2.haar_grid(2)
    irreps = G2.enumerate_dual(1)
    blocks = [xi.casimir * np.ones(xi.dim) for xi in irreps]
    lap = MatrixField("SU2", irreps, blocks, diagonal=True)
    sym = SpatialSymbol.from_invariant(lap, grid)
    f = G2.rep_matrices(irreps[2], grid.nodes())[:, 1, 1]
    out = quantize_apply(sym, f)
    assert np.abs(out - 2.0 * f).max() < 1e-10


def test_torus_derivative_symbol():
    grid = T1.haar_grid(6)
    sym = torus_symbol(grid, 4, lambda x, k: 1j * k * np.ones_like(x))
    f = np.exp(1j * grid.axes[0])
    out = quantize_apply(sym, f)
    assert np.abs(out - 1j * f).max() < 1e-12


# -- extract_symbol ---------------------------------------------------------

def test_extract_identity():
    grid = T1.haar_grid(4)
    op = quantized_operator(identity_symbol(grid, 4))
    xi = [x for x in T1.enumerate_dual(3) if x.label == (2,)][0]
    p = GroupPoint([grid.axes[0][3]])
    got = extract_symbol(op, T1, xi, p)
    assert np.abs(got - 1.0).max() < 1e-10


def test_extract_x3_symbol_su2():
    # A = X3 by central differences; symbol must be diag(-i n), n = -l..l
    op = vector_field_operator(G2, [0.0, 0.0, 1.0])
    p = GroupPoint([0.9, 1.3, 2.2])
    for xi in G2.enumerate_dual(2):
        got = extract_symbol(op, G2, xi, p)
        n = np.arange(-xi.label, xi.label + 1, 2) / 2.0
        assert np.abs(got - np.diag(-1j * n)).max() < 1e-6


def test_extract_laplacian_symbol_su2():
    # A = -(X1^2+X2^2+X3^2) via 5-point second differences
    ops = [scaled_operator(-1.0, vector_field_operator(G2, e, order=2))
           for e in np.eye(3)]
    op = sum_operators(*ops)
    p = GroupPoint([0.4, 1.0, 0.7])
    for xi in G2.enumerate_dual(2):
        got = extract_symbol(op, G2, xi, p)
        want = xi.casimir * np.eye(xi.dim)
        assert np.abs(got - want).max() < 1e-6


def test_extract_recovers_random_invariant_symbol():
    grid = T1.haar_grid(8)
    rng = np.random.default_rng(4)
    vals = rng.standard_normal(2 * 5 + 1) + 1j * rng.standard_normal(2 * 5 + 1)
    sym = torus_symbol(grid, 5, lambda x, k: vals[k + 5] * np.ones_like(x))
    op = quantized_operator(sym)
    p = GroupPoint([grid.axes[0][5]])
    for xi in T1.enumerate_dual(3):
        got = extract_symbol(op, T1, xi, p)
        assert abs(got[0, 0] - vals[xi.label[0] + 5]) < 1e-8


# -- vector field symbols ---------------------------------------------------

def test_vector_field_symbol_torus():
    fld = vector_field_symbol(T1, [1.0], 3)
    for xi, blk in zip(fld.irreps, fld.blocks):
        assert abs(blk[0, 0] - 1j * xi.label[0]) < 1e-14


def test_vector_field_symbol_su2_x3():
    fld = vector_field_symbol(G2, [0.0, 0.0, 1.0], 2)
    for xi, blk in zip(fld.irreps, fld.blocks):
        n = np.arange(-xi.label, xi.label + 1, 2) / 2.0
        assert np.abs(blk - np.diag(-1j * n)).max() < 1e-14


def test_vector_field_symbol_trivial_and_skew():
    for coeffs in np.eye(3):
        fld = vector_field_symbol(G2, coeffs, 2)
        assert np.abs(fld.blocks[0]).max() == 0.0
        for blk in fld.blocks:
            assert np.abs(blk + blk.conj().T).max() < 1e-14


def test_consistency_with_finite_difference_oracle():
    # analytic dxi(X) vs the black-box derivative, on random directions
    rng = np.random.default_rng(9)
    c = rng.standard_normal(3)
    fld = vector_field_symbol(G2, c, 1.5)
    op = vector_field_operator(G2, c)
    p = G2.identity()
    for xi, blk in zip(fld.irreps, fld.blocks):
        got = extract_symbol(op, G2, xi, p)
        assert np.abs(got - blk).max() < 1e-7


# -- difference operators ---------------------------------------------------

def test_generator_vanishes_at_identity():
    for dq in admissible_collection(G2) + admissible_collection(T1):
        g = G2 if dq.group_id == "SU2" else T1
        val = dq.q_samples(g.identity().coords[None, :])[0]
        assert abs(val) < 1e-12


def test_torus_backward_shift_example():
    # q = e^{+ix} - 1 acts as sigma(k-1) - sigma(k); on the delta symbol at 0
    # this produces delta_{k,1} - delta_{k,0}
    dq = torus_shift_difference(T1, 0, sign=-1)
    irreps = T1.enumerate_dual(3)
    blocks = [np.array([[1.0 + 0j]]) if xi.label == (0,) else np.zeros((1, 1), complex)
              for xi in irreps]
    sig = MatrixField("T1", irreps, blocks)
    out = apply_difference(dq, sig)
    for xi, blk in zip(out.irreps, out.blocks):
        want = {(1,): 1.0, (0,): -1.0}.get(xi.label, 0.0)
        assert abs(blk[0, 0] - want) < 1e-14


def test_torus_grid_path_cross_validates_shift_path():
    rng = np.random.default_rng(1)
    irreps = T1.enumerate_dual(5)
    sig = MatrixField("T1", irreps,
                      [rng.standard_normal((1, 1)).astype(complex) for _ in irreps])
    dq = torus_shift_difference(T1, 0)
    shifted = apply_difference(dq, sig)
    grid = T1.haar_grid(8)
    kernel = inverse_transform(sig, grid)
    q = dq.q_samples(grid.nodes())
    viagrid = fourier_transform(q * kernel, grid, 4)
    via_idx = {e.label: i for i, e in enumerate(viagrid.irreps)}
    compared = 0
    for xi, blk in zip(shifted.irreps, shifted.blocks):
        if xi.label not in via_idx:
            continue
        other = viagrid.blocks[via_idx[xi.label]]
        assert abs(blk[0, 0] - other[0, 0]) < 1e-12
        compared += 1
    assert compared >= 9


def test_difference_kills_identity_symbol():
    # sigma = I has kernel = Dirac at e, and q(e) = 0
    irreps = G2.enumerate_dual(2)
    ident = MatrixField.identity("SU2", irreps)
    for dq in admissible_collection(G2):
        out = apply_difference(dq, ident.to_dense())
        assert max(np.abs(b).max() for b in out.blocks) < 1e-10


def test_su2_difference_couples_adjacent_spins():
    irreps = G2.enumerate_dual(1)
    blocks = [np.zeros((xi.dim, xi.dim), complex) for xi in irreps]
    blocks[2] = np.eye(3, dtype=complex)  # only l=1
    sig = MatrixField("SU2", irreps, blocks)
    out = apply_difference(su2_entry_difference(0, 1), sig, assume_padded=True)
    norms = {xi.label: np.abs(b).max() for xi, b in zip(out.irreps, out.blocks)}
    assert norms[1] > 1e-3 and norms[3] > 1e-3  # l = 1/2 and 3/2 appear
    assert norms[0] < 1e-12  # but not l = 0: coupling width is 1/2


def test_leibniz_rule_torus():
    rng = np.random.default_rng(2)
    irreps = T1.enumerate_dual(6)
    a = MatrixField("T1", irreps, [rng.standard_normal((1, 1)).astype(complex)
                                   for _ in irreps])
    b = MatrixField("T1", irreps, [rng.standard_normal((1, 1)).astype(complex)
                                   for _ in irreps])
    assert leibniz_defect(a, b, T1) < 1e-8


def test_leibniz_rule_su2():
    rng = np.random.default_rng(3)
    irreps = G2.enumerate_dual(1.5)
    grid = G2.haar_grid(3)
    a = MatrixField("SU2", irreps, [rng.standard_normal((xi.dim, xi.dim))
                                    + 1j * rng.standard_normal((xi.dim, xi.dim))
                                    for xi in irreps])
    b = MatrixField("SU2", irreps, [rng.standard_normal((xi.dim, xi.dim))
                                    + 1j * rng.standard_normal((xi.dim, xi.dim))
                                    for xi in irreps])
    assert leibniz_defect(a, b, G2, grid) < 1e-8


# -- derivative basis -------------------------------------------------------

def test_duality_numeric_torus():
    basis = DerivativeBasis(T1)
    assert basis.numeric_duality_defect() < 1e-8


def test_duality_numeric_su2():
    basis = DerivativeBasis(G2)
    assert basis.numeric_duality_defect() < 1e-8


def test_fourier_derivative_matches_finite_differences():
    basis = DerivativeBasis(G2)
    grid = G2.haar_grid(2)
    irreps = G2.enumerate_dual(1)
    rng = np.random.default_rng(0)
    fld = MatrixField("SU2", irreps,
                      [rng.standard_normal((xi.dim, xi.dim)).astype(complex)
                       for xi in irreps])
    f = inverse_transform(fld, grid)
    sym = SpatialSymbol(grid, irreps[:1],
                        [np.asarray(f, complex)[:, None, None]])
    der = basis.derivative(sym, (1, 0, 0))
    # oracle: 5-point differences of the sampled function along X_{1,D}
    coords = grid.nodes()
    want = np.zeros(coords.shape[0], complex)
    for a in range(3):
        c = basis.coeffs[0, a]
        if abs(c) < 1e-15:
            continue
        op = vector_field_operator(G2, np.eye(3)[a])
        fev = lambda pts: np.asarray(
            inverse_transform(fld, grid), complex
        ) if False else None
        # evaluate f at arbitrary points through its Fourier series
        def f_eval(pts):
            t = [G2.rep_matrices(xi, pts) for xi in irreps]
            out = np.zeros(np.atleast_2d(pts).shape[0], complex)
            for xi, tt, blk in zip(irreps, t, fld.dense_blocks()):
                out += xi.dim * np.einsum("nij,ji->n", tt, blk)
            return out
        want += c * op(f_eval, coords)
    got = der.values[0][:, 0, 0]
    assert np.abs(got - want).max() < 1e-7


# -- expansions vs dense oracle on T^1 ---------------------------------------

def test_composition_order_zero_is_pointwise_product():
    grid = T1.haar_grid(8)
    a = torus_symbol(grid, 4, lambda x, k: (1.0 + k * k) ** -0.5 * np.ones_like(x))
    b = torus_symbol(grid, 4, lambda x, k: np.cos(x) + 0.0j)
    got = composition_expansion(a, b, 0)
    want = a.matmul(b)
    want = want.truncate(got.cutoff)
    err = max(np.abs(u - v).max() for u, v in zip(got.values, want.values))
    assert err < 1e-12


def test_composition_invariant_symbols_exact():
    grid = G2.haar_grid(2)
    rng = np.random.default_rng(8)
    irreps = G2.enumerate_dual(1)
    fa = MatrixField("SU2", irreps, [rng.standard_normal((xi.dim, xi.dim))
                                     .astype(complex) for xi in irreps])
    fb = MatrixField("SU2", irreps, [rng.standard_normal((xi.dim, xi.dim))
                                     .astype(complex) for xi in irreps])
    sa, sb = (SpatialSymbol.from_invariant(f, grid) for f in (fa, fb))
    for order in (1, 2):
        got = composition_expansion(sa, sb, order)
        want = _align_to(sa.matmul(sb), got)
        err = max(np.abs(u - v).max() for u, v in zip(got.values, want.values))
        assert err < 1e-9


def _align_to(sym, ref):
    idx = {xi.label: i for i, xi in enumerate(sym.irreps)}
    vals = [sym.values[idx[xi.label]] for xi in ref.irreps]
    return SpatialSymbol(sym.grid, ref.irreps, vals)


def test_composition_remainder_decays_vs_dense_oracle():
    K, KB = 32, 24
    grid = T1.haar_grid(K)
    a_fn = lambda x, k: (1.0 + k * k) ** -0.5 * np.ones_like(x)
    b_fn = lambda x, k: (2.0 + np.cos(x)) + 0.0j
    exact = dense_op_matrix_t1(a_fn, 0, KB) @ dense_op_matrix_t1(b_fn, 1, KB)
    sig_exact = extract_symbol_from_matrix(exact, KB, grid.axes[0])
    a = torus_symbol(grid, K, a_fn)
    b = torus_symbol(grid, K, b_fn)
    mid = [i for i, k in enumerate(range(-KB, KB + 1)) if 12 <= abs(k) <= 20]
    errs = []
    for order in range(3):
        got = composition_expansion(a, b, order)
        idx = {xi.label[0]: i for i, xi in enumerate(got.irreps)}
        err = 0.0
        for i in mid:
            k = range(-KB, KB + 1)[i]
            vals = got.values[idx[k]][:, 0, 0]
            err = max(err, np.abs(vals - sig_exact[:, i]).max())
        errs.append(err)
    assert errs[1] < errs[0] / 2 and errs[2] < errs[1] / 2


def test_adjoint_order_zero_and_selfadjoint():
    grid = T1.haar_grid(8)
    a = torus_symbol(grid, 5, lambda x, k: (1.0 + k * k) ** 0.5 * np.ones_like(x))
    got = adjoint_expansion(a, 2)
    idx = {xi.label: i for i, xi in enumerate(got.irreps)}
    for xi in got.irreps:
        k = xi.label[0]
        want = (1.0 + k * k) ** 0.5
        assert np.abs(got.values[idx[xi.label]] - want).max() < 1e-10


def test_adjoint_remainder_decays_vs_dense_oracle():
    K, KB = 24, 16
    grid = T1.haar_grid(K)
    fn = lambda x, k: (1.0 + 0.5 * np.exp(1j * x)) * (1.0 + k * k) ** -0.5
    exact = dense_op_matrix_t1(fn, 1, KB).conj().T
    sig_exact = extract_symbol_from_matrix(exact, KB, grid.axes[0])
    a = torus_symbol(grid, K, fn)
    mid = [i for i, k in enumerate(range(-KB, KB + 1)) if 8 <= abs(k) <= 12]
    errs = []
    for order in range(3):
        got = adjoint_expansion(a, order)
        idx = {xi.label[0]: i for i, xi in enumerate(got.irreps)}
        err = 0.0
        for i in mid:
            k = range(-KB, KB + 1)[i]
            vals = got.values[idx[k]][:, 0, 0]
            err = max(err, np.abs(vals - sig_exact[:, i]).max())
        errs.append(err)
    assert errs[2] < errs[1] < errs[0]


# -- parametrix --------------------------------------------------------------

def test_parametrix_invariant_elliptic():
    grid = T1.haar_grid(8)
    a = torus_symbol(grid, 6, lambda x, k: (1.0 + k * k) * np.ones_like(x))
    for order in (0, 2):
        b = parametrix(a, order)
        comp = composition_expansion(a, b, 2)
        idx = {xi.label: i for i, xi in enumerate(comp.irreps)}
        for xi in comp.irreps:
            assert np.abs(comp.values[idx[xi.label]] - 1.0).max() < 1e-10


def test_parametrix_order_zero_is_pointwise_inverse():
    grid = T1.haar_grid(6)
    a = torus_symbol(grid, 4, lambda x, k: (2.0 + np.cos(x)) * (1.0 + k * k))
    b0 = parametrix(a, 0)
    binv = pointwise_inverse(a)
    err = max(np.abs(u - v).max()
              for u, v in zip(b0.values, binv.truncate(b0.cutoff).values))
    assert err < 1e-12


def test_parametrix_remainder_decreases():
    K, KB = 28, 12
    grid = T1.haar_grid(K)
    a = torus_symbol(grid, K, lambda x, k: (2.0 + np.cos(x)) * (1.0 + k * k))
    sup = []
    for order in range(4):
        b = parametrix(a, order)
        comp = composition_expansion(a, b, order + 1)
        idx = {xi.label[0]: i for i, xi in enumerate(comp.irreps)}
        err = 0.0
        for k in range(-KB, KB + 1):
            if abs(k) < 6:
                continue
            err = max(err, np.abs(comp.values[idx[k]] - 1.0).max())
        sup.append(err)
    assert sup[1] < sup[0] and sup[2] < sup[1] and sup[3] < sup[2]


def test_parametrix_detects_singular_symbol():
    grid = T1.haar_grid(6)
    a = torus_symbol(grid, 4, lambda x, k: (np.exp(1j * x) - 1.0) * (1.0 + k * k))
    with pytest.raises(NonEllipticError):
        parametrix(a, 0)


# -- operator matrices -------------------------------------------------------

def test_operator_matrix_identity():
    grid = T1.haar_grid(8)
    mat = operator_matrix(identity_symbol(grid, 8), 4)
    assert np.abs(mat - np.eye(mat.shape[0])).max() < 1e-12


def test_operator_matrix_multiplier_block_norm():
    grid = G2.haar_grid(2)
    rng = np.random.default_rng(5)
    irreps = G2.enumerate_dual(1)
    fld = MatrixField("SU2", irreps, [rng.standard_normal((xi.dim, xi.dim))
                                      .astype(complex) for xi in irreps])
    sym = SpatialSymbol.from_invariant(fld, grid)
    mat = operator_matrix(sym, 1)
    want = max(np.linalg.norm(b, 2) for b in fld.blocks)
    assert abs(np.linalg.norm(mat, 2) - want) < 1e-10
    # block diagonality across irreps
    sizes = [xi.dim ** 2 for xi in irreps]
    o1 = sizes[0]
    assert np.abs(mat[:o1, o1:]).max() < 1e-12


def test_operator_matrix_modulation_is_shift():
    grid = T1.haar_grid(12)
    sym = torus_symbol(grid, 10, lambda x, k: np.exp(1j * x))
    mat = operator_matrix(sym, 4)
    want = np.zeros((9, 9))
    want[1:, :-1] = 0.0
    ks = np.arange(-4, 5)
    for col, k in enumerate(ks):
        for row, kp in enumerate(ks):
            want[row, col] = 1.0 if kp == k + 1 else 0.0
    assert np.abs(mat - want).max() < 1e-12


def test_operator_matrix_agrees_with_dense_oracle():
    grid = T1.haar_grid(16)
    fn = lambda x, k: (2.0 + np.cos(x)) / (1.0 + k * k)
    sym = torus_symbol(grid, 16, fn)
    got = operator_matrix(sym, 5)
    want = dense_op_matrix_t1(fn, 1, 5)
    assert np.abs(got - want).max() < 1e-10


def test_extract_after_quantize_roundtrip():
    grid = T1.haar_grid(10)
    rng = np.random.default_rng(12)
    vals = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    sym = torus_symbol(grid, 5, lambda x, k: vals[k + 5] * np.ones_like(x))
    op = quantized_operator(sym)
    p = GroupPoint([grid.axes[0][2]])
    for xi in T1.enumerate_dual(4):
        got = extract_symbol(op, T1, xi, p)
        assert abs(got[0, 0] - vals[xi.label[0] + 5]) < 1e-8
