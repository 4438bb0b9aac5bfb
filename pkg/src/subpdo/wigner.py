"""Wigner rotation matrices for SU(2) in the standard |l, m> basis.

Conventions used throughout the package:

* basis vectors are ordered m = -l, ..., l (ascending),
* J3 = diag(-l, ..., l),
* t^l(phi, theta, psi) = exp(-i phi J3) d^l(theta) exp(-i psi J3),
* the Lie-algebra generators act as dt^l(X_a) = -i J_a, so that the
  sub-Laplacian -(X1^2+X2^2+X3^2) has symbol l(l+1) I.

Half-integer spins are labelled by the integer ``two_l = 2l``.
"""

import numpy as np
from functools import lru_cache


@lru_cache(maxsize=None)
def jmatrices(two_l):
    """Angular momentum matrices (J1, J2, J3) for spin l = two_l/2.

    Returns a tuple of (d, d) complex arrays, d = two_l + 1, in the
    m-ascending basis.  J3 is diagonal; J1, J2 are built from the
    ladder operators J± |l,m> = sqrt(l(l+1) - m(m±1)) |l, m±1>.
    """
    l = two_l / 2.0
    d = two_l + 1
    m = np.arange(-two_l, two_l + 1, 2) / 2.0
    jp = np.zeros((d, d), dtype=complex)
    # (J+)_{m+1, m} = sqrt(l(l+1) - m(m+1))
    coef = np.sqrt(l * (l + 1.0) - m[:-1] * (m[:-1] + 1.0))
    jp[np.arange(1, d), np.arange(0, d - 1)] = coef
    jm = jp.conj().T
    j1 = 0.5 * (jp + jm)
    j2 = (jp - jm) / (2.0j)
    j3 = np.diag(m).astype(complex)
    j1.setflags(write=False), j2.setflags(write=False), j3.setflags(write=False)
    return j1, j2, j3


@lru_cache(maxsize=None)
def _j2_eig(two_l):
    """Eigendecomposition of J2; the spectrum is exactly m = -l..l."""
    _, j2, _ = jmatrices(two_l)
    w, v = np.linalg.eigh(j2)
    # snap eigenvalues to the exact half-integer ladder
    m = np.arange(-two_l, two_l + 1, 2) / 2.0
    assert np.allclose(w, m, atol=1e-10)
    v.setflags(write=False)
    return m, v


def wigner_d(two_l, theta):
    """d^l(theta) = exp(-i theta J2) at each angle in `theta`.

    Parameters
    ----------
    two_l : int
        Twice the spin.
    theta : array_like
        Angles, any shape.

    Returns
    -------
    ndarray, shape theta.shape + (d, d), real
        The (real orthogonal) reduced Wigner matrices.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m, v = _j2_eig(two_l)
    phases = np.exp(-1j * theta[..., None] * m)  # (..., d)
    dmat = np.einsum("ik,...k,jk->...ij", v, phases, v.conj())
    return dmat.real


def su2_matrix(phi, theta, psi):
    """The defining 2x2 representation t^{1/2} at Euler angles (phi, theta, psi)."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    ep = np.exp(0.5j * np.asarray(phi))
    eq = np.exp(0.5j * np.asarray(psi))
    return np.array(
        [[c * ep * eq, s * ep / eq], [-s * eq / ep, c / (ep * eq)]],
        dtype=complex,
    )


def euler_from_su2(u):
    """Euler angles (phi, theta, psi) in [0,2pi) x [0,pi] x [0,4pi) of a 2x2 SU(2) matrix."""
    u00, u01 = u[0, 0], u[0, 1]
    theta = 2.0 * np.arctan2(abs(u01), abs(u00))
    two_pi, four_pi = 2.0 * np.pi, 4.0 * np.pi
    if abs(u01) < 1e-14:  # theta = 0: only phi+psi matters
        s = 2.0 * np.angle(u00)  # (phi+psi) mod 4pi
        return 0.0, 0.0, s % four_pi
    if abs(u00) < 1e-14:  # theta = pi: only phi-psi matters
        dpd = 2.0 * np.angle(u01)  # (phi-psi) mod 4pi
        return 0.0, np.pi, (-dpd) % four_pi
    a = np.angle(u00)  # (phi+psi)/2 mod 2pi
    b = np.angle(u01)  # (phi-psi)/2 mod 2pi
    best = None
    for ka in (0, 1):
        for kb in (0, 1):
            phi = ((a + two_pi * ka) + (b + two_pi * kb)) % two_pi
            psi = ((a + two_pi * ka) - (b + two_pi * kb)) % four_pi
            err = np.abs(su2_matrix(phi, theta, psi) - u).max()
            if best is None or err < best[0]:
                best = (err, phi, psi)
    assert best[0] < 1e-9
    return best[1], theta, best[2]


def su2_exp(coeffs):
    """exp(c1 X1 + c2 X2 + c3 X3) as a 2x2 SU(2) matrix, X_a = -i J_a."""
    c = np.asarray(coeffs, dtype=float)
    j1, j2, j3 = jmatrices(1)
    h = c[0] * j1 + c[1] * j2 + c[2] * j3  # Hermitian
    r = np.sqrt((c * c).sum()) / 2.0
    if r < 1e-300:
        return np.eye(2, dtype=complex)
    # exp(-i h) with h = r * (unit direction . J), spectrum ±r
    return np.cos(r) * np.eye(2) - 1j * np.sin(r) / r * h


def wigner_d_diagonal_ladder(theta, two_l_max):
    """Diagonal entries d^l_{nn}(theta) for all l <= two_l_max/2 via the l-recursion.

    Three-term recursion in l at fixed n, seeded at l = |n| with
    d^{|n|}_{nn} = cos(theta/2)^{2|n|}; only n >= 0 is computed
    (d^l_{nn} = d^l_{-n,-n}).

    Yields (two_l, diag) pairs where diag has shape (len(theta), two_l+1)
    holding d^l_{nn}(theta) for n = -l..l ascending.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.cos(theta)  # (T,)
    ch = np.cos(theta / 2.0)
    T = theta.shape[0]
    # the recursion connects l-1 -> l -> l+1, i.e. steps of 2 in two_l;
    # keep the last two levels of each parity
    hist = {}  # two_l -> {two_n >= 0: d^l_{nn}, shape (T,)}
    for two_l in range(0, two_l_max + 1):
        l = two_l / 2.0
        level = {}
        for two_n in range(two_l % 2, two_l + 1, 2):
            n = two_n / 2.0
            if two_n == two_l:
                level[two_n] = ch ** two_l
            elif two_l == 2 and two_n == 0:
                level[two_n] = x.copy()  # d^1_{00} = cos(theta)
            else:
                lm = l - 1.0  # recursion: d^{lm+1} from d^{lm}, d^{lm-1}
                dl = hist[two_l - 2][two_n]
                num = (2 * lm + 1) * (lm * (lm + 1) * x - n * n) * dl
                if lm * lm - n * n > 0:
                    num = num - (lm + 1) * (lm * lm - n * n) * hist[two_l - 4][two_n]
                level[two_n] = num / (lm * ((lm + 1) ** 2 - n * n))
        hist[two_l] = level
        hist.pop(two_l - 4, None)
        d = two_l + 1
        diag = np.empty((T, d))
        for i, two_m in enumerate(range(-two_l, two_l + 1, 2)):
            diag[:, i] = level[abs(two_m)]
        yield two_l, diag
