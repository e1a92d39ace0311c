"""Independent reference computations used by the tests.

Nothing here imports the operator code under test: the Fock space is built
from Kronecker products of Pauli matrices (Jordan-Wigner) and the torus map
is written out directly.
"""

import itertools

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.special import logsumexp

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|, occupied = |1>
PAULI_Z = np.diag([1.0, -1.0])


def jw_annihilators(n_modes):
    """Dense annihilation matrices ``a_0 .. a_{M-1}``."""
    ops = []
    for j in range(n_modes):
        factors = [PAULI_Z] * j + [SIGMA_MINUS] + [np.eye(2)] * (n_modes - j - 1)
        mat = np.array([[1.0]])
        for f in factors:
            mat = np.kron(mat, f)
        ops.append(mat.astype(complex))
    return ops


def box_sites(dim, side):
    rng = range(-side, side + 1)
    return [tuple(x) for x in itertools.product(rng, repeat=dim)]


def torus(x, side):
    period = 2 * side + 1
    return tuple((v + side) % period - side for v in x)


def dense_kernel_operator(terms, dim, spins, side):
    """``sum_x coef * prod_j a^{nu_j}_{s_j, xi(x + o_j)}`` on the torus.

    ``terms`` is a list of ``(factors, coef)`` with factors ``(nu, spin, offset)``.
    """
    sites = box_sites(dim, side)
    index = {}
    for i, x in enumerate(sites):
        for j, s in enumerate(spins):
            index[(x, s)] = i * len(spins) + j
    n = len(sites) * len(spins)
    ann = jw_annihilators(n)
    dimension = 2**n
    total = np.zeros((dimension, dimension), dtype=complex)
    for factors, coef in terms:
        for x in sites:
            mat = np.eye(dimension, dtype=complex)
            for nu, s, off in factors:
                y = torus(tuple(a + b for a, b in zip(x, off)), side)
                op = ann[index[(y, s)]]
                mat = mat @ (op.conj().T if nu == "+" else op)
            total += coef * mat
    return total


def dense_pressure(h, beta, volume):
    e = np.linalg.eigvalsh(h)
    return float(logsumexp(-beta * e) / (beta * volume))


def dense_gibbs(h, beta):
    rho = expm(-beta * (h - np.linalg.eigvalsh(h).min() * np.eye(len(h))))
    return rho / np.trace(rho)


def band_pressure_quad(band, beta, spin_count=1):
    """``spin_count / (2 pi beta) * int ln(1 + exp(-beta e(k))) dk`` by adaptive quadrature."""
    val, _ = quad(lambda k: np.logaddexp(0.0, -beta * band(k)), -np.pi, np.pi,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    return spin_count * val / (2 * np.pi * beta)


def bcs_flat_gap(beta, coupling=1.0):
    """Positive root of ``1 = tanh(beta g d / 2) / (2 d)`` for the flat-band on-site pairing channel.

    With weight ``g`` the one-site Hamiltonian ``-g (conj(d) B + d B*)``
    has levels ``0, 0, +-g|d|`` and ``|<B>| = tanh(beta g |d| / 2) / 2``.
    Returns 0 below the onset ``beta g = 4``.
    """
    g = lambda d: np.tanh(beta * coupling * d / 2) / (2 * d) - 1.0
    if beta * coupling <= 4.0:
        return 0.0
    return brentq(g, 1e-12, 1.0, xtol=1e-15, rtol=1e-15)
