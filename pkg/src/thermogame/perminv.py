"""One-site variational problem for permutation-invariant models.

When every kernel is single-site, the pressure is

    -min_rho [ sum_k w_k gamma_k |rho(B_k)|^2 + rho(E) - S(rho) / beta ]

over even density matrices ``rho`` of one site. The minimization runs over
block-diagonal square roots ``X`` (``rho = X^* X / Tr X^* X``) with an
analytic gradient and L-BFGS from several random starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .fockspace import FockBasis, _popcount, build_internal_energy, gibbs_state, kernel_operator
from .model import Lattice, LongRangeModel, ModelError

DEFAULT_SEEDS = 8


@dataclass(frozen=True)
class OneSiteState:
    """Density matrix on the one-site Fock space."""

    density: np.ndarray
    even: bool

    @property
    def odd_block_norm(self) -> float:
        par = _parity(self.density.shape[0])
        mask = par[:, None] != par[None, :]
        return float(np.max(np.abs(self.density[mask]), initial=0.0))


def _parity(dim: int) -> np.ndarray:
    return _popcount(np.arange(dim, dtype=np.int64)) & 1


class _OneSiteProblem:
    def __init__(self, model: LongRangeModel):
        if not model.is_single_site():
            raise ModelError("not permutation invariant: every kernel must act on a single site")
        site = Lattice(model.lattice.dim, model.lattice.spins, 0)
        self.energy = kernel_operator(model.local, site).toarray()
        self.ops = [kernel_operator(ch.operator, site).toarray() for ch in model.channels]
        self.coef = model.weights * model.gammas
        self.beta = model.beta
        self.dim = self.energy.shape[0]
        par = _parity(self.dim)
        self.mask = (par[:, None] == par[None, :])
        self.n_free = int(self.mask.sum())

    def unpack(self, v: np.ndarray) -> np.ndarray:
        x = np.zeros((self.dim, self.dim), dtype=complex)
        x[self.mask] = v[: self.n_free] + 1j * v[self.n_free:]
        return x

    def density(self, x: np.ndarray) -> np.ndarray:
        rho = x.conj().T @ x
        return rho / np.trace(rho).real

    def free_energy(self, rho: np.ndarray) -> float:
        p = np.linalg.eigvalsh(rho)
        p = p[p > 1e-300]
        ent = -float(np.sum(p * np.log(p)))
        val = float(np.trace(rho @ self.energy).real)
        for c, b in zip(self.coef, self.ops):
            val += c * abs(np.trace(rho @ b)) ** 2
        return val - ent / self.beta

    def value_and_grad(self, v: np.ndarray):
        x = self.unpack(v)
        t = float(np.trace(x.conj().T @ x).real)
        rho = x.conj().T @ x / t
        p, u = np.linalg.eigh(rho)
        p = np.clip(p, 1e-300, None)
        log_rho = (u * np.log(p)) @ u.conj().T
        g = self.energy + (log_rho + np.eye(self.dim)) / self.beta
        val = float(np.trace(rho @ self.energy).real) - float(-np.sum(p * np.log(p))) / self.beta
        for c, b in zip(self.coef, self.ops):
            a = np.trace(rho @ b)
            val += c * abs(a) ** 2
            g = g + c * (np.conj(a) * b + a * b.conj().T)
        k = g - np.trace(g @ rho) * np.eye(self.dim)
        m = k @ x.conj().T
        grad_re = (2.0 / t) * m.T.real
        grad_im = -(2.0 / t) * m.T.imag
        return val, np.concatenate([grad_re[self.mask], grad_im[self.mask]])


def perminv_minimizers(model: LongRangeModel, seeds: int = DEFAULT_SEEDS, seed: int = 0,
                       cluster_tol: float = 1e-5) -> list[tuple[float, OneSiteState]]:
    """All distinct local minimizers found from ``seeds`` random starts, best first."""
    prob = _OneSiteProblem(model)
    rng = np.random.default_rng(seed)
    found = []
    for _ in range(seeds):
        v0 = rng.standard_normal(2 * prob.n_free)
        res = minimize(prob.value_and_grad, v0, jac=True, method="L-BFGS-B",
                       options={"ftol": 1e-16, "gtol": 1e-11, "maxiter": 5000, "maxcor": 30})
        rho = prob.density(prob.unpack(res.x))
        rho = 0.5 * (rho + rho.conj().T)
        found.append((prob.free_energy(rho), rho))
    found.sort(key=lambda item: item[0])
    distinct: list[tuple[float, OneSiteState]] = []
    for val, rho in found:
        if all(0.5 * np.abs(np.linalg.eigvalsh(rho - s.density)).sum() > cluster_tol for _, s in distinct):
            distinct.append((val, OneSiteState(rho, True)))
    return distinct


def perminv_pressure(model: LongRangeModel, seeds: int = DEFAULT_SEEDS, seed: int = 0) -> tuple[float, OneSiteState]:
    """Pressure of a permutation-invariant model and the optimal one-site state."""
    best_val, best_state = perminv_minimizers(model, seeds, seed)[0]
    return -best_val, best_state


def product_state_free_energy(model: LongRangeModel, rho: np.ndarray) -> float:
    """One-site free-energy functional at an explicit even state ``rho``."""
    return _OneSiteProblem(model).free_energy(np.asarray(rho, dtype=complex))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


@dataclass
class GibbsLimitReport:
    sides: list
    distances: list
    minimizers: list


def perminv_gibbs_limit_check(model: LongRangeModel, sides, seeds: int = DEFAULT_SEEDS,
                              seed: int = 0) -> GibbsLimitReport:
    """Trace distance between one-site reduced Gibbs states and the one-site minimizers."""
    mins = perminv_minimizers(model, seeds, seed)
    best = mins[0][0]
    optimal = [s.density for v, s in mins if v <= best + 1e-8]
    dists = []
    n_spin = len(model.lattice.spins)
    for l in sides:
        lat = model.lattice.with_side(l)
        state = gibbs_state(build_internal_energy(model, lat, pbc=True), model.beta)
        reduced = state.reduced_density_matrix(n_spin)
        dists.append(min(trace_distance(reduced, rho) for rho in optimal))
    return GibbsLimitReport(list(sides), dists, optimal)
