"""Quasi-free thermodynamics of quadratic kernels in momentum space.

A quadratic kernel ``X`` on a periodic grid of ``N`` momenta is written as

    U^X = 1/2 sum_k Psi_k^* H_X(k) Psi_k + sum_k offset_X(k),
    Psi_k = (a_{k,s}, a^*_{-k,s})_s,

with ``offset_X(k) = tr h_X(k) / 2 + const_X``. Both ``H_X`` and the offset
are linear in the kernel, also for kernels that are not self-adjoint, which
is what channel expectations need. On the grid of a box with side ``l`` the
formulas reproduce exact diagonalization with periodic boundary conditions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import (
    ANNIHILATE,
    CREATE,
    InteractionKernel,
    LongRangeModel,
    ModelError,
    build_approximating_interaction,
)

DEFAULT_TOL = 1e-9
MAX_POINTS_PER_DIM = 2**16
MAX_TOTAL_POINTS = 2**22
_START_POINTS = 8


class NotQuadraticError(ModelError):
    """A kernel with more than two ladder operators per term."""


class ConvergenceError(RuntimeError):
    """Grid refinement or an iterative solver did not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


def ln_two_cosh(x):
    """Overflow-safe ``ln(2 cosh x)``."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax))


# ---------------------------------------------------------------------------
# momentum grids


def momentum_grid(points_per_dim: int, dim: int) -> np.ndarray:
    """Grid ``2 pi m / n`` in every direction, shape ``(n**dim, dim)``."""
    axis = 2.0 * np.pi * np.arange(points_per_dim) / points_per_dim
    axis = np.where(axis > np.pi, axis - 2.0 * np.pi, axis)
    return np.array(list(itertools.product(axis, repeat=dim)), dtype=float).reshape(-1, dim)


def box_grid(side: int, dim: int) -> np.ndarray:
    """Reciprocal lattice of the box with side ``l`` (``2l+1`` points per axis)."""
    return momentum_grid(2 * side + 1, dim)


# ---------------------------------------------------------------------------
# Nambu blocks


def _classify(kernel: InteractionKernel):
    if not kernel.is_quadratic():
        bad = next(s for s in kernel if len(s) not in (0, 2))
        raise NotQuadraticError(f"not quadratic: term with {len(bad)} ladder operators")
    hop, cre, ann = [], [], []
    for sig, c in kernel.items():
        if not sig:
            continue
        (nu1, s1, _), (nu2, s2, r) = sig
        entry = (np.array(r, dtype=float), s1, s2, c)
        if nu1 == CREATE and nu2 == ANNIHILATE:
            hop.append(entry)
        elif nu1 == CREATE:
            cre.append(entry)
        else:
            ann.append(entry)
    return hop, cre, ann


def _fourier(entries, spins, ks, sign: float) -> np.ndarray:
    m = len(spins)
    out = np.zeros((len(ks), m, m), dtype=complex)
    index = {s: i for i, s in enumerate(spins)}
    for r, s1, s2, c in entries:
        out[:, index[s1], index[s2]] += c * np.exp(sign * 1j * (ks @ r))
    return out


def nambu_blocks(kernel: InteractionKernel, spins: Sequence[str], ks: np.ndarray):
    """Nambu matrices ``H_X(k)`` and offsets for a quadratic kernel.

    Parameters
    ----------
    kernel : InteractionKernel
        Quadratic, not necessarily self-adjoint.
    spins : sequence of str
        Spin order of the Nambu spinor.
    ks : ndarray, shape (n, d)
        Momenta; must be closed under ``k -> -k`` modulo ``2 pi``.

    Returns
    -------
    nambu : ndarray, shape (n, 2M, 2M)
    offset : ndarray, shape (n,)
    hopping_trace : ndarray, shape (n,)
        ``tr h_X(k)``.
    """
    spins = list(spins)
    unknown = kernel.spins() - set(spins)
    if unknown:
        raise ModelError(f"kernel uses spin labels {sorted(unknown)} absent from the lattice")
    hop, cre, ann = _classify(kernel)
    hk = _fourier(hop, spins, ks, +1.0)
    hmk = _fourier(hop, spins, -ks, +1.0)
    pk = _fourier(cre, spins, ks, +1.0)
    pmk = _fourier(cre, spins, -ks, +1.0)
    qk = _fourier(ann, spins, ks, -1.0)
    qmk = _fourier(ann, spins, -ks, -1.0)
    m = len(spins)
    nambu = np.zeros((len(ks), 2 * m, 2 * m), dtype=complex)
    nambu[:, :m, :m] = hk
    nambu[:, :m, m:] = pk - np.swapaxes(pmk, 1, 2)
    nambu[:, m:, :m] = qmk - np.swapaxes(qk, 1, 2)
    nambu[:, m:, m:] = -np.swapaxes(hmk, 1, 2)
    trace = np.trace(hk, axis1=1, axis2=2)
    offset = 0.5 * trace + kernel.constant()
    return nambu, offset, trace


def _pressure_from_spectrum(eps: np.ndarray, offset: np.ndarray, beta: float) -> float:
    per_k = 0.5 * np.sum(ln_two_cosh(0.5 * beta * eps), axis=1) / beta - offset.real
    return float(np.mean(per_k))


def _nambu_green(eps: np.ndarray, vecs: np.ndarray, beta: float) -> np.ndarray:
    """``G(k) = <Psi_k Psi_k^*> = V diag(fermi(-eps)) V^*``."""
    occ = 0.5 * (1.0 + np.tanh(0.5 * beta * eps))
    return np.einsum("nij,nj,nkj->nik", vecs, occ, np.conj(vecs))


def _expectation_from_green(nambu, offset, trace, green) -> complex:
    """Per-site expectation of a quadratic kernel given Nambu Green functions."""
    const = offset - 0.5 * trace
    tr_hg = np.einsum("nij,nji->n", nambu, green)
    return complex(np.mean(0.5 * trace - 0.5 * tr_hg + const))


# ---------------------------------------------------------------------------
# quadratic forms


@dataclass(frozen=True)
class QuadraticForm:
    """Hopping, pairing and constant of a self-adjoint quadratic kernel.

    Attributes
    ----------
    dim : int
    spins : tuple of str
    hopping : dict
        ``(r, s, s') -> h`` for the term ``h a^*_{0,s} a_{r,s'}``.
    pairing : dict
        ``(r, s, s') -> g`` for ``g a^*_{0,s} a^*_{r,s'}``, stored antisymmetrized
        so that ``g(-r; s', s) = -g(r; s, s')``. The annihilating pairs are
        the adjoint terms.
    shift : float
        Constant energy per site.
    """

    dim: int
    spins: tuple
    hopping: Mapping = field(default_factory=dict)
    pairing: Mapping = field(default_factory=dict)
    shift: float = 0.0

    @classmethod
    def from_kernel(cls, kernel: InteractionKernel, spins: Sequence[str] | None = None) -> "QuadraticForm":
        return quadratic_from_kernel(kernel, spins)

    def to_kernel(self) -> InteractionKernel:
        origin = (0,) * self.dim
        terms = [((), self.shift)] if self.shift else []
        for (r, s1, s2), h in self.hopping.items():
            terms.append((((CREATE, s1, origin), (ANNIHILATE, s2, r)), h))
        for (r, s1, s2), g in self.pairing.items():
            terms.append((((CREATE, s1, origin), (CREATE, s2, r)), g))
            # adjoint: conj(g) a_{r,s'} a_{0,s}
            terms.append((((ANNIHILATE, s2, r), (ANNIHILATE, s1, origin)), np.conj(g)))
        return InteractionKernel(terms, self.dim)

    def hopping_matrix(self, ks: np.ndarray) -> np.ndarray:
        """``h(k)_{ss'} = sum_r h(r; s, s') e^{i k.r}``."""
        entries = [(np.array(r, float), s1, s2, h) for (r, s1, s2), h in self.hopping.items()]
        return _fourier(entries, self.spins, np.atleast_2d(ks), +1.0)

    def nambu(self, ks: np.ndarray):
        return nambu_blocks(self.to_kernel(), self.spins, np.atleast_2d(ks))


def quadratic_from_kernel(kernel: InteractionKernel, spins: Sequence[str] | None = None) -> QuadraticForm:
    """Extract hopping, pairing and constant from a quadratic kernel."""
    hop, cre, _ = _classify(kernel)
    bad = kernel.self_adjoint_violation(1e-10)
    if bad is not None:
        raise ModelError("quadratic form requires a self-adjoint kernel")
    spins = tuple(spins) if spins is not None else tuple(sorted(kernel.spins()))
    hopping = {}
    for r, s1, s2, c in hop:
        hopping[(tuple(int(v) for v in r), s1, s2)] = c
    pairing: dict = {}
    for r, s1, s2, c in cre:
        key = (tuple(int(v) for v in r), s1, s2)
        mirror = (tuple(-int(v) for v in r), s2, s1)
        pairing[key] = pairing.get(key, 0) + 0.5 * c
        pairing[mirror] = pairing.get(mirror, 0) - 0.5 * c
    const = kernel.constant()
    return QuadraticForm(kernel.dim, spins, hopping, pairing, float(np.real(const)))


@dataclass(frozen=True)
class BdGSpectrum:
    """Quasi-particle energies at one momentum.

    The ``2M`` entries of ``energies`` are the absolute Nambu eigenvalues,
    each entering the grand potential with weight one half, and ``offset``
    is the constant energy per momentum, so that the contribution of ``k``
    to ``ln Z`` is ``sum_j ln(2 cosh(beta E_j / 2)) / 2 - beta * offset``.
    """

    momentum: np.ndarray
    energies: np.ndarray
    offset: float


def bdg_spectrum(form: QuadraticForm, k) -> BdGSpectrum:
    k = np.atleast_1d(np.asarray(k, dtype=float)).reshape(1, -1)
    if k.shape[1] != form.dim:
        raise ModelError(f"momentum of dimension {k.shape[1]} for a {form.dim}-dimensional form")
    if np.any(np.abs(k) > np.pi + 1e-12):
        raise ModelError("momentum must lie in [-pi, pi]^d")
    nambu, offset, _ = form.nambu(k)
    if np.max(np.abs(nambu - np.conj(np.swapaxes(nambu, 1, 2)))) > 1e-10:
        raise ModelError("Nambu block is not hermitian")
    eps = np.linalg.eigvalsh(nambu[0])
    return BdGSpectrum(k[0], np.sort(np.abs(eps)), float(offset[0].real))


def spectrum_csv_rows(form: QuadraticForm, ks: np.ndarray) -> list[list[float]]:
    """Rows ``k_1..k_d, E_1..E_2M`` for CSV export."""
    rows = []
    for k in np.atleast_2d(ks):
        spec = bdg_spectrum(form, k)
        rows.append(list(k) + list(spec.energies))
    return rows


# ---------------------------------------------------------------------------
# pressures on grids


def _grid_sequence(dim: int, max_points_per_dim: int):
    n = _START_POINTS
    while n <= max_points_per_dim and n**dim <= MAX_TOTAL_POINTS:
        yield n
        n *= 2


def pressure_on_grid(form: QuadraticForm | InteractionKernel, beta: float, ks: np.ndarray,
                     spins: Sequence[str] | None = None) -> float:
    kernel = form.to_kernel() if isinstance(form, QuadraticForm) else form
    spins = form.spins if isinstance(form, QuadraticForm) else (spins or tuple(sorted(kernel.spins())))
    nambu, offset, _ = nambu_blocks(kernel, spins, ks)
    eps = np.linalg.eigvalsh(nambu)
    return _pressure_from_spectrum(eps, offset, beta)


def pressure_quasifree(form: QuadraticForm, beta: float, tol: float = DEFAULT_TOL,
                       side: int | None = None,
                       max_points_per_dim: int = MAX_POINTS_PER_DIM) -> float:
    """Pressure of the quasi-free Gibbs state of a quadratic form.

    Parameters
    ----------
    form : QuadraticForm
    beta : float
    tol : float
        Relative tolerance between successive doubled grids.
    side : int, optional
        Evaluate on the reciprocal lattice of the box with this side instead
        (the exact finite-volume pressure with periodic boundaries).
    """
    if beta <= 0:
        raise ModelError("beta must be positive")
    if side is not None:
        return pressure_on_grid(form, beta, box_grid(side, form.dim))
    previous = None
    for n in _grid_sequence(form.dim, max_points_per_dim):
        value = pressure_on_grid(form, beta, momentum_grid(n, form.dim))
        if previous is not None and abs(value - previous) <= tol * max(1.0, abs(value)):
            return value
        previous = value
    raise ConvergenceError("momentum grid refinement did not converge within the grid cap")


# ---------------------------------------------------------------------------
# affine families Phi(c)


class QuasiFreeFamily:
    """Pressure and channel expectations along ``c -> Phi(c)`` for quadratic models.

    The Nambu matrices of ``Phi`` and of every channel operator are computed
    once per grid and combined linearly.

    Parameters
    ----------
    model : LongRangeModel
    tol : float
        Convergence tolerance for grid doubling; ignored when ``side`` is set.
    side : int, optional
        Fixed finite grid of the box with this side.
    """

    exact = True
    name = "quasifree"

    def __init__(self, model: LongRangeModel, tol: float = 1e-12, side: int | None = None,
                 max_points_per_dim: int = MAX_POINTS_PER_DIM):
        if not model.is_quadratic():
            raise NotQuadraticError("not quadratic: the approximating interactions need the ED engine")
        self.model = model
        self.beta = model.beta
        self.tol = tol
        self.side = side
        self.max_points_per_dim = max_points_per_dim
        self.weights = model.weights
        self.gammas = model.gammas
        self._cache: dict = {}

    def _blocks(self, ks_key):
        if ks_key not in self._cache:
            ks = box_grid(self.side, self.model.lattice.dim) if ks_key == "box" else \
                momentum_grid(ks_key, self.model.lattice.dim)
            spins = self.model.lattice.spins
            base = nambu_blocks(self.model.local, spins, ks)
            chans = [nambu_blocks(ch.operator, spins, ks) for ch in self.model.channels]
            self._cache[ks_key] = (base, chans)
        return self._cache[ks_key]

    def _evaluate_on(self, ks_key, c):
        (h0, off0, _), chans = self._blocks(ks_key)
        h = h0.copy()
        off = off0.astype(complex).copy()
        for ck, w, g, (hb, ob, _) in zip(c, self.weights, self.gammas, chans):
            if ck == 0:
                continue
            coef = w * g
            h += coef * (np.conj(ck) * hb + ck * np.conj(np.swapaxes(hb, 1, 2)))
            off += coef * (np.conj(ck) * ob + ck * np.conj(ob))
        eps, vecs = np.linalg.eigh(h)
        p = _pressure_from_spectrum(eps, off, self.beta)
        green = _nambu_green(eps, vecs, self.beta)
        d = np.array([_expectation_from_green(hb, ob, tb, green) for hb, ob, tb in chans], dtype=complex)
        return p, d

    def __call__(self, c) -> tuple[float, np.ndarray]:
        c = np.asarray(c, dtype=complex)
        if self.side is not None:
            return self._evaluate_on("box", c)
        previous = None
        for n in _grid_sequence(self.model.lattice.dim, self.max_points_per_dim):
            p, d = self._evaluate_on(n, c)
            if previous is not None:
                dp = abs(p - previous[0])
                dd = np.max(np.abs(d - previous[1]), initial=0.0)
                if dp <= self.tol * max(1.0, abs(p)) and dd <= self.tol:
                    return p, d
            previous = (p, d)
        raise ConvergenceError("momentum grid refinement did not converge within the grid cap")


def channel_expectation(model: LongRangeModel, c, beta: float | None = None,
                        tol: float = 1e-12, side: int | None = None) -> np.ndarray:
    """Channel energy densities ``d_k = e_{Phi_k}(omega) + i e_{Phi_k'}(omega)``.

    ``omega`` is the quasi-free Gibbs state of ``Phi(c)``.
    """
    if beta is not None:
        model = model.with_beta(beta)
    vals = getattr(c, "values", c)
    return QuasiFreeFamily(model, tol=tol, side=side)(vals)[1]


def approximating_pressure(model: LongRangeModel, c, beta: float | None = None,
                           tol: float = 1e-12, side: int | None = None) -> float:
    """Pressure ``P_m(c)`` of the approximating interaction ``Phi(c)``."""
    if beta is not None:
        model = model.with_beta(beta)
    vals = getattr(c, "values", c)
    return QuasiFreeFamily(model, tol=tol, side=side)(vals)[0]


# ---------------------------------------------------------------------------
# Hubbard-type models


class QuadratureError(RuntimeError):
    """The profile quadrature did not reach the requested accuracy."""


@dataclass(frozen=True)
class HubbardTypeModel:
    """Free hopping plus density channels with macroscopic profiles.

    Channel ``k`` couples ``f_k(x / L)`` to the local density, so the
    approximating interaction at rescaled position ``zeta`` in
    ``[-1/2, 1/2]^d`` carries the potential
    ``V(zeta) = 2 sum_k w_k gamma_k Re(c_k) f_k(zeta)``.

    Attributes
    ----------
    dim : int
    spins : tuple of str
    hopping : dict
        Displacement ``x - y`` to ``h(x - y)`` (spin-diagonal; include the
        chemical potential as ``h(0) = -mu``).
    profiles : tuple of callables
        Vectorized ``f_k(zeta)`` acting on arrays of shape ``(n, d)``.
    gammas, weights : tuples
    beta : float
    breakpoints : tuple of float
        Interior points of ``[-1/2, 1/2]`` where some profile has a kink or
        a jump; the quadrature is split there.
    """

    dim: int
    spins: tuple
    hopping: Mapping
    profiles: tuple
    gammas: tuple
    weights: tuple
    beta: float = 1.0
    breakpoints: tuple = ()
    name: str = field(default="hubbard-type", compare=False)

    def __post_init__(self):
        if len(self.profiles) != len(self.gammas) or len(self.gammas) != len(self.weights):
            raise ModelError("profiles, gammas and weights must have equal length")
        for g in self.gammas:
            if g not in (-1, 1):
                raise ModelError(f"channel sign gamma must be -1 or +1, got {g}")
        for w in self.weights:
            if not w > 0:
                raise ModelError(f"channel weight must be positive, got {w}")
        for r, h in self.hopping.items():
            mirror = tuple(-v for v in r)
            if abs(self.hopping.get(mirror, 0) - np.conj(h)) > 1e-12:
                raise ModelError(f"hopping is not hermitian at displacement {r}")

    @property
    def n_channels(self) -> int:
        return len(self.profiles)

    def with_beta(self, beta: float) -> "HubbardTypeModel":
        return HubbardTypeModel(self.dim, self.spins, self.hopping, self.profiles, self.gammas,
                                self.weights, float(beta), self.breakpoints, self.name)

    def fingerprint(self) -> str:
        import hashlib
        import json
        zeta = _quadrature(self.dim, 4, self.breakpoints)[0]
        payload = {
            "dim": self.dim, "spins": list(self.spins), "beta": self.beta,
            "hopping": sorted([list(r), h.real, h.imag] for r, h in
                              ((r, complex(h)) for r, h in self.hopping.items())),
            "gammas": list(self.gammas), "weights": [float(w) for w in self.weights],
            "profiles": [np.round(np.asarray(f(zeta), float), 12).tolist() for f in self.profiles],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def search_radius(self) -> float:
        zeta, wts = _quadrature(self.dim, 16, self.breakpoints)
        norms = [np.sqrt(np.sum(wts * np.asarray(f(zeta), float) ** 2)) for f in self.profiles]
        # |f_k| times the number of spin states bounds the channel density
        a = np.sqrt(np.sum(np.asarray(self.weights) * (len(self.spins) * np.array(norms, float)) ** 2))
        return 2.0 * float(a) + 1.0


def _quadrature(dim: int, order: int, breakpoints: Sequence[float] = ()):
    """Composite Gauss-Legendre rule on ``[-1/2, 1/2]^d``."""
    edges = np.unique(np.concatenate([[-0.5, 0.5], np.clip(np.asarray(breakpoints, float), -0.5, 0.5)]))
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    grid = np.array(list(itertools.product(nodes, repeat=dim))).reshape(-1, dim)
    wgrid = np.prod(np.array(list(itertools.product(weights, repeat=dim))).reshape(-1, dim), axis=1)
    return grid, wgrid


class HubbardTypeFamily:
    """Pressure and channel densities of a Hubbard-type model along ``c``."""

    exact = True
    name = "hubbard-type"

    def __init__(self, model: HubbardTypeModel, quad_order: int = 24, tol: float = 1e-12,
                 max_points_per_dim: int = MAX_POINTS_PER_DIM):
        self.model = model
        self.beta = model.beta
        self.tol = tol
        self.max_points_per_dim = max_points_per_dim
        self.weights = np.asarray(model.weights, float)
        self.gammas = np.asarray(model.gammas, int)
        self.zeta, self.zweights = _quadrature(model.dim, quad_order, model.breakpoints)
        self.profile_values = np.array([np.asarray(f(self.zeta), float).reshape(-1)
                                        for f in model.profiles]).reshape(len(model.profiles), len(self.zeta))
        self._dispersion: dict = {}

    def _band(self, n):
        if n not in self._dispersion:
            ks = momentum_grid(n, self.model.dim)
            band = np.zeros(len(ks))
            for r, h in self.model.hopping.items():
                band = band + np.real(h * np.exp(1j * (ks @ np.asarray(r, float))))
            self._dispersion[n] = band
        return self._dispersion[n]

    def potential(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        coef = 2.0 * self.weights * self.gammas * c.real
        return coef @ self.profile_values if len(coef) else np.zeros(len(self.zeta))

    def _evaluate_on(self, n, c):
        band = self._band(n)
        v = self.potential(c)
        x = -self.beta * (band[None, :] + v[:, None])
        spin_count = len(self.model.spins)
        local_p = spin_count * np.mean(np.logaddexp(0.0, x), axis=1) / self.beta
        density = spin_count * np.mean(0.5 * (1.0 + np.tanh(0.5 * x)), axis=1)
        p = float(np.sum(self.zweights * local_p))
        d = (self.profile_values * density[None, :]) @ self.zweights
        return p, d.astype(complex)

    def __call__(self, c):
        previous = None
        for n in _grid_sequence(self.model.dim, self.max_points_per_dim):
            p, d = self._evaluate_on(n, c)
            if previous is not None:
                if abs(p - previous[0]) <= self.tol * max(1.0, abs(p)) and \
                        np.max(np.abs(d - previous[1]), initial=0.0) <= self.tol:
                    return p, d
            previous = (p, d)
        raise ConvergenceError("momentum grid refinement did not converge within the grid cap")


def hubbard_type_pressure_at(model: HubbardTypeModel, c, quad_order: int = 24) -> float:
    """``P(c) = int p(zeta, c) d zeta`` for fixed channel amplitudes."""
    return HubbardTypeFamily(model, quad_order)(np.asarray(c, dtype=complex))[0]


def pressure_hubbard_type(model: HubbardTypeModel, beta: float | None = None, quad_order: int = 24,
                          quad_tol: float = 1e-8, **solver_options) -> float:
    """Infinite-volume pressure ``-F#`` of a Hubbard-type model.

    The game is solved with quadrature orders ``n`` and ``2n``; a
    disagreement above ``quad_tol`` raises :class:`QuadratureError`.
    """
    from .game import ThermodynamicGame, solve_game

    if beta is not None:
        model = model.with_beta(beta)
    values = []
    for order in (quad_order, 2 * quad_order):
        fam = HubbardTypeFamily(model, order)
        game = ThermodynamicGame(fam.weights, fam.gammas, fam, model.search_radius(),
                                 exact=True, engine="hubbard-type")
        values.append(solve_game(game, **solver_options).pressure)
    if abs(values[0] - values[1]) > quad_tol:
        raise QuadratureError(
            f"profile quadrature not converged: orders {quad_order} and {2 * quad_order} "
            f"differ by {abs(values[0] - values[1]):.3e}"
        )
    return values[1]
