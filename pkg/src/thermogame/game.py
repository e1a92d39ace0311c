"""The thermodynamic game of a long-range model.

The payoff of the two-person zero-sum game is

    f(c_-, c_+) = -||c_+||^2 + ||c_-||^2 - P(c_- + c_+),

where ``P(c)`` is the pressure of the approximating interaction ``Phi(c)``
and ``c_-`` / ``c_+`` live on the attractive (``gamma = -1``) and repulsive
(``gamma = +1``) channels. The min-max value ``F#`` equals minus the
pressure of the model; the max-min value ``Fb`` is a lower bound.

A game only needs the channel weights and signs plus a *family*: a callable
``c -> (P(c), d(c))`` returning the pressure and the channel energy densities
``d_k``, which satisfy ``dP / d conj(c_k) = -w_k gamma_k d_k``. Families for
single-site models (exact), quadratic models (quasi-free, exact in infinite
volume), Hubbard-type profiles and finite boxes (ED, approximate) are
provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .fockspace import (
    FockBasis,
    _gather_blocks,
    block_structure,
    build_internal_energy,
    gibbs_state,
    kernel_operator,
    lro_estimator,
    pressure_ed,
)
from .model import (
    Channel,
    ChannelVector,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    ModelError,
    weighted_inner,
    weighted_norm,
)
from .quasifree import ConvergenceError, HubbardTypeFamily, HubbardTypeModel, QuasiFreeFamily

DEFAULT_TOL = 1e-8
DEFAULT_STARTS = 16
CLUSTER_RADIUS = 1e-4
PHASE_TOL = 1e-9


class SolverError(RuntimeError):
    """The game solver failed (boundary minimizer, non-convergence)."""


# ---------------------------------------------------------------------------
# families


class OneSiteFamily:
    """Exact infinite-volume family for models whose kernels are all single-site."""

    exact = True
    name = "one-site"

    def __init__(self, model: LongRangeModel):
        if not model.is_single_site():
            raise ModelError("the one-site engine needs single-site kernels")
        self.beta = model.beta
        site = Lattice(model.lattice.dim, model.lattice.spins, 0)
        self.base = kernel_operator(model.local, site).toarray()
        self.ops = [kernel_operator(ch.operator, site).toarray() for ch in model.channels]
        self.weights = model.weights
        self.gammas = model.gammas

    def hamiltonian(self, c) -> np.ndarray:
        h = self.base.copy()
        for ck, w, g, b in zip(c, self.weights, self.gammas, self.ops):
            if ck != 0:
                h += w * g * (np.conj(ck) * b + ck * b.conj().T)
        return h

    def __call__(self, c):
        c = np.asarray(c, dtype=complex)
        e, v = np.linalg.eigh(self.hamiltonian(c))
        log_z = np.logaddexp.reduce(-self.beta * e)  # far cheaper per call than scipy's logsumexp
        p = np.exp(-self.beta * e - log_z)
        rho = (v * p) @ v.conj().T
        d = np.array([np.trace(rho @ b) for b in self.ops], dtype=complex)
        return float(log_z / self.beta), d


class FiniteVolumeFamily:
    """Finite-box family ``c -> (p_l(Phi(c)), |Lambda|^-1 <U^{B_k}>)`` by exact diagonalization.

    The joint block structure of the local energy and the channel operators
    is computed once; each block of every operator is stored densely so an
    evaluation is a batched dense eigendecomposition.
    """

    exact = False
    name = "ed"
    dense_budget = 2 ** 24  # stored matrix entries per operator

    def __init__(self, model: LongRangeModel, side: int | None = None, pbc: bool = True):
        self.beta = model.beta
        self.lattice = model.lattice.with_side(model.lattice.side if side is None else side)
        base = kernel_operator(model.local, self.lattice, pbc).matrix
        ops = [kernel_operator(ch.operator, self.lattice, pbc).matrix for ch in model.channels]
        self.weights = model.weights
        self.gammas = model.gammas
        dim = base.shape[0]
        structure = block_structure([base] + ops + [b.conj().T for b in ops], dim)
        labels, position, members = structure
        stored = sum(idx.shape[0] * idx.shape[1] ** 2 for idx in members.values())
        if stored > self.dense_budget:
            raise ModelError(f"box too large for the ED engine: {stored} stored block entries")
        self.groups = []
        for idx in members.values():
            self.groups.append((_gather_blocks(base, labels, position, idx),
                                [_gather_blocks(b, labels, position, idx) for b in ops]))

    def __call__(self, c):
        c = np.asarray(c, dtype=complex)
        coef = self.weights * self.gammas
        energies, vectors = [], []
        for base, ops in self.groups:
            h = base.copy()
            for ck, a, b in zip(c, coef, ops):
                if ck != 0:
                    h += a * (np.conj(ck) * b + ck * np.conj(np.swapaxes(b, 1, 2)))
            e, v = np.linalg.eigh(h)
            energies.append(e)
            vectors.append(v)
        log_z = float(np.logaddexp.reduce(np.concatenate([-self.beta * e.ravel() for e in energies])))
        vol = self.lattice.volume
        d = np.zeros(len(c), dtype=complex)
        for (_, ops), e, v in zip(self.groups, energies, vectors):
            p = np.exp(-self.beta * e - log_z)
            rho = np.einsum("nis,ns,njs->nij", v, p, v.conj())
            for k, b in enumerate(ops):
                d[k] += np.einsum("nij,nji->", rho, b)
        return log_z / (self.beta * vol), d / vol


def make_family(model: LongRangeModel, engine: str = "auto", side: int | None = None,
                tol: float = 1e-12):
    """Pick the pressure engine for ``Phi(c)``.

    ``auto`` prefers the exact one-site engine, then the quasi-free engine,
    and falls back to exact diagonalization on the model's box.
    """
    if engine == "auto":
        if model.is_single_site():
            return OneSiteFamily(model)
        if model.is_quadratic():
            return QuasiFreeFamily(model, tol=tol, side=side)
        return FiniteVolumeFamily(model, side)
    if engine == "one-site":
        return OneSiteFamily(model)
    if engine == "quasifree":
        return QuasiFreeFamily(model, tol=tol, side=side)
    if engine == "ed":
        return FiniteVolumeFamily(model, side)
    raise ModelError(f"unknown engine {engine!r}")


@dataclass
class ThermodynamicGame:
    """Weights, signs and pressure family of a game.

    Attributes
    ----------
    weights : ndarray
    gammas : ndarray
    family : callable
        ``c -> (P(c), d(c))``.
    radius : float
        Radius of the weighted ball holding every optimal amplitude.
    exact : bool
        Whether ``P`` is the infinite-volume pressure.
    engine : str
    """

    weights: np.ndarray
    gammas: np.ndarray
    family: Callable
    radius: float
    exact: bool = True
    engine: str = ""
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.gammas = np.asarray(self.gammas, dtype=int)

    @classmethod
    def from_model(cls, model: LongRangeModel, engine: str = "auto", side: int | None = None,
                   tol: float = 1e-12) -> "ThermodynamicGame":
        fam = make_family(model, engine, side, tol)
        return cls(model.weights, model.gammas, fam, model.search_radius(), fam.exact, fam.name)

    @property
    def n_channels(self) -> int:
        return len(self.weights)

    @property
    def minus(self) -> np.ndarray:
        return np.flatnonzero(self.gammas < 0)

    @property
    def plus(self) -> np.ndarray:
        return np.flatnonzero(self.gammas > 0)

    def evaluate(self, c) -> tuple[float, np.ndarray]:
        c = np.asarray(c, dtype=complex)
        key = c.tobytes()
        hit = self._memo.get(key)
        if hit is None:
            hit = self.family(c)
            if len(self._memo) > 20000:
                self._memo.clear()
            self._memo[key] = hit
        return hit

    def payoff(self, c_minus, c_plus) -> float:
        c_minus = np.asarray(c_minus, dtype=complex)
        c_plus = np.asarray(c_plus, dtype=complex)
        p, _ = self.evaluate(c_minus + c_plus)
        w = self.weights
        return float(-np.sum(w * np.abs(c_plus) ** 2) + np.sum(w * np.abs(c_minus) ** 2) - p)


def _as_game(model_or_game, beta=None, engine="auto", side=None) -> ThermodynamicGame:
    if isinstance(model_or_game, ThermodynamicGame):
        return model_or_game
    model = model_or_game if beta is None else model_or_game.with_beta(beta)
    if isinstance(model, HubbardTypeModel):
        fam = HubbardTypeFamily(model)
        return ThermodynamicGame(fam.weights, fam.gammas, fam, model.search_radius(), True, fam.name)
    return ThermodynamicGame.from_model(model, engine, side)


def _values(c, n: int) -> np.ndarray:
    if c is None:
        return np.zeros(n, dtype=complex)
    vals = c.values if isinstance(c, ChannelVector) else np.asarray(c, dtype=complex)
    if len(vals) != n:
        raise ModelError(f"expected {n} channel amplitudes, got {len(vals)}")
    return np.array(vals, dtype=complex)


def approx_free_energy(model, c_minus, c_plus, beta: float | None = None, engine: str = "auto") -> float:
    """Payoff ``f(c_-, c_+) = -||c_+||^2 + ||c_-||^2 - P(c_- + c_+)``."""
    game = _as_game(model, beta, engine)
    cm = _values(c_minus, game.n_channels)
    cp = _values(c_plus, game.n_channels)
    if np.any(cm[game.plus] != 0) or np.any(cp[game.minus] != 0):
        raise ModelError("amplitudes must lie in their sign sectors")
    return game.payoff(cm, cp)


# ---------------------------------------------------------------------------
# inner problem: repulsive best response


@dataclass
class InnerResult:
    c_plus: np.ndarray
    value: float  # f(c_-, r_+(c_-))
    residual: float
    iterations: int


def _to_real(c: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.concatenate([c[idx].real, c[idx].imag])


def _to_complex(x: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    c = np.zeros(n, dtype=complex)
    k = len(idx)
    c[idx] = x[:k] + 1j * x[k:]
    return c


def _solve_inner(game: ThermodynamicGame, c_minus: np.ndarray, tol: float = 1e-11,
                 start: np.ndarray | None = None, damping: float = 0.5, window: int = 4,
                 max_iter: int = 1000) -> InnerResult:
    """Maximize the strictly concave map ``c_+ -> f(c_-, c_+)``.

    Damped fixed-point iteration ``c_+ <- c_+ + alpha (d_+ - c_+)`` (a
    gradient ascent step), accelerated by Anderson mixing over the last
    ``window`` iterates. A step is accepted only if it increases the
    objective; otherwise the plain damped step is backtracked.
    """
    n = game.n_channels
    idx = game.plus
    w = game.weights
    norm_minus = float(np.sum(w * np.abs(c_minus) ** 2))
    if len(idx) == 0:
        p, _ = game.evaluate(c_minus)
        return InnerResult(np.zeros(n, dtype=complex), norm_minus - p, 0.0, 0)

    def objective(x):
        cp = _to_complex(x, idx, n)
        p, d = game.evaluate(c_minus + cp)
        val = norm_minus - float(np.sum(w * np.abs(cp) ** 2)) - p
        return val, _to_real(d, idx) - x

    x = _to_real(start, idx) if start is not None else np.zeros(2 * len(idx))
    val, f = objective(x)
    xs, fs = [x], [f]
    wr = np.concatenate([w[idx], w[idx]])
    k = len(idx)

    def sup_norm(r):
        return float(np.max(np.abs(r[:k] + 1j * r[k:])))

    def acceptable(cval, cf, required):
        # an increase, or a change within rounding noise that lowers the residual
        noise = 4e-15 * max(1.0, abs(val))
        return cval >= val + required or (cval >= val - noise and sup_norm(cf) < sup_norm(f))

    alpha = damping
    for it in range(1, max_iter + 1):
        residual = sup_norm(f)
        if residual <= tol:
            return InnerResult(_to_complex(x, idx, n), val, residual, it - 1)
        accepted = False
        if len(xs) >= 2:
            dx = np.diff(np.array(xs), axis=0).T
            df = np.diff(np.array(fs), axis=0).T
            coef, *_ = np.linalg.lstsq(df, f, rcond=None)
            candidate = x + alpha * f - (dx + alpha * df) @ coef
            if np.all(np.isfinite(candidate)):
                cval, cf = objective(candidate)
                if acceptable(cval, cf, 0.0):
                    x, val, f = candidate, cval, cf
                    accepted = True
        if not accepted:
            slope = 2.0 * float(np.sum(wr * f * f))
            step = alpha
            while True:
                trial = x + step * f
                tval, tf = objective(trial)
                if acceptable(tval, tf, 1e-4 * step * slope):
                    break
                step *= 0.5
                if step < 1e-12:
                    raise ConvergenceError("inner maximization stalled", residual)
            x, val, f = trial, tval, tf
            alpha = min(1.0, 2.0 * step) if step == alpha else step
        xs.append(x)
        fs.append(f)
        xs, fs = xs[-(window + 1):], fs[-(window + 1):]
    residual = sup_norm(f)
    raise ConvergenceError(f"inner maximization did not converge (residual {residual:.3e})", residual)


def inner_sup(model, c_minus, beta: float | None = None, tol: float = 1e-11,
              engine: str = "auto") -> ChannelVector:
    """Unique repulsive best response ``r_+(c_-)``."""
    game = _as_game(model, beta, engine)
    res = _solve_inner(game, _values(c_minus, game.n_channels), tol)
    return ChannelVector(res.c_plus, "plus")


# ---------------------------------------------------------------------------
# outer problem


@dataclass
class Candidate:
    d_minus: np.ndarray
    r_plus: np.ndarray
    value: float
    residual: float


@dataclass
class GameSolution:
    """Result of :func:`solve_game`.

    ``multistart_minima`` lists every cluster of local minimizers with its
    value; ``conservative`` keeps the global ones together with the
    repulsive responses.
    """

    d_minus: ChannelVector
    r_plus: ChannelVector
    F_sharp: float
    F_flat: float
    pressure: float
    gap_residual: float
    multistart_minima: list
    duality_gap: float
    starts_converged: int
    starts: int
    conservative: list
    weights: np.ndarray
    gammas: np.ndarray
    engine: str = ""
    exact: bool = True

    @property
    def d(self) -> np.ndarray:
        return self.d_minus.values + self.r_plus.values


class _Outer:
    """Evaluation of ``f#(c_-) = f(c_-, r_+(c_-))`` with warm starts."""

    def __init__(self, game: ThermodynamicGame, inner_tol: float):
        self.game = game
        self.inner_tol = inner_tol
        self.n = game.n_channels
        self.idx = game.minus
        self._warm: np.ndarray | None = None

    def inner(self, c_minus: np.ndarray) -> InnerResult:
        res = _solve_inner(self.game, c_minus, self.inner_tol, start=self._warm)
        self._warm = res.c_plus
        return res

    def value(self, x: np.ndarray) -> float:
        return self.inner(_to_complex(x, self.idx, self.n)).value

    def residual_map(self, x: np.ndarray):
        cm = _to_complex(x, self.idx, self.n)
        res = self.inner(cm)
        _, d = self.game.evaluate(cm + res.c_plus)
        return _to_real(d, self.idx) - x, res


def _structured_starts(game: ThermodynamicGame, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    idx = game.minus
    k = len(idx)
    starts = [np.zeros(2 * k)]
    scale = 0.5 * game.radius
    for j in range(k):
        for part in (0, 1):
            e = np.zeros(2 * k)
            e[j + part * k] = scale / np.sqrt(game.weights[idx[j]])
            starts.append(e)
    starts = starts[:count]
    wr = np.concatenate([game.weights[idx], game.weights[idx]])
    while len(starts) < count:
        v = rng.standard_normal(2 * k)
        v /= np.sqrt(np.sum(wr * v * v))
        starts.append(v * game.radius * rng.random() ** (1.0 / (2 * k)))
    return starts


def _weighted_real_norm(x, game):
    idx = game.minus
    wr = np.concatenate([game.weights[idx], game.weights[idx]])
    return float(np.sqrt(np.sum(wr * x * x)))


def _majorize_minimize(outer: _Outer, x: np.ndarray, steps: int, tol: float) -> np.ndarray:
    """Fixed-point pre-iteration ``c_- <- c_- + alpha (d_- - c_-)`` with descent control."""
    val = outer.value(x)
    alpha = 1.0
    for _ in range(steps):
        r, _ = outer.residual_map(x)
        if np.max(np.abs(r)) <= tol:
            break
        trial = x + alpha * r
        tval = outer.value(trial)
        if tval <= val:
            x, val = trial, tval
            alpha = min(1.0, 2.0 * alpha)
        else:
            alpha *= 0.5
            if alpha < 1e-6:
                break
    return x


def _nelder_mead(outer: _Outer, x: np.ndarray) -> np.ndarray:
    k = len(x)
    step = max(1e-2, 0.05 * float(np.max(np.abs(x), initial=0.0)))
    simplex = np.vstack([x] + [x + step * e for e in np.eye(k)])
    res = minimize(outer.value, x, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": 1e-15,
                            "maxiter": 400 * k, "maxfev": 800 * k})
    return res.x if res.fun <= outer.value(x) else x


def _newton_polish(outer: _Outer, x: np.ndarray, target: float, max_iter: int = 40):
    """Solve the attractive gap equations ``d_-(c_- + r_+) = c_-`` by damped Newton.

    The Jacobian comes from finite differences; least squares handles the
    flat direction of a continuous phase symmetry.
    """
    r, _ = outer.residual_map(x)
    norm = float(np.max(np.abs(r), initial=0.0))
    for _ in range(max_iter):
        if norm <= target:
            break
        h = 1e-7 * max(1.0, float(np.max(np.abs(x), initial=0.0)))
        jac = np.empty((len(x), len(x)))
        for j in range(len(x)):
            e = np.zeros(len(x))
            e[j] = h
            rp, _ = outer.residual_map(x + e)
            rm, _ = outer.residual_map(x - e)
            jac[:, j] = (rp - rm) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=1e-10)
        improved = False
        t = 1.0
        while t > 1e-4:
            xn = x + t * step
            rn, _ = outer.residual_map(xn)
            nn = float(np.max(np.abs(rn)))
            if nn < norm:
                x, r, norm = xn, rn, nn
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x, norm


def _phase_rotate(c: np.ndarray, idx: np.ndarray, theta: float) -> np.ndarray:
    out = c.copy()
    out[idx] = out[idx] * np.exp(1j * theta)
    return out


def _gauge_fix(outer: _Outer, cand: Candidate, game: ThermodynamicGame) -> Candidate:
    """Rotate a minimizer on a U(1) orbit to a nonnegative real first component."""
    idx = game.minus
    cm = cand.d_minus
    size = float(np.max(np.abs(cm[idx]), initial=0.0))
    if size < 1e-9:
        return cand
    for theta in (0.7, 2.1):
        rotated = _phase_rotate(cm, idx, theta)
        if abs(outer.inner(rotated).value - cand.value) > PHASE_TOL:
            return cand
    lead = next(c for c in cm[idx] if abs(c) > 1e-6 * size)
    fixed = _phase_rotate(cm, idx, -np.angle(lead))
    fixed[idx] = np.where(np.abs(fixed[idx].imag) < 1e-15, fixed[idx].real, fixed[idx])
    res = outer.inner(fixed)
    r, _ = outer.residual_map(_to_real(fixed, idx))
    residual = max(float(np.max(np.abs(r), initial=0.0)), res.residual)
    return Candidate(fixed, res.c_plus, res.value, residual)


def _cluster(cands: list[Candidate], game: ThermodynamicGame, radius: float) -> list[Candidate]:
    cands = sorted(cands, key=lambda c: (round(c.value, 10), tuple(np.round(_to_real(c.d_minus, game.minus), 8))))
    kept: list[Candidate] = []
    for c in cands:
        if all(weighted_norm(c.d_minus - k.d_minus, game.weights) >= radius for k in kept):
            kept.append(c)
    return kept


def _minimize_sharp(game: ThermodynamicGame, starts: int, seed: int, tol: float,
                    cluster_radius: float, pre_steps: int = 60) -> tuple[list[Candidate], int]:
    n = game.n_channels
    idx = game.minus
    outer = _Outer(game, inner_tol=min(1e-3 * tol, 1e-11))
    if len(idx) == 0:
        res = outer.inner(np.zeros(n, dtype=complex))
        _, d = game.evaluate(res.c_plus)
        resid = max(res.residual, float(np.max(np.abs(d - res.c_plus), initial=0.0)))
        return [Candidate(np.zeros(n, dtype=complex), res.c_plus, res.value, resid)], 1
    rng = np.random.default_rng(seed)
    cands = []
    converged = 0
    for x0 in _structured_starts(game, starts, rng):
        outer._warm = None
        try:
            x = _majorize_minimize(outer, x0, pre_steps, 1e-3 * tol)
            x = _nelder_mead(outer, x)
            x, norm = _newton_polish(outer, x, 1e-3 * tol)
        except ConvergenceError:
            continue
        cm = _to_complex(x, idx, n)
        res = outer.inner(cm)
        residual = max(norm, res.residual)
        if residual > tol:
            continue
        converged += 1
        cands.append(Candidate(cm, res.c_plus, res.value, residual))
    if not cands:
        raise SolverError("no multistart branch satisfied the gap equations")
    cands = [_gauge_fix(outer, c, game) for c in cands]
    return _cluster(cands, game, cluster_radius), converged


def _inner_inf(game: ThermodynamicGame, c_plus: np.ndarray,
               seeds: list[np.ndarray]) -> tuple[float, np.ndarray, np.ndarray]:
    """``inf_{c_-} f(c_-, c_+)`` by multistart L-BFGS.

    The gradient in the attractive amplitudes is ``2 w (c_- - d_-)``, exact
    because ``d`` is the derivative of the pressure. Returns the value, the
    minimizer and the full channel densities there.
    """
    idx = game.minus
    n = game.n_channels
    w = game.weights
    wr = np.concatenate([w[idx], w[idx]])
    norm_plus = float(np.sum(w * np.abs(c_plus) ** 2))

    def value_and_grad(x):
        cm = _to_complex(x, idx, n)
        p, d = game.evaluate(cm + c_plus)
        val = float(np.sum(w * np.abs(cm) ** 2)) - norm_plus - p
        return val, 2.0 * wr * (x - _to_real(d, idx))

    best = (np.inf, None)
    for x0 in seeds:
        res = minimize(value_and_grad, x0, jac=True, method="L-BFGS-B",
                       options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 500})
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    val, x = best
    _, d = game.evaluate(_to_complex(x, idx, n) + c_plus)
    return val, x, d


def _maximize_flat(game: ThermodynamicGame, sharp: list[Candidate], starts: int, seed: int) -> float:
    """``Fb = sup_{c_+} inf_{c_-} f`` for models with both channel signs.

    The outer map is concave with supergradient ``2 w (d_+ - c_+)`` taken at
    the inner minimizer, so the maximization also runs L-BFGS. The inner
    infimum restarts from the attractive minimizers of ``F#``, the previous
    inner minimizer and structured points.
    """
    idx_p = game.plus
    idx_m = game.minus
    n = game.n_channels
    wr = np.concatenate([game.weights[idx_p], game.weights[idx_p]])
    rng = np.random.default_rng(seed + 1)
    fixed_seeds = [_to_real(c.d_minus, idx_m) for c in sharp[:4]]
    fixed_seeds += _structured_starts(game, max(3, min(starts, 1 + 4 * len(idx_m))), rng)
    last = [fixed_seeds[0]]

    def neg_flat(y):
        val, x, d = _inner_inf(game, _to_complex(y, idx_p, n), last + fixed_seeds)
        last[0] = x
        return -val, -2.0 * wr * (_to_real(d, idx_p) - y)

    best = -np.inf
    for c in sharp[:2] + [Candidate(np.zeros(n), np.zeros(n, dtype=complex), 0.0, 0.0)]:
        y0 = _to_real(c.r_plus, idx_p)
        best = max(best, -neg_flat(y0)[0])
        res = minimize(neg_flat, y0, jac=True, method="L-BFGS-B",
                       options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 200})
        best = max(best, -float(res.fun))
    return best


def solve_game(model, beta: float | None = None, starts: int = DEFAULT_STARTS, seed: int = 0,
               tol: float = DEFAULT_TOL, engine: str = "auto", side: int | None = None,
               cluster_radius: float = CLUSTER_RADIUS, max_radius_retries: int = 2) -> GameSolution:
    """Solve the game: ``F# = inf_{c_-} sup_{c_+} f`` and ``Fb = sup_{c_+} inf_{c_-} f``.

    Parameters
    ----------
    model : LongRangeModel or ThermodynamicGame
    beta : float, optional
        Overrides the model temperature.
    starts : int
        Multistart count for the outer minimization (structured starts at
        zero and along the channel axes, then random points in the ball).
    seed : int
        Seed of the random starts.
    tol : float
        Gap-equation residual required of every reported minimizer.
    engine : {"auto", "one-site", "quasifree", "ed"}
    side : int, optional
        Box side for the finite-volume engines.

    Notes
    -----
    The outer minimization is a heuristic multistart search, so global
    optimality is not certified.
    """
    game = _as_game(model, beta, engine, side)
    for attempt in range(max_radius_retries + 1):
        minima, converged = _minimize_sharp(game, starts, seed, tol, cluster_radius)
        largest = max(weighted_norm(c.d_minus, game.weights) for c in minima)
        if largest < game.radius * (1 - 1e-9):
            break
        if attempt == max_radius_retries:
            raise SolverError(f"minimizer on the boundary of the search ball (radius {game.radius:.6g})")
        game = ThermodynamicGame(game.weights, game.gammas, game.family, 2 * game.radius,
                                 game.exact, game.engine, game._memo)
    f_sharp = min(c.value for c in minima)
    conservative = [c for c in minima if c.value <= f_sharp + 1e-8]
    best = conservative[0]
    if len(game.plus) == 0 or len(game.minus) == 0:
        # with an empty sector both orders of optimization are the same problem
        f_flat = f_sharp
    else:
        f_flat = _maximize_flat(game, conservative, starts, seed)
    return GameSolution(
        d_minus=ChannelVector(best.d_minus, "minus"),
        r_plus=ChannelVector(best.r_plus, "plus"),
        F_sharp=f_sharp,
        F_flat=f_flat,
        pressure=-f_sharp,
        gap_residual=max(c.residual for c in conservative),
        multistart_minima=[(ChannelVector(c.d_minus, "minus"), c.value) for c in minima],
        duality_gap=max(f_sharp - f_flat, 0.0),
        starts_converged=converged,
        starts=starts if len(game.minus) else 1,
        conservative=[(ChannelVector(c.d_minus, "minus"), ChannelVector(c.r_plus, "plus"), c.value)
                      for c in conservative],
        weights=game.weights,
        gammas=game.gammas,
        engine=game.engine,
        exact=game.exact,
    )


# ---------------------------------------------------------------------------
# diagnostics


def odlro_bound(solution: GameSolution, probe) -> float:
    """``min |<d_- + r_+(d_-), gamma c>|^2`` over the conservative minimizers."""
    c = _values(probe, len(solution.weights))
    if not solution.conservative:
        return 0.0
    vals = []
    for dm, rp, _ in solution.conservative:
        d = dm.values + rp.values
        vals.append(abs(weighted_inner(d, solution.gammas * c, solution.weights)) ** 2)
    return float(min(vals))


@dataclass
class DualityGapReport:
    beta: float
    F_sharp: float
    F_flat: float
    duality_gap: float
    side: int


def duality_gap_demo(local: InteractionKernel, channel: InteractionKernel | None, lattice: Lattice,
                     beta: float, weight: float = 1.0, starts: int = 8, seed: int = 0) -> DualityGapReport:
    """Game with the same channel operator entering once attractively and once repulsively.

    Evaluated at fixed finite volume with exact diagonalization. A positive
    gap means the two orders of optimization do not commute.
    """
    if channel is None:
        model = LongRangeModel(lattice, local, (), beta)
    else:
        chans = (Channel.from_operator(channel, +1, weight), Channel.from_operator(channel, -1, weight))
        model = LongRangeModel(lattice, local, chans, beta)
    sol = solve_game(model, starts=starts, seed=seed, engine="ed")
    return DualityGapReport(beta, sol.F_sharp, sol.F_flat, sol.F_sharp - sol.F_flat, lattice.side)


@dataclass
class ConvergenceReport:
    sides: list
    pressures: list  # p_l from ED with periodic boundaries
    F_sharp: float
    deviations: list  # |p_l + F#|
    ed_channel: list  # |Lambda|^-1 <U^{B_k}> per side
    ed_channel_modulus: list  # sqrt of the double space average of B_k
    game_channel: np.ndarray  # d from the game solution
    exponent: float
    monotone: bool
    solution: GameSolution | None = None


def convergence_study(model: LongRangeModel, sides: Sequence[int], beta: float | None = None,
                      starts: int = DEFAULT_STARTS, seed: int = 0, tol: float = DEFAULT_TOL,
                      engine: str = "auto") -> ConvergenceReport:
    """Finite-volume pressures and channel densities against the game solution."""
    if beta is not None:
        model = model.with_beta(beta)
    sol = solve_game(model, starts=starts, seed=seed, tol=tol, engine=engine)
    pressures, devs, chan, modulus = [], [], [], []
    for l in sides:
        lat = model.lattice.with_side(l)
        energy = build_internal_energy(model, lat, pbc=True)
        state = gibbs_state(energy, model.beta)
        p = state.log_partition / (model.beta * lat.volume)
        pressures.append(p)
        devs.append(abs(p + sol.F_sharp))
        ops = [kernel_operator(ch.operator, lat) for ch in model.channels]
        chan.append(np.array([state.expectation(b) / lat.volume for b in ops]))
        modulus.append(np.array([np.sqrt(max(lro_estimator(state, ch.operator, lat), 0.0))
                                 for ch in model.channels]))
    pos = [(l, d) for l, d in zip(sides, devs) if d > 0 and l > 0]
    exponent = float(np.polyfit(np.log([l for l, _ in pos]), np.log([d for _, d in pos]), 1)[0]) \
        if len(pos) >= 2 else float("nan")
    monotone = all(b <= a + 1e-14 for a, b in zip(devs, devs[1:]))
    return ConvergenceReport(list(sides), pressures, sol.F_sharp, devs, chan, modulus,
                             sol.d, exponent, monotone, sol)
