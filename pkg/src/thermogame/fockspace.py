"""Exact diagonalization on the fermionic Fock space of a finite box.

Basis states are occupation bitstrings: bit ``j`` of the integer label is
the occupation of mode ``j``. Modes are numbered site-major, spin-minor, and
the Jordan-Wigner sign of ``a_j`` is the parity of the occupied modes below
``j``. Spectral quantities are evaluated block by block on the connected
components of the sparsity pattern, which keeps number-conserving problems
with ``2^14`` states cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from .model import (
    ANNIHILATE,
    CREATE,
    DEFAULT_CLUSTER_DIM_CAP,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    ModelError,
)

ENTROPY_CUTOFF = 1e-15
HERMITIAN_TOL = 1e-12
# batched eigh is used for components up to this size
_BATCH_BLOCK = 64


CSV_SCHEMA_VERSION = 1  # first line of every CSV file the package writes


class FockSpaceError(ValueError):
    """Invalid Fock-space input (dimension cap, non-hermitian energy, bad state)."""


# ---------------------------------------------------------------------------
# basis and operators


@dataclass(frozen=True)
class FockBasis:
    """Ordered list of modes; the Fock space has dimension ``2**len(modes)``."""

    modes: tuple = ()

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def dim(self) -> int:
        return 1 << len(self.modes)

    @classmethod
    def from_lattice(cls, lattice: Lattice) -> "FockBasis":
        return cls(tuple((x, s) for x in lattice.sites() for s in lattice.spins))


def _popcount(values: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(values).astype(np.int64)
    out = np.zeros_like(values)
    v = values.copy()
    while np.any(v):
        out += v & 1
        v >>= 1
    return out


def _apply_monomial(n_modes: int, ops: Sequence[tuple[str, int]]):
    """Action of a product of ladder operators on every basis state.

    Returns the (target, source, sign) triples of the nonzero entries.
    """
    dim = 1 << n_modes
    source = np.arange(dim, dtype=np.int64)
    state = source.copy()
    sign = np.ones(dim)
    alive = np.ones(dim, dtype=bool)
    for nu, j in reversed(list(ops)):
        if not 0 <= j < n_modes:
            raise FockSpaceError(f"mode {j} outside a basis of {n_modes} modes")
        bit = np.int64(1) << j
        occupied = (state & bit) != 0
        alive &= occupied if nu == ANNIHILATE else ~occupied
        sign *= 1 - 2 * (_popcount(state & (bit - 1)) & 1)
        state ^= bit
    return state[alive], source[alive], sign[alive]


def monomial_matrix(basis: FockBasis, ops: Sequence[tuple[str, int]], coef: complex = 1.0) -> sp.csr_matrix:
    """Sparse matrix of ``coef * a^{nu_1}_{j_1} ... a^{nu_n}_{j_n}``."""
    rows, cols, sign = _apply_monomial(basis.n_modes, ops)
    return sp.csr_matrix(
        (coef * sign.astype(complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )


@dataclass(frozen=True)
class FockOperator:
    """Sparse operator on a Fock basis.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
    basis : FockBasis
    hermitian : bool
        Set when the matrix equals its adjoint to ``1e-12``.
    dropped_terms : int
        Number of kernel translates discarded at an open boundary.
    """

    matrix: sp.csr_matrix
    basis: FockBasis
    hermitian: bool = False
    dropped_terms: int = 0

    @classmethod
    def wrap(cls, matrix, basis: FockBasis, dropped_terms: int = 0) -> "FockOperator":
        matrix = sp.csr_matrix(matrix, dtype=complex)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return cls(matrix, basis, _is_hermitian(matrix), dropped_terms)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def _coerce(self, other):
        if isinstance(other, FockOperator):
            if other.basis != self.basis:
                raise FockSpaceError("operators live on different Fock bases")
            return other.matrix
        return other

    def __add__(self, other):
        return FockOperator.wrap(self.matrix + self._coerce(other), self.basis,
                                 self.dropped_terms + getattr(other, "dropped_terms", 0))

    def __sub__(self, other):
        return FockOperator.wrap(self.matrix - self._coerce(other), self.basis,
                                 self.dropped_terms + getattr(other, "dropped_terms", 0))

    def __mul__(self, scalar):
        return FockOperator.wrap(self.matrix * complex(scalar), self.basis, self.dropped_terms)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return FockOperator.wrap(self.matrix @ self._coerce(other), self.basis)

    def adjoint(self) -> "FockOperator":
        return FockOperator.wrap(self.matrix.conj().T, self.basis, self.dropped_terms)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _is_hermitian(matrix: sp.spmatrix, tol: float = HERMITIAN_TOL) -> bool:
    diff = matrix - matrix.conj().T
    return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol


def identity(basis: FockBasis) -> FockOperator:
    return FockOperator.wrap(sp.identity(basis.dim, dtype=complex, format="csr"), basis)


def annihilation(basis: FockBasis, mode: int) -> FockOperator:
    return FockOperator.wrap(monomial_matrix(basis, [(ANNIHILATE, mode)]), basis)


def creation(basis: FockBasis, mode: int) -> FockOperator:
    return FockOperator.wrap(monomial_matrix(basis, [(CREATE, mode)]), basis)


def parity_operator(basis: FockBasis) -> FockOperator:
    states = np.arange(basis.dim, dtype=np.int64)
    diag = 1.0 - 2.0 * (_popcount(states) & 1)
    return FockOperator.wrap(sp.diags(diag.astype(complex)), basis)


# ---------------------------------------------------------------------------
# internal energies


def _check_dim(lattice: Lattice, max_dim: int):
    if lattice.n_modes > 62 or (1 << lattice.n_modes) > max_dim:
        raise FockSpaceError(
            f"Fock dimension 2^{lattice.n_modes} of a box with side {lattice.side} "
            f"exceeds the cap {max_dim}"
        )


def kernel_operator(
    kernel: InteractionKernel,
    lattice: Lattice,
    pbc: bool = True,
    max_dim: int = DEFAULT_CLUSTER_DIM_CAP,
) -> FockOperator:
    """Box operator ``U^Phi`` of a kernel, summed over every translate.

    With ``pbc`` every factor position is wrapped onto the torus; otherwise
    translates leaving the box are dropped and counted in ``dropped_terms``.
    """
    _check_dim(lattice, max_dim)
    basis = FockBasis.from_lattice(lattice)
    unknown = kernel.spins() - set(lattice.spins)
    if unknown:
        raise ModelError(f"kernel uses spin labels {sorted(unknown)} absent from the lattice")
    rows, cols, vals = [], [], []
    dropped = 0
    for x in lattice.sites():
        for sig, coef in kernel.items():
            if not sig:
                rows.append(np.arange(basis.dim))
                cols.append(np.arange(basis.dim))
                vals.append(np.full(basis.dim, coef, dtype=complex))
                continue
            positions = [tuple(xi + oi for xi, oi in zip(x, off)) for _, _, off in sig]
            if pbc:
                positions = [lattice.wrap(p) for p in positions]
            elif not all(lattice.contains(p) for p in positions):
                dropped += 1
                continue
            ops = [(nu, lattice.mode_index(p, s)) for (nu, s, _), p in zip(sig, positions)]
            r, c, sgn = _apply_monomial(basis.n_modes, ops)
            rows.append(r)
            cols.append(c)
            vals.append(coef * sgn)
    if rows:
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(basis.dim, basis.dim),
        )
    else:
        mat = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    return FockOperator.wrap(mat, basis, dropped)


def build_internal_energy(
    model: LongRangeModel,
    lattice: Lattice | None = None,
    pbc: bool = True,
    max_dim: int = DEFAULT_CLUSTER_DIM_CAP,
) -> FockOperator:
    """``U_l = U^Phi + |Lambda|^-1 sum_k w_k gamma_k B_k^* B_k`` on a box.

    ``B_k`` is the box operator of ``Phi_k + i Phi_k'``.
    """
    lattice = lattice or model.lattice
    energy = kernel_operator(model.local, lattice, pbc, max_dim)
    for ch in model.channels:
        b = kernel_operator(ch.operator, lattice, pbc, max_dim)
        energy = energy + (ch.weight * ch.gamma / lattice.volume) * (b.adjoint() @ b)
        energy = FockOperator(energy.matrix, energy.basis, energy.hermitian,
                              energy.dropped_terms + b.dropped_terms)
    if not energy.hermitian:
        raise FockSpaceError("internal energy is not hermitian; check kernel self-adjointness")
    return energy


# ---------------------------------------------------------------------------
# block spectral decomposition


@dataclass
class _Blocks:
    """Eigen-decomposition grouped by connected component size."""

    dim: int
    labels: np.ndarray  # component label per basis state
    position: np.ndarray  # rank of a basis state inside its component
    groups: list  # list of (indices (n, s), energies (n, s), vectors (n, s, s))
    slot: np.ndarray  # (group id, slot in group) per component label


def _pattern_components(matrices: Sequence[sp.spmatrix], dim: int):
    pattern = sp.csr_matrix((dim, dim), dtype=bool)
    for m in matrices:
        pattern = pattern + (sp.csr_matrix(m) != 0)
    n_comp, labels = connected_components(pattern, directed=False)
    return n_comp, labels


def block_structure(matrices: Sequence[sp.spmatrix], dim: int):
    """Components of the joint sparsity pattern, grouped by size.

    Returns ``(labels, position, members)`` where ``members`` maps a size to
    an ``(n, size)`` array of basis indices.
    """
    n_comp, labels = _pattern_components(matrices, dim)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=n_comp)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    position = np.empty(dim, dtype=np.int64)
    position[order] = np.arange(dim) - np.repeat(starts, counts)
    members: dict[int, list] = {}
    for comp in range(n_comp):
        members.setdefault(int(counts[comp]), []).append(order[starts[comp]:starts[comp] + counts[comp]])
    return labels, position, {s: np.array(v) for s, v in sorted(members.items())}


def _gather_blocks(matrix: sp.spmatrix, labels, position, idx: np.ndarray) -> np.ndarray:
    """Dense ``(n, s, s)`` stack of the diagonal blocks listed in ``idx``."""
    n, s = idx.shape
    slot_of_label = np.full(labels.max() + 1, -1, dtype=np.int64)
    slot_of_label[labels[idx[:, 0]]] = np.arange(n)
    coo = sp.coo_matrix(matrix)
    slot = slot_of_label[labels[coo.row]]
    keep = (slot >= 0) & (labels[coo.row] == labels[coo.col])
    out = np.zeros((n, s, s), dtype=complex)
    np.add.at(out, (slot[keep], position[coo.row[keep]], position[coo.col[keep]]), coo.data[keep])
    return out


def _diagonalize(matrix: sp.spmatrix, structure=None) -> _Blocks:
    dim = matrix.shape[0]
    labels, position, members = structure or block_structure([matrix], dim)
    groups = []
    slot = np.zeros((labels.max() + 1, 2), dtype=np.int64)
    for s, idx in members.items():
        if s <= _BATCH_BLOCK:
            chunks = [idx]
        else:
            chunks = [idx[i:i + 1] for i in range(len(idx))]
        for chunk in chunks:
            blocks = _gather_blocks(matrix, labels, position, chunk)
            energies, vectors = np.linalg.eigh(blocks)
            slot[labels[chunk[:, 0]], 0] = len(groups)
            slot[labels[chunk[:, 0]], 1] = np.arange(len(chunk))
            groups.append((chunk, energies, vectors))
    return _Blocks(dim, labels, position, groups, slot)


def _as_hermitian_sparse(energy) -> sp.csr_matrix:
    if isinstance(energy, FockOperator):
        if not energy.hermitian:
            raise FockSpaceError("energy operator is not hermitian")
        return energy.matrix
    mat = sp.csr_matrix(energy, dtype=complex)
    if not _is_hermitian(mat):
        raise FockSpaceError("energy operator is not hermitian")
    return mat


def eigenvalues(energy) -> np.ndarray:
    """All eigenvalues of a hermitian operator, ascending."""
    blocks = _diagonalize(_as_hermitian_sparse(energy))
    return np.sort(np.concatenate([e.reshape(-1) for _, e, _ in blocks.groups]))


def write_spectrum_csv(energy, path) -> None:
    """Dump the spectrum as a one-column CSV (``eigenvalue``, ascending) after the schema line."""
    vals = eigenvalues(energy)
    with open(path, "w", newline="") as fh:
        fh.write(f"# thermogame-csv schema={CSV_SCHEMA_VERSION} table=spectrum\n")
        fh.write("eigenvalue\n")
        for v in vals:
            fh.write(f"{v:.12g}\n")


def pressure_ed(energy, beta: float, volume: int) -> float:
    """Finite-volume pressure ``(beta V)^-1 ln Tr exp(-beta U)``."""
    if beta <= 0:
        raise FockSpaceError("beta must be positive")
    vals = eigenvalues(energy)
    return float(logsumexp(-beta * vals) / (beta * volume))


# ---------------------------------------------------------------------------
# Gibbs states


@dataclass
class GibbsState:
    """Gibbs state ``exp(-beta U) / Tr exp(-beta U)`` in block form."""

    beta: float
    energy: FockOperator | None
    blocks: _Blocks
    probabilities: list = field(default_factory=list)  # per group, shape (n, s)
    log_partition: float = 0.0

    @property
    def dim(self) -> int:
        return self.blocks.dim

    def weights(self) -> np.ndarray:
        return np.concatenate([p.reshape(-1) for p in self.probabilities])

    def expectation(self, operator) -> complex:
        """``Tr(rho A)`` for a sparse operator ``A``."""
        mat = operator.matrix if isinstance(operator, FockOperator) else sp.csr_matrix(operator)
        coo = sp.coo_matrix(mat)
        b = self.blocks
        same = b.labels[coo.row] == b.labels[coo.col]
        rows, cols, data = coo.row[same], coo.col[same], coo.data[same]
        comp = b.labels[rows]
        gid = b.slot[comp, 0]
        sid = b.slot[comp, 1]
        total = 0.0 + 0.0j
        for g, (_, _, vectors) in enumerate(self.blocks.groups):
            m = gid == g
            if not np.any(m):
                continue
            p = self.probabilities[g]
            s_idx = sid[m]
            v_col = vectors[s_idx, b.position[cols[m]], :]
            v_row = vectors[s_idx, b.position[rows[m]], :]
            # rho[col, row] = sum_j V[col, j] p_j conj(V[row, j])
            rho_cr = np.einsum("ij,ij,ij->i", v_col, p[s_idx], np.conj(v_row))
            total += np.sum(rho_cr * data[m])
        return complex(total)

    def density_matrix(self, max_dim: int = 4096) -> np.ndarray:
        if self.dim > max_dim:
            raise FockSpaceError(f"dense density matrix of dimension {self.dim} exceeds {max_dim}")
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        for (idx, _, vectors), p in zip(self.blocks.groups, self.probabilities):
            local = np.einsum("nij,nj,nkj->nik", vectors, p, np.conj(vectors))
            for n in range(len(idx)):
                rho[np.ix_(idx[n], idx[n])] += local[n]
        return rho

    def reduced_density_matrix(self, n_modes: int) -> np.ndarray:
        """Reduced state on the first ``n_modes`` modes.

        The retained modes come first in the Jordan-Wigner order, so the
        fermionic partial trace coincides with the ordinary one.
        """
        dim_a = 1 << n_modes
        out = np.zeros((dim_a, dim_a), dtype=complex)
        mask = dim_a - 1
        for (idx, _, vectors), p in zip(self.blocks.groups, self.probabilities):
            local = np.einsum("nij,nj,nkj->nik", vectors, p, np.conj(vectors))
            a = idx & mask
            env = idx >> n_modes
            same = env[:, :, None] == env[:, None, :]
            n_idx, i_idx, k_idx = np.nonzero(same)
            np.add.at(out, (a[n_idx, i_idx], a[n_idx, k_idx]), local[n_idx, i_idx, k_idx])
        return out


def gibbs_state(energy, beta: float, structure=None) -> GibbsState:
    """Gibbs state of a hermitian operator at inverse temperature ``beta``."""
    if beta <= 0:
        raise FockSpaceError("beta must be positive")
    mat = _as_hermitian_sparse(energy)
    blocks = _diagonalize(mat, structure)
    all_e = np.concatenate([e.reshape(-1) for _, e, _ in blocks.groups])
    log_z = float(logsumexp(-beta * all_e))
    probs = [np.exp(-beta * e - log_z) for _, e, _ in blocks.groups]
    op = energy if isinstance(energy, FockOperator) else None
    return GibbsState(beta, op, blocks, probs, log_z)


def von_neumann_entropy(state) -> float:
    """``-Tr rho ln rho`` with eigenvalues below ``1e-15`` ignored."""
    if isinstance(state, GibbsState):
        p = state.weights()
    else:
        rho = np.asarray(state)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise FockSpaceError("a density matrix must be square")
        if not np.allclose(rho, rho.conj().T, atol=1e-10):
            raise FockSpaceError("a density matrix must be hermitian")
        p = np.linalg.eigvalsh(rho)
        if p.min() < -1e-10 or abs(p.sum() - 1) > 1e-10:
            raise FockSpaceError("not a state: negative eigenvalue or trace different from 1")
    p = p[p > ENTROPY_CUTOFF]
    return float(-np.sum(p * np.log(p)))


def entropy_density(state, volume: int) -> float:
    return von_neumann_entropy(state) / volume


# ---------------------------------------------------------------------------
# passivity


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state ``X X^* / Tr X X^*`` from a complex Ginibre matrix."""
    rank = rank or dim
    x = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


@dataclass
class PassivityReport:
    pressure: float
    gibbs_margin: float
    margins: np.ndarray
    passed: bool

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins)) if len(self.margins) else float("nan")


def free_energy_density(energy, rho: np.ndarray, beta: float, volume: int) -> float:
    """``V^-1 Tr(rho U) - (beta V)^-1 S(rho)``."""
    u = energy.toarray() if isinstance(energy, FockOperator) else np.asarray(energy)
    e = float(np.real(np.trace(rho @ u)))
    return e / volume - von_neumann_entropy(rho) / (beta * volume)


def passivity_check(energy, beta: float, trial_states: Sequence[np.ndarray], volume: int,
                    tol: float = 1e-10) -> PassivityReport:
    """Check ``f(rho) >= -p`` on trial states, with equality at the Gibbs state."""
    p = pressure_ed(energy, beta, volume)
    gibbs = gibbs_state(energy, beta)
    f_gibbs = (gibbs.expectation(energy).real - von_neumann_entropy(gibbs) / beta) / volume
    gibbs_margin = f_gibbs + p
    margins = np.array([free_energy_density(energy, rho, beta, volume) + p for rho in trial_states])
    passed = bool(abs(gibbs_margin) <= tol and np.all(margins >= -tol))
    return PassivityReport(p, float(gibbs_margin), margins, passed)


# ---------------------------------------------------------------------------
# long-range order


def lro_estimator(state: GibbsState, observable, lattice: Lattice) -> float:
    """Double space average ``|Lambda|^-2 sum_{x,y} <alpha_x(B)^* alpha_y(B)>``.

    ``observable`` is either a kernel, whose torus translates are summed, or
    a callable mapping a site to a ``FockOperator``.
    """
    basis = FockBasis.from_lattice(lattice)
    if basis.dim != state.dim:
        raise FockSpaceError("observable family does not match the state's Fock basis")
    if isinstance(observable, InteractionKernel):
        total = kernel_operator(observable, lattice, pbc=True)
    else:
        total = None
        for x in lattice.sites():
            op = observable(x)
            if op.basis != basis:
                raise FockSpaceError("observable family does not match the state's Fock basis")
            total = op if total is None else total + op
    value = state.expectation(total.adjoint() @ total)
    return float(value.real) / lattice.volume**2


# ---------------------------------------------------------------------------
# periodic versus open boundary


@dataclass
class PbcReport:
    sides: list
    pressure_open: list
    pressure_periodic: list
    differences: list
    asserted: list  # sides at or beyond the interaction range
    exponent: float  # decay exponent against the linear extent 2l + 1
    monotone: bool
    exponent_side: float = float("nan")  # the same fit against l


def _decay_exponent(xs, ds) -> float:
    return float(np.polyfit(np.log(xs), np.log(ds), 1)[0])


def pbc_consistency(model: LongRangeModel, sides: Sequence[int], boundary_width: int = 1,
                    max_dim: int = DEFAULT_CLUSTER_DIM_CAP) -> PbcReport:
    """Compare open and periodic finite-volume pressures over box sizes.

    Sides with ``l < boundary_width * range`` are tabulated but excluded
    from the monotonicity assertion and the power-law fit.
    """
    reach = max((k.diameter for k in model.kernels()), default=0)
    rows_open, rows_pbc, diffs, asserted = [], [], [], []
    for l in sides:
        lat = model.lattice.with_side(l)
        p_open = pressure_ed(build_internal_energy(model, lat, pbc=False, max_dim=max_dim), model.beta, lat.volume)
        p_pbc = pressure_ed(build_internal_energy(model, lat, pbc=True, max_dim=max_dim), model.beta, lat.volume)
        rows_open.append(p_open)
        rows_pbc.append(p_pbc)
        diffs.append(abs(p_pbc - p_open))
        asserted.append(l >= boundary_width * reach)
    sel = [(l, d) for l, d, a in zip(sides, diffs, asserted) if a]
    positive = [(l, d) for l, d in sel if d > 0 and l > 0]
    if len(positive) >= 2:
        ds = [d for _, d in positive]
        exponent = _decay_exponent([2 * l + 1 for l, _ in positive], ds)
        exponent_side = _decay_exponent([l for l, _ in positive], ds)
    else:
        exponent = float("-inf") if sel and all(d == 0 for _, d in sel) else float("nan")
        exponent_side = exponent
    monotone = all(b[1] <= a[1] + 1e-14 for a, b in zip(sel, sel[1:]))
    return PbcReport(list(sides), rows_open, rows_pbc, diffs, asserted, exponent, monotone, exponent_side)
