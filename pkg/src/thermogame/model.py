"""Lattices, translation-invariant interaction kernels and long-range models.

A kernel stores one normal-ordered monomial per translation class. A
signature is a tuple of factors ``(nu, spin, offset)`` with ``nu`` equal to
``'+'`` (creation) or ``'-'`` (annihilation), a spin label and an integer
offset tuple. The term ``{sig: coef}`` stands for the translation sum

    sum_x coef * :a^{nu_1}_{s_1, x + o_1} ... a^{nu_n}_{s_n, x + o_n}:

Canonical signatures list creators first in ascending ``(offset, spin)``
order and annihilators in descending order, translated so that the first
factor sits at the origin. Reordering picks up the fermionic permutation
sign, and a repeated factor makes the monomial vanish.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

CREATE = "+"
ANNIHILATE = "-"

DEFAULT_CLUSTER_DIM_CAP = 2**14


class ModelError(ValueError):
    """Invalid model data (violated invariant or malformed input)."""


class ClusterTooLargeError(ModelError):
    """Fock space of a support cluster exceeds the configured cap."""


# ---------------------------------------------------------------------------
# lattice


@dataclass(frozen=True)
class Lattice:
    """Cubic box ``{x : |x_i| <= side}`` in ``Z^d`` with spin labels.

    Parameters
    ----------
    dim : int
        Spatial dimension ``d``.
    spins : tuple of str
        Ordered spin labels.
    side : int
        Box half-width ``l``; the box holds ``(2l+1)^d`` sites.
    """

    dim: int = 1
    spins: tuple[str, ...] = ("s",)
    side: int = 1

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ModelError(f"lattice dimension must be positive, got {self.dim}")
        if int(self.side) < 0:
            raise ModelError(f"box side must be nonnegative, got {self.side}")
        spins = tuple(str(s) for s in self.spins)
        if not spins or len(set(spins)) != len(spins):
            raise ModelError(f"spin labels must be nonempty and distinct, got {spins}")
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "side", int(self.side))

    @property
    def period(self) -> int:
        return 2 * self.side + 1

    @property
    def volume(self) -> int:
        return self.period**self.dim

    @property
    def n_modes(self) -> int:
        return self.volume * len(self.spins)

    def with_side(self, side: int) -> "Lattice":
        return Lattice(self.dim, self.spins, side)

    def sites(self) -> list[tuple[int, ...]]:
        """Site coordinates in lexicographic order."""
        axis = range(-self.side, self.side + 1)
        return [tuple(x) for x in itertools.product(axis, repeat=self.dim)]

    def site_index(self, x: Sequence[int]) -> int:
        idx = 0
        for xi in x:
            if abs(xi) > self.side:
                raise ModelError(f"site {tuple(x)} lies outside the box of side {self.side}")
            idx = idx * self.period + (xi + self.side)
        return idx

    def contains(self, x: Sequence[int]) -> bool:
        return all(abs(xi) <= self.side for xi in x)

    def wrap(self, x: Sequence[int]) -> tuple[int, ...]:
        """Torus map: coordinates modulo ``2l+1``, recentred into the box."""
        n = self.period
        return tuple(((xi + self.side) % n) - self.side for xi in x)

    def mode_index(self, x: Sequence[int], spin: str) -> int:
        """Site-major, spin-minor mode numbering."""
        return self.site_index(x) * len(self.spins) + self.spins.index(spin)


# ---------------------------------------------------------------------------
# signatures


def _factor(f) -> tuple[str, str, tuple[int, ...]]:
    nu, spin, off = f
    if nu not in (CREATE, ANNIHILATE):
        raise ModelError(f"dagger flag must be '+' or '-', got {nu!r}")
    return (nu, str(spin), tuple(int(o) for o in off))


def _permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def canonical_signature(factors: Iterable) -> tuple[int, tuple] | None:
    """Canonical form of a normal-ordered monomial.

    Returns
    -------
    (sign, signature) or None
        ``None`` when the monomial vanishes because a factor repeats.
    """
    factors = [_factor(f) for f in factors]
    if not factors:
        return 1, ()
    if len(set(factors)) != len(factors):
        return None
    creators = [i for i, f in enumerate(factors) if f[0] == CREATE]
    annihilators = [i for i, f in enumerate(factors) if f[0] == ANNIHILATE]
    creators.sort(key=lambda i: (factors[i][2], factors[i][1]))
    annihilators.sort(key=lambda i: (factors[i][2], factors[i][1]), reverse=True)
    order = creators + annihilators
    sign = _permutation_sign(order)
    shift = factors[order[0]][2]
    sig = tuple(
        (factors[i][0], factors[i][1], tuple(o - s for o, s in zip(factors[i][2], shift)))
        for i in order
    )
    return sign, sig


def adjoint_signature(sig: tuple) -> tuple:
    flip = {CREATE: ANNIHILATE, ANNIHILATE: CREATE}
    return tuple((flip[nu], s, off) for nu, s, off in reversed(sig))


def format_signature(sig: tuple) -> str:
    if not sig:
        return "(const)"
    return " ".join(f"({nu} {s} {' '.join(map(str, off))})" for nu, s, off in sig)


# ---------------------------------------------------------------------------
# kernels


class InteractionKernel:
    """Translation-invariant fermionic interaction in canonical form.

    Parameters
    ----------
    terms : mapping or iterable of (factors, coefficient)
        Monomials in any order; they are canonicalized and merged.
    dim : int
        Spatial dimension of the offsets.

    Notes
    -----
    Instances are immutable. The empty signature is a constant per site.
    """

    __slots__ = ("_terms", "dim")

    def __init__(self, terms=(), dim: int = 1):
        object.__setattr__(self, "dim", int(dim))
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple, complex] = {}
        for factors, coef in items:
            factors = tuple(factors)
            if len(factors) % 2:
                raise ModelError(
                    f"odd monomial {format_signature(tuple(_factor(f) for f in factors))} "
                    "is not allowed in an even interaction"
                )
            for f in factors:
                if len(f[2]) != self.dim:
                    raise ModelError(f"offset {f[2]} does not match dimension {self.dim}")
            canon = canonical_signature(factors)
            if canon is None:
                continue
            sign, sig = canon
            acc[sig] = acc.get(sig, 0.0) + sign * complex(coef)
        object.__setattr__(
            self, "_terms", {k: v for k, v in sorted(acc.items()) if v != 0}
        )

    def __setattr__(self, name, value):
        raise AttributeError("InteractionKernel is immutable")

    @property
    def terms(self) -> dict[tuple, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __repr__(self) -> str:
        body = ", ".join(f"{format_signature(s)}: {c:.6g}" for s, c in self._terms.items())
        return f"InteractionKernel({{{body}}}, dim={self.dim})"

    # arithmetic ---------------------------------------------------------

    def _check_dim(self, other: "InteractionKernel"):
        if self.dim != other.dim and self._terms and other._terms:
            raise ModelError("kernels of different dimension")

    def __add__(self, other: "InteractionKernel") -> "InteractionKernel":
        self._check_dim(other)
        dim = self.dim if self._terms else other.dim
        return InteractionKernel(list(self._terms.items()) + list(other._terms.items()), dim)

    def __neg__(self) -> "InteractionKernel":
        return self * -1.0

    def __sub__(self, other: "InteractionKernel") -> "InteractionKernel":
        return self + (-other)

    def __mul__(self, scalar) -> "InteractionKernel":
        scalar = complex(scalar)
        return InteractionKernel({s: scalar * c for s, c in self._terms.items()}, self.dim)

    __rmul__ = __mul__

    def adjoint(self) -> "InteractionKernel":
        return InteractionKernel(
            [(adjoint_signature(s), np.conj(c)) for s, c in self._terms.items()], self.dim
        )

    def allclose(self, other: "InteractionKernel", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionKernel):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    # structure ----------------------------------------------------------

    def self_adjoint_violation(self, tol: float = 1e-12) -> tuple | None:
        """First signature of the kernel whose adjoint partner has the wrong coefficient."""
        diff = (self - self.adjoint())._terms
        for sig in self._terms:
            if abs(diff.get(sig, 0.0)) > tol:
                return sig
        for sig, c in diff.items():
            if abs(c) > tol:
                return sig
        return None

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return self.self_adjoint_violation(tol) is None

    @property
    def max_body(self) -> int:
        return max((len(s) for s in self._terms), default=0)

    @property
    def range(self) -> float:
        """Largest Euclidean distance of an offset from the origin."""
        r = 0.0
        for sig in self._terms:
            for _, _, off in sig:
                r = max(r, float(np.sqrt(sum(o * o for o in off))))
        return r

    @property
    def diameter(self) -> int:
        """Largest coordinate spread (sup norm) within a single term."""
        d = 0
        for sig in self._terms:
            if sig:
                offs = np.array([off for _, _, off in sig])
                d = max(d, int((offs.max(axis=0) - offs.min(axis=0)).max()))
        return d

    def spins(self) -> set[str]:
        return {s for sig in self._terms for _, s, _ in sig}

    def constant(self) -> complex:
        return self._terms.get((), 0.0)

    def is_quadratic(self) -> bool:
        return all(len(s) in (0, 2) for s in self._terms)

    def is_single_site(self) -> bool:
        return all(all(not any(off) for _, _, off in s) for s in self._terms)

    def is_gauge_invariant(self) -> bool:
        for sig in self._terms:
            if sum(1 if nu == CREATE else -1 for nu, _, _ in sig):
                return False
        return True

    def to_json(self):
        return [
            [[nu, s, list(off)] for nu, s, off in sig] + [[c.real, c.imag]]
            for sig, c in self._terms.items()
        ]


def zero_kernel(dim: int = 1) -> InteractionKernel:
    return InteractionKernel({}, dim)


def number_kernel(spins: Sequence[str], dim: int = 1, coef: complex = 1.0) -> InteractionKernel:
    origin = (0,) * dim
    return InteractionKernel(
        [(((CREATE, s, origin), (ANNIHILATE, s, origin)), coef) for s in spins], dim
    )


def hopping_kernel(
    amplitudes: Mapping[tuple[int, ...], complex], spins: Sequence[str], dim: int = 1
) -> InteractionKernel:
    """Spin-diagonal quadratic kernel ``sum_{x,y,s} h(x-y) a+_{x,s} a_{y,s}``.

    ``amplitudes`` maps a displacement ``x - y`` to ``h(x - y)``; hermiticity
    requires ``h(-r) = conj h(r)``.
    """
    origin = (0,) * dim
    terms = []
    for r, h in amplitudes.items():
        r = tuple(int(v) for v in r)
        target = tuple(-v for v in r)
        for s in spins:
            terms.append((((CREATE, s, origin), (ANNIHILATE, s, target)), h))
    return InteractionKernel(terms, dim)


def real_part(op: InteractionKernel) -> InteractionKernel:
    """``(B + B*) / 2``."""
    return 0.5 * (op + op.adjoint())


def imag_part(op: InteractionKernel) -> InteractionKernel:
    """``(B - B*) / (2i)``."""
    return (-0.5j) * (op - op.adjoint())


# ---------------------------------------------------------------------------
# W1 norm


def _cluster_terms(kernel: InteractionKernel) -> dict[tuple, list]:
    """Group terms by the lexicographically normalized support set."""
    groups: dict[tuple, list] = {}
    for sig, c in kernel.items():
        if not sig:
            support = ((0,) * kernel.dim,)
            groups.setdefault(support, []).append(((), c))
            continue
        offs = sorted({off for _, _, off in sig})
        base = offs[0]
        support = tuple(tuple(o - b for o, b in zip(off, base)) for off in offs)
        shifted = tuple(
            (nu, s, tuple(o - b for o, b in zip(off, base))) for nu, s, off in sig
        )
        groups.setdefault(support, []).append((shifted, c))
    return groups


def interaction_norm(
    kernel: InteractionKernel,
    lattice: Lattice | None = None,
    max_dim: int = DEFAULT_CLUSTER_DIM_CAP,
) -> float:
    """Translation-invariant norm ``sum_{Lambda ∋ 0} ||Phi_Lambda|| / |Lambda|``.

    Each translation class of support clusters contributes the exact
    operator norm of its local term, obtained by diagonalizing the term on
    the Fock space of the cluster.

    Parameters
    ----------
    kernel : InteractionKernel
    lattice : Lattice, optional
        Supplies the spin labels of the cluster modes. Defaults to the spins
        appearing in the kernel.
    max_dim : int
        Cap on the cluster Fock dimension.
    """
    from .fockspace import FockBasis, monomial_matrix

    spins = tuple(lattice.spins) if lattice is not None else tuple(sorted(kernel.spins()))
    total = 0.0
    for support, terms in _cluster_terms(kernel).items():
        modes = [(site, s) for site in support for s in spins] if spins else []
        if 2 ** len(modes) > max_dim:
            raise ClusterTooLargeError(
                f"cluster too large: support {list(support)} needs Fock dimension "
                f"2^{len(modes)} > {max_dim}"
            )
        basis = FockBasis(tuple(modes))
        index = {m: i for i, m in enumerate(modes)}
        mat = np.zeros((basis.dim, basis.dim), dtype=complex)
        for sig, c in terms:
            ops = [(nu, index[(off, s)]) for nu, s, off in sig]
            mat += monomial_matrix(basis, ops, c).toarray()
        total += np.linalg.norm(mat, ord=2) if mat.size else 0.0
    return float(total)


# ---------------------------------------------------------------------------
# long-range models


@dataclass(frozen=True)
class Channel:
    """One long-range channel ``(Phi_k, Phi_k', gamma_k, w_k)``."""

    kernel: InteractionKernel
    kernel_prime: InteractionKernel
    gamma: int
    weight: float = 1.0

    def __post_init__(self):
        if self.gamma not in (-1, 1):
            raise ModelError(f"channel sign gamma must be -1 or +1, got {self.gamma}")
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise ModelError(f"channel weight must be positive, got {self.weight}")

    @property
    def operator(self) -> InteractionKernel:
        """The complex channel kernel ``Phi_k + i Phi_k'``."""
        return self.kernel + 1j * self.kernel_prime

    @classmethod
    def from_operator(cls, op: InteractionKernel, gamma: int, weight: float = 1.0) -> "Channel":
        """Split a (non self-adjoint) kernel ``B`` into ``Re B`` and ``Im B``."""
        return cls(real_part(op), imag_part(op), gamma, weight)


@dataclass(frozen=True)
class LongRangeModel:
    """Local interaction plus finitely many long-range channels at inverse temperature ``beta``."""

    lattice: Lattice
    local: InteractionKernel
    channels: tuple[Channel, ...] = ()
    beta: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ModelError(f"beta must be positive, got {self.beta}")
        kernels = [("local", self.local)]
        for k, ch in enumerate(self.channels, start=1):
            kernels += [(f"channel {k} term", ch.kernel), (f"channel {k} term_prime", ch.kernel_prime)]
        for label, kern in kernels:
            bad = kern.self_adjoint_violation(1e-10)
            if bad is not None:
                raise ModelError(
                    f"{label} is not self-adjoint: signature {format_signature(bad)} "
                    "lacks a conjugate partner"
                )
            extra = kern.spins() - set(self.lattice.spins)
            if extra:
                raise ModelError(f"{label} uses unknown spin labels {sorted(extra)}")
            if kern and kern.dim != self.lattice.dim:
                raise ModelError(f"{label} has dimension {kern.dim}, lattice has {self.lattice.dim}")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def weights(self) -> np.ndarray:
        return np.array([ch.weight for ch in self.channels], dtype=float)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([ch.gamma for ch in self.channels], dtype=int)

    def with_beta(self, beta: float) -> "LongRangeModel":
        return LongRangeModel(self.lattice, self.local, self.channels, float(beta), self.name)

    def with_lattice(self, lattice: Lattice) -> "LongRangeModel":
        return LongRangeModel(lattice, self.local, self.channels, self.beta, self.name)

    def kernels(self) -> list[InteractionKernel]:
        out = [self.local]
        for ch in self.channels:
            out += [ch.kernel, ch.kernel_prime]
        return out

    def is_single_site(self) -> bool:
        return all(k.is_single_site() for k in self.kernels())

    def is_quadratic(self) -> bool:
        return all(k.is_quadratic() for k in self.kernels())

    def channel_norms(self) -> tuple[float, float]:
        """Weighted L2 norms ``(||Phi_a||_2, ||Phi_a'||_2)``."""
        w = self.weights
        n1 = np.array([interaction_norm(ch.kernel, self.lattice) for ch in self.channels])
        n2 = np.array([interaction_norm(ch.kernel_prime, self.lattice) for ch in self.channels])
        return float(np.sqrt(np.sum(w * n1**2))), float(np.sqrt(np.sum(w * n2**2)))

    def norm(self) -> float:
        """Model semi-norm ``||Phi|| + ||Phi_a||_2 + ||Phi_a'||_2``."""
        a, b = self.channel_norms()
        return interaction_norm(self.local, self.lattice) + a + b

    def search_radius(self) -> float:
        """Radius of the ball containing every optimal channel amplitude."""
        a, b = self.channel_norms()
        return 2.0 * (a + b) + 1.0

    def to_json(self) -> dict:
        return {
            "lattice": {"d": self.lattice.dim, "spins": list(self.lattice.spins), "side": self.lattice.side},
            "beta": float(self.beta),
            "local": self.local.to_json(),
            "channels": [
                {
                    "gamma": ch.gamma,
                    "weight": float(ch.weight),
                    "term": ch.kernel.to_json(),
                    "term_prime": ch.kernel_prime.to_json(),
                }
                for ch in self.channels
            ],
        }

    def fingerprint(self) -> str:
        """Short hash of the validated model content."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# channel vectors

SECTORS = ("minus", "plus", "full")


@dataclass(frozen=True)
class ChannelVector:
    """Complex channel amplitudes tagged with the sign sector they live in."""

    values: np.ndarray
    sector: str = "full"

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ModelError(f"unknown sector {self.sector!r}")
        vals = np.array(self.values, dtype=complex).reshape(-1)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __add__(self, other: "ChannelVector") -> "ChannelVector":
        sector = self.sector if self.sector == other.sector else "full"
        return ChannelVector(self.values + other.values, sector)

    def norm(self, weights) -> float:
        return weighted_norm(self.values, weights)


def weighted_norm(c, weights) -> float:
    c = np.asarray(c, dtype=complex)
    return float(np.sqrt(np.sum(np.asarray(weights) * np.abs(c) ** 2)))


def weighted_inner(u, v, weights) -> complex:
    """``<u, v> = sum_k w_k conj(u_k) v_k``."""
    return complex(np.sum(np.asarray(weights) * np.conj(u) * v))


def split_channel_vector(c, model: LongRangeModel) -> tuple[ChannelVector, ChannelVector]:
    """Split amplitudes into attractive (``gamma=-1``) and repulsive parts."""
    vals = c.values if isinstance(c, ChannelVector) else np.asarray(c, dtype=complex)
    if len(vals) != model.n_channels:
        raise ModelError(f"expected {model.n_channels} channel amplitudes, got {len(vals)}")
    g = model.gammas
    minus = np.where(g < 0, vals, 0.0)
    plus = np.where(g > 0, vals, 0.0)
    return ChannelVector(minus, "minus"), ChannelVector(plus, "plus")


def build_approximating_interaction(model: LongRangeModel, c) -> InteractionKernel:
    """``Phi(c) = Phi + sum_k w_k gamma_k (conj(c_k) B_k + c_k B_k^*)`` with ``B_k = Phi_k + i Phi_k'``."""
    vals = c.values if isinstance(c, ChannelVector) else np.asarray(c, dtype=complex)
    if len(vals) != model.n_channels:
        raise ModelError(f"expected {model.n_channels} channel amplitudes, got {len(vals)}")
    out = model.local
    for ck, ch in zip(vals, model.channels):
        if ck == 0:
            continue
        b = ch.operator
        out = out + ch.weight * ch.gamma * (np.conj(ck) * b + ck * b.adjoint())
    return out
