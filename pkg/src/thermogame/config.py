"""Model configuration files and named model families.

Configurations are TOML documents::

    beta = 8.0

    [lattice]
    d = 1
    spins = ["up", "down"]
    side = 2

    [local]
    term = ["-0.5 0 (+ up 0) (- up 0)", "-0.5 0 (+ down 0) (- down 0)"]

    [[channel]]
    gamma = -1
    weight = 1.0
    term = ["0.5 0 (- down 0) (- up 0)", "0.5 0 (+ up 0) (+ down 0)"]
    term_prime = ["0 -0.5 (- down 0) (- up 0)", "0 0.5 (+ up 0) (+ down 0)"]

A term row is ``coef_re coef_im (nu spin dx [dy [dz]]) ...``; the array form
``[coef_re, coef_im, [nu, spin, dx, ...], ...]`` is accepted as well. A
top-level ``mu`` adds ``-mu`` times the number operator to the local
interaction. Named families are selected with ``preset = "bcs"``,
``"forward"`` or ``"hubbard-type"`` and their parameters go into a
``[params]`` table.
"""

from __future__ import annotations

import re
from typing import Any, Mapping, Sequence

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .model import (
    ANNIHILATE,
    CREATE,
    Channel,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    ModelError,
    hopping_kernel,
    number_kernel,
    zero_kernel,
)
from .quasifree import HubbardTypeModel


class ConfigError(ModelError):
    """Malformed configuration text."""


_FACTOR = re.compile(r"\(\s*([+-])\s+(\S+?)((?:\s+-?\d+)+)\s*\)")


def parse_term(row, dim: int, where: str = "term"):
    """Parse one term row into ``(factors, coefficient)``."""
    if isinstance(row, str):
        head = row.split("(", 1)
        nums = head[0].split()
        if len(nums) != 2:
            raise ConfigError(f"{where}: expected 'coef_re coef_im (nu spin dx ...)...', got {row!r}")
        try:
            coef = complex(float(nums[0]), float(nums[1]))
        except ValueError as exc:
            raise ConfigError(f"{where}: bad coefficient in {row!r}") from exc
        rest = "(" + head[1] if len(head) > 1 else ""
        factors = []
        pos = 0
        for m in _FACTOR.finditer(rest):
            if rest[pos:m.start()].strip():
                raise ConfigError(f"{where}: cannot parse {rest[pos:m.start()]!r} in {row!r}")
            pos = m.end()
            offs = tuple(int(v) for v in m.group(3).split())
            factors.append((m.group(1), m.group(2), offs))
        if rest[pos:].strip():
            raise ConfigError(f"{where}: cannot parse {rest[pos:]!r} in {row!r}")
    elif isinstance(row, (list, tuple)) and len(row) >= 2:
        try:
            coef = complex(float(row[0]), float(row[1]))
            factors = [(str(f[0]), str(f[1]), tuple(int(v) for v in f[2:])) for f in row[2:]]
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{where}: malformed array term {row!r}") from exc
    else:
        raise ConfigError(f"{where}: a term must be a string or an array, got {row!r}")
    for nu, _, offs in factors:
        if nu not in (CREATE, ANNIHILATE):
            raise ConfigError(f"{where}: dagger flag must be '+' or '-'")
        if len(offs) != dim:
            raise ConfigError(f"{where}: offset {offs} has {len(offs)} components, lattice dimension is {dim}")
    return tuple(factors), coef


def _kernel_from_rows(rows, dim: int, where: str) -> InteractionKernel:
    if rows is None:
        return zero_kernel(dim)
    if not isinstance(rows, list):
        raise ConfigError(f"{where}: 'term' must be a list of rows")
    return InteractionKernel([parse_term(r, dim, f"{where}[{i}]") for i, r in enumerate(rows)], dim)


def _rows(section: Mapping, key: str):
    if key in section and key + "s" in section:
        raise ConfigError(f"use either '{key}' or '{key}s', not both")
    return section.get(key, section.get(key + "s"))


def _gamma(value, where: str) -> int:
    if isinstance(value, bool) or value not in (-1, 1):
        raise ConfigError(f"{where}: gamma must be -1 or +1, got {value!r}")
    return int(value)


def _lattice(doc: Mapping, default_spins: Sequence[str]) -> Lattice:
    sec = doc.get("lattice", {})
    if not isinstance(sec, Mapping):
        raise ConfigError("'lattice' must be a table")
    unknown = set(sec) - {"d", "spins", "side"}
    if unknown:
        raise ConfigError(f"unknown lattice keys {sorted(unknown)}")
    return Lattice(int(sec.get("d", 1)), tuple(sec.get("spins", default_spins)), int(sec.get("side", 1)))


def _check_keys(doc: Mapping, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


# ---------------------------------------------------------------------------
# presets


def _profile_offsets(profile, dim: int) -> dict:
    """``[[dx, ..., value_re, (value_im)]]`` rows to an offset map."""
    out = {}
    for row in profile:
        row = list(row)
        if len(row) not in (dim + 1, dim + 2):
            raise ConfigError(f"profile row {row} needs {dim} offsets and a real or complex value")
        off = tuple(int(v) for v in row[:dim])
        val = complex(row[dim], row[dim + 1] if len(row) == dim + 2 else 0.0)
        out[off] = out.get(off, 0) + val
    return out


def _nn_hopping(t: float, mu: float, spins, dim: int) -> InteractionKernel:
    amps = {(0,) * dim: -mu}
    for axis in range(dim):
        for sgn in (1, -1):
            r = [0] * dim
            r[axis] = sgn
            amps[tuple(r)] = amps.get(tuple(r), 0) + t
    return hopping_kernel({r: a for r, a in amps.items() if a != 0}, spins, dim)


def bcs_model(lattice: Lattice | None = None, beta: float = 1.0, t: float = 0.0, mu: float = 0.0,
              coupling: float = 1.0, profile=None, pairing: str = "direct") -> LongRangeModel:
    """Reduced BCS model with one attractive pairing channel.

    The local part is the hopping ``t`` between nearest neighbours plus
    ``-mu`` on site. The channel operator is

    * ``pairing="direct"``: ``sum_y f(y) a_{0,down} a_{y,up}``;
    * ``pairing="antisymmetric"``: ``sum_y (f(-y) - f(y)) a_{0,down} a_{y,up}``,

    with ``f`` given by ``profile`` (default: on-site, ``f = delta_0``). The
    channel weight is ``coupling``.
    """
    lattice = lattice or Lattice(1, ("up", "down"), 1)
    if set(lattice.spins) != {"up", "down"}:
        raise ConfigError("the bcs preset needs spins 'up' and 'down'")
    dim = lattice.dim
    f = _profile_offsets(profile, dim) if profile is not None else {(0,) * dim: 1.0}
    if pairing == "direct":
        amp = f
    elif pairing == "antisymmetric":
        keys = set(f) | {tuple(-v for v in k) for k in f}
        amp = {y: f.get(tuple(-v for v in y), 0) - f.get(y, 0) for y in keys}
    else:
        raise ConfigError(f"pairing must be 'direct' or 'antisymmetric', got {pairing!r}")
    origin = (0,) * dim
    op = InteractionKernel(
        [(((ANNIHILATE, "down", origin), (ANNIHILATE, "up", y)), a) for y, a in amp.items() if a != 0], dim
    )
    local = _nn_hopping(t, mu, lattice.spins, dim) if (t or mu) else zero_kernel(dim)
    channels = (Channel.from_operator(op, -1, coupling),)
    return LongRangeModel(lattice, local, channels, beta, name="bcs")


def forward_model(lattice: Lattice | None = None, beta: float = 1.0, t: float = 0.0, mu: float = 0.0,
                  channels: Sequence[Mapping] = ()) -> LongRangeModel:
    """Free hopping plus forward-scattering channels.

    Channel ``k`` has operator ``sum_{s,r} f_k(r) a^*_{0,s} a_{r,s}`` (its real
    and imaginary parts give the two kernels); each channel mapping holds
    ``profile`` rows ``[dx..., value_re, (value_im)]``, ``gamma`` and
    ``weight``.
    """
    lattice = lattice or Lattice(1, ("up", "down"), 1)
    dim = lattice.dim
    chans = []
    for k, spec in enumerate(channels, start=1):
        _check_keys(spec, {"profile", "gamma", "weight"}, f"forward channel {k}")
        f = _profile_offsets(spec.get("profile", [[*([0] * dim), 1.0]]), dim)
        op = hopping_kernel({tuple(-v for v in r): a for r, a in f.items()}, lattice.spins, dim)
        chans.append(Channel.from_operator(op, _gamma(spec.get("gamma"), f"forward channel {k}"),
                                           float(spec.get("weight", 1.0))))
    local = _nn_hopping(t, mu, lattice.spins, dim) if (t or mu) else zero_kernel(dim)
    return LongRangeModel(lattice, local, tuple(chans), beta, name="forward")


def ising_density_model(lattice: Lattice | None = None, beta: float = 1.0, coupling: float = 1.0):
    """Spinless density model ``-J sum_<xy> (n_x - 1/2)(n_y - 1/2)`` and the channel ``n - 1/2``.

    Returns ``(local_kernel, channel_operator)`` for
    :func:`thermogame.game.duality_gap_demo`. The model is particle-hole
    symmetric, so at low temperature it has two symmetry-related phases.
    """
    lattice = lattice or Lattice(1, ("s",), 2)
    if len(lattice.spins) != 1:
        raise ConfigError("the density model is spinless")
    s = lattice.spins[0]
    dim = lattice.dim
    origin = (0,) * dim
    terms = []
    for axis in range(dim):
        e = tuple(1 if i == axis else 0 for i in range(dim))
        terms.append((((CREATE, s, origin), (CREATE, s, e), (ANNIHILATE, s, e), (ANNIHILATE, s, origin)), -coupling))
        terms.append((((CREATE, s, origin), (ANNIHILATE, s, origin)), coupling))
        terms.append(((), -0.25 * coupling))
    local = InteractionKernel(terms, dim)
    channel = InteractionKernel([(((CREATE, s, origin), (ANNIHILATE, s, origin)), 1.0), ((), -0.5)], dim)
    return local, channel


def _profile_function(spec: Mapping, where: str):
    """Macroscopic channel profile ``f(zeta)`` and its breakpoints."""
    kind = spec.get("kind", "constant")
    if kind == "constant":
        value = float(spec.get("value", 1.0))
        return (lambda z: np.full(len(z), value)), ()
    if kind == "step":
        at = float(spec.get("at", 0.0))
        left, right = float(spec.get("left", 1.0)), float(spec.get("right", 0.0))
        return (lambda z: np.where(z[:, 0] < at, left, right)), (at,)
    if kind == "cosine":
        amp, freq = float(spec.get("amplitude", 1.0)), float(spec.get("frequency", 1.0))
        return (lambda z: amp * np.prod(np.cos(2 * np.pi * freq * z), axis=1)), ()
    if kind == "samples":
        vals = np.asarray(spec.get("values"), dtype=float)
        if vals.ndim != 1 or len(vals) < 2:
            raise ConfigError(f"{where}: 'samples' profiles need at least two values")
        nodes = np.linspace(-0.5, 0.5, len(vals))
        return (lambda z: np.interp(z[:, 0], nodes, vals)), tuple(nodes[1:-1])
    raise ConfigError(f"{where}: unknown profile kind {kind!r}")


def hubbard_type_model(dim: int = 1, spins: Sequence[str] = ("up", "down"), beta: float = 1.0,
                       t: float = 1.0, mu: float = 0.0, channels: Sequence[Mapping] = ()) -> HubbardTypeModel:
    """Hubbard-type model with macroscopic density-density channels.

    Channels are mappings with ``gamma``, ``weight`` and a ``profile`` table
    (``kind`` = ``constant``, ``step``, ``cosine`` or ``samples``). Sampled
    and step profiles are one-dimensional.
    """
    hop = {(0,) * dim: -mu}
    for axis in range(dim):
        for sgn in (1, -1):
            r = [0] * dim
            r[axis] = sgn
            hop[tuple(r)] = t
    profiles, gammas, weights, breaks = [], [], [], []
    for k, spec in enumerate(channels, start=1):
        where = f"hubbard-type channel {k}"
        _check_keys(spec, {"profile", "gamma", "weight"}, where)
        f, bp = _profile_function(spec.get("profile", {}), where)
        profiles.append(f)
        breaks.extend(bp)
        gammas.append(_gamma(spec.get("gamma"), where))
        weights.append(float(spec.get("weight", 1.0)))
    return HubbardTypeModel(dim, tuple(spins), {r: complex(h) for r, h in hop.items() if h != 0},
                            tuple(profiles), tuple(gammas), tuple(weights), float(beta),
                            tuple(sorted(set(breaks))))


PRESETS = ("bcs", "forward", "hubbard-type")


# ---------------------------------------------------------------------------
# loading


def _decode(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"parse error: {exc}") from exc


def model_from_dict(doc: Mapping[str, Any]):
    """Build and validate a model from a decoded configuration tree."""
    _check_keys(doc, {"beta", "mu", "lattice", "local", "channel", "preset", "params"}, "config")
    beta = doc.get("beta", 1.0)
    if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not beta > 0:
        raise ConfigError(f"beta must be a positive number, got {beta!r}")
    preset = doc.get("preset")
    params = dict(doc.get("params", {}))
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    if preset == "hubbard-type":
        if any(k in doc for k in ("local", "channel", "mu")):
            raise ConfigError("hubbard-type configs take their parameters from [params] only")
        sec = doc.get("lattice", {})
        _check_keys(params, {"t", "mu", "channels"}, "hubbard-type params")
        return hubbard_type_model(int(sec.get("d", 1)), tuple(sec.get("spins", ("up", "down"))), float(beta),
                                  float(params.get("t", 1.0)), float(params.get("mu", 0.0)),
                                  params.get("channels", []))
    if preset == "bcs":
        _check_keys(params, {"t", "mu", "coupling", "profile", "pairing"}, "bcs params")
        lattice = _lattice(doc, ("up", "down"))
        base = bcs_model(lattice, float(beta), float(params.get("t", 0.0)), float(params.get("mu", 0.0)),
                         float(params.get("coupling", 1.0)), params.get("profile"),
                         params.get("pairing", "direct"))
    elif preset == "forward":
        _check_keys(params, {"t", "mu", "channels"}, "forward params")
        lattice = _lattice(doc, ("up", "down"))
        base = forward_model(lattice, float(beta), float(params.get("t", 0.0)), float(params.get("mu", 0.0)),
                             params.get("channels", []))
    else:
        if params:
            raise ConfigError("[params] requires a preset")
        lattice = _lattice(doc, ("s",))
        base = LongRangeModel(lattice, zero_kernel(lattice.dim), (), float(beta))
    dim = lattice.dim
    local = base.local
    if "mu" in doc:
        local = local + number_kernel(lattice.spins, dim, -float(doc["mu"]))
    if "local" in doc:
        sec = doc["local"]
        if not isinstance(sec, Mapping):
            raise ConfigError("'local' must be a table")
        _check_keys(sec, {"term", "terms"}, "local")
        local = local + _kernel_from_rows(_rows(sec, "term"), dim, "local.term")
    channels = list(base.channels)
    extra = doc.get("channel", [])
    if isinstance(extra, Mapping):
        extra = [extra]
    for k, sec in enumerate(extra, start=len(channels) + 1):
        where = f"channel[{k}]"
        _check_keys(sec, {"gamma", "weight", "term", "terms", "term_prime", "terms_prime"}, where)
        if "gamma" not in sec:
            raise ConfigError(f"{where}: missing gamma")
        weight = sec.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, (int, float)) or not weight > 0:
            raise ConfigError(f"{where}: weight must be positive, got {weight!r}")
        prime_rows = sec.get("term_prime", sec.get("terms_prime"))
        channels.append(Channel(
            _kernel_from_rows(_rows(sec, "term"), dim, f"{where}.term"),
            _kernel_from_rows(prime_rows, dim, f"{where}.term_prime"),
            _gamma(sec["gamma"], where), float(weight),
        ))
    return LongRangeModel(lattice, local, tuple(channels), float(beta), name=preset or "custom")


def load_model(text: str):
    """Parse configuration text into a validated model.

    Returns a :class:`LongRangeModel`, or a :class:`HubbardTypeModel` for the
    ``hubbard-type`` preset.
    """
    return model_from_dict(_decode(text))


def load_model_file(path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())
