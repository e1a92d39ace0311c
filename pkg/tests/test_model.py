import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermogame.model import (
    Channel,
    ChannelVector,
    ClusterTooLargeError,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    ModelError,
    build_approximating_interaction,
    canonical_signature,
    hopping_kernel,
    interaction_norm,
    number_kernel,
    split_channel_vector,
    weighted_inner,
    weighted_norm,
    zero_kernel,
)


def test_lattice_geometry():
    lat = Lattice(2, ("up", "down"), 1)
    assert lat.period == 3
    assert lat.volume == 9
    assert lat.n_modes == 18
    assert lat.sites()[0] == (-1, -1)
    assert lat.site_index((0, 0)) == 4
    assert lat.wrap((2, -2)) == (-1, 1)
    assert lat.mode_index((0, 0), "down") == 9


def test_lattice_rejects_bad_input():
    with pytest.raises(ModelError):
        Lattice(0, ("s",), 1)
    with pytest.raises(ModelError):
        Lattice(1, ("s", "s"), 1)
    with pytest.raises(ModelError):
        Lattice(1, ("s",), -1)


def test_canonical_signature_sign_and_translation():
    # a_{1} a+_{0}  ->  normal ordering is not performed, only reordering of a normal-ordered word
    sign, sig = canonical_signature([("+", "s", (2,)), ("+", "s", (1,))])
    assert sign == -1
    assert sig == (("+", "s", (0,)), ("+", "s", (1,)))
    sign, sig = canonical_signature([("+", "s", (3,)), ("-", "s", (3,))])
    assert sign == 1 and sig == (("+", "s", (0,)), ("-", "s", (0,)))
    assert canonical_signature([("-", "s", (0,)), ("-", "s", (0,))]) is None


def test_kernel_merges_equivalent_terms():
    k = InteractionKernel([
        ((("+", "s", (0,)), ("+", "s", (1,))), 1.0),
        ((("+", "s", (5,)), ("+", "s", (4,))), 1.0),  # translate of the reversed word
    ])
    assert len(k) == 0


def test_kernel_rejects_odd_and_bad_dimension():
    with pytest.raises(ModelError, match="odd"):
        InteractionKernel([((("+", "s", (0,)),), 1.0)])
    with pytest.raises(ModelError, match="dimension"):
        InteractionKernel([((("+", "s", (0, 0)), ("-", "s", (0, 0))), 1.0)], dim=1)


def test_adjoint_and_self_adjointness():
    hop = hopping_kernel({(1,): -1.0, (-1,): -1.0}, ("s",))
    assert hop.is_self_adjoint()
    pair = InteractionKernel([((("-", "down", (0,)), ("-", "up", (0,))), 1.0)])
    assert not pair.is_self_adjoint()
    assert (pair + pair.adjoint()).is_self_adjoint()
    assert pair.adjoint().adjoint() == pair


def test_kernel_properties():
    quartic = InteractionKernel([((("+", "s", (0,)), ("+", "s", (1,)), ("-", "s", (1,)), ("-", "s", (0,))), 1.0)])
    assert quartic.max_body == 4
    assert not quartic.is_quadratic()
    assert quartic.diameter == 1
    assert number_kernel(("s",)).is_single_site()
    assert number_kernel(("s",)).is_gauge_invariant()


def test_interaction_norm_of_number_operator():
    # ||n_up + n_down|| on one site is 2
    assert np.isclose(interaction_norm(number_kernel(("up", "down"))), 2.0)


def test_interaction_norm_of_hopping_bond():
    # the bond term a+_0 a_1 + a+_1 a_0 has norm 1, the class is shared by two sites
    hop = hopping_kernel({(1,): 1.0, (-1,): 1.0}, ("s",))
    assert np.isclose(interaction_norm(hop), 1.0)


def test_interaction_norm_cluster_cap():
    far = InteractionKernel([((("+", "s", (0,)), ("-", "s", (20,))), 1.0),
                             ((("+", "s", (20,)), ("-", "s", (0,))), 1.0)])
    with pytest.raises(ClusterTooLargeError, match="cluster too large"):
        interaction_norm(far, Lattice(1, ("a", "b", "c", "d"), 1), max_dim=2**6)


def test_model_validation_names_offending_term():
    lat = Lattice(1, ("s",), 1)
    bad = InteractionKernel([((("+", "s", (0,)), ("-", "s", (1,))), 1.0)])
    with pytest.raises(ModelError, match=r"\(\+ s 0\) \(- s 1\)"):
        LongRangeModel(lat, bad)
    with pytest.raises(ModelError):
        Channel(zero_kernel(), zero_kernel(), 0, 1.0)
    with pytest.raises(ModelError):
        Channel(zero_kernel(), zero_kernel(), 1, -1.0)


def test_channel_vectors():
    w = np.array([1.0, 2.0])
    assert np.isclose(weighted_norm([3, 4j], w), np.sqrt(9 + 32))
    assert np.isclose(weighted_inner([1j, 1], [1, 1], w), -1j + 2)
    pair = InteractionKernel([((("-", "s", (0,)), ("-", "s", (1,))), 1.0)])
    lat = Lattice(1, ("s",), 1)
    model = LongRangeModel(lat, zero_kernel(), (Channel.from_operator(pair, -1, 1.0),
                                               Channel.from_operator(number_kernel(("s",)), 1, 2.0)))
    minus, plus = split_channel_vector([1 + 1j, 2.0], model)
    assert np.allclose(minus.values, [1 + 1j, 0]) and minus.sector == "minus"
    assert np.allclose(plus.values, [0, 2.0])
    with pytest.raises(ModelError):
        ChannelVector([1.0], "sideways")


def test_approximating_interaction_is_self_adjoint():
    pair = InteractionKernel([((("-", "down", (0,)), ("-", "up", (0,))), 1.0)])
    lat = Lattice(1, ("up", "down"), 1)
    model = LongRangeModel(lat, zero_kernel(), (Channel.from_operator(pair, -1, 0.7),))
    phi = build_approximating_interaction(model, [0.3 - 0.2j])
    assert phi.is_self_adjoint()
    # -w (conj(c) B + c B*) has coefficient -w conj(c) on B
    sig = canonical_signature([("-", "down", (0,)), ("-", "up", (0,))])
    assert np.isclose(phi.terms[sig[1]] * sig[0], -0.7 * (0.3 + 0.2j))


def test_channel_from_operator_roundtrip():
    pair = InteractionKernel([((("-", "down", (0,)), ("-", "up", (1,))), 0.5 - 0.25j)])
    ch = Channel.from_operator(pair, -1)
    assert ch.kernel.is_self_adjoint() and ch.kernel_prime.is_self_adjoint()
    assert ch.operator.allclose(pair)


def test_fingerprint_is_stable_and_sensitive():
    lat = Lattice(1, ("s",), 1)
    a = LongRangeModel(lat, number_kernel(("s",), coef=-0.5), (), 2.0)
    b = LongRangeModel(lat, number_kernel(("s",), coef=-0.5), (), 2.0)
    c = LongRangeModel(lat, number_kernel(("s",), coef=-0.5), (), 2.5)
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_search_radius_from_channel_norms():
    lat = Lattice(1, ("s",), 1)
    ch = Channel.from_operator(number_kernel(("s",)), 1, 4.0)
    model = LongRangeModel(lat, zero_kernel(), (ch,), 1.0)
    # ||Phi_a||_2 = sqrt(w) ||n|| = 2
    assert np.isclose(model.search_radius(), 2 * 2.0 + 1)


coefs = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(coefs, coefs, st.integers(-2, 2))
def test_adjoint_is_an_involution_and_antilinear(a, b, r):
    k = InteractionKernel([((("+", "s", (0,)), ("-", "s", (r,))), a),
                           ((("-", "s", (0,)), ("-", "t", (r,))), b)])
    assert k.adjoint().adjoint().allclose(k)
    assert (2j * k).adjoint().allclose(-2j * k.adjoint())
    assert (k + k.adjoint()).is_self_adjoint()


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(4)), st.integers(-3, 3))
def test_canonical_form_is_invariant_under_translation(perm, shift):
    factors = [("+", "s", (0,)), ("+", "t", (1,)), ("-", "s", (2,)), ("-", "t", (0,))]
    # reorder only within the creator and annihilator groups to stay normal ordered
    cre = [factors[i] for i in perm if factors[i][0] == "+"]
    ann = [factors[i] for i in perm if factors[i][0] == "-"]
    word = cre + ann
    moved = [(nu, s, (o[0] + shift,)) for nu, s, o in word]
    s1, sig1 = canonical_signature(word)
    s2, sig2 = canonical_signature(moved)
    assert sig1 == sig2 and s1 == s2
    s0, sig0 = canonical_signature(factors)
    assert sig0 == sig1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_norm_scales_linearly(lam, mu):
    k = hopping_kernel({(1,): 1.0, (-1,): 1.0, (0,): mu}, ("s",))
    assert np.isclose(interaction_norm(lam * k), lam * interaction_norm(k))
