import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from cheeger_lab import cheeger, domain as domain_, errors
from cheeger_lab.verify import unit_interval, unit_square


def random_domain(seed, shape=(3, 3), low=0.1, high=2.0):
    rng = np.random.default_rng(seed)
    return domain_.WeightedDomain(
        len(shape), shape, 1.0 / shape[0], None,
        rng.uniform(low, high, size=shape), rng.uniform(low, high, size=shape))


def single_cell(a=1.0, b=1.0):
    return domain_.WeightedDomain(
        2, (1, 1), 1.0, None, np.full((1, 1), a), np.full((1, 1), b))


def enumerate_functional(dom, t):
    best = np.inf
    for bits in itertools.product((False, True), repeat=dom.cell_count):
        subset = domain_.SetMask.from_cells(dom, np.array(bits))
        value = domain_.weighted_perimeter(subset) - t * \
            domain_.weighted_volume(subset)
        best = min(best, value)
    return best


@pytest.mark.unit
def test_cut_single_cell_selected():
    value, subset = cheeger.min_cut(cheeger.build_cut_graph(single_cell(), 5))
    assert value == pytest.approx(-1.0)
    assert subset.size == 1


@pytest.mark.unit
def test_cut_single_cell_empty():
    value, subset = cheeger.min_cut(cheeger.build_cut_graph(single_cell(), 3))
    assert value == pytest.approx(0.0)
    assert subset.size == 0


@pytest.mark.unit
def test_cut_negative_t():
    with pytest.raises(errors.NegativeT):
        cheeger.build_cut_graph(single_cell(), -1.0)


@pytest.mark.unit
def test_cut_hand_network():
    dom = unit_interval(2)
    graph = nx.DiGraph()
    graph.add_edge(cheeger.SOURCE, 0, capacity=3.0)
    graph.add_edge(0, 1, capacity=1.0)
    graph.add_edge(1, cheeger.SINK, capacity=2.0)
    graph.add_edge(0, cheeger.SINK, capacity=1.0)
    net = cheeger.FlowNetwork(graph, dom)
    assert net.capacity(0, 1) == 1.0
    assert net.capacity(1, 0) == 0.0

    value, subset = cheeger.min_cut(net)
    assert value == pytest.approx(2.0)
    np.testing.assert_array_equal(subset.cells, [True, False])


@pytest.mark.unit
@pytest.mark.parametrize('t', [1.0, 3.0, 5.0])
@pytest.mark.parametrize('algorithm', sorted(cheeger.FLOW_FUNCTIONS))
def test_cut_matches_enumeration(t, algorithm):
    dom = random_domain(7)
    value, subset = cheeger.min_cut(
        cheeger.build_cut_graph(dom, t), algorithm)
    expected = enumerate_functional(dom, t)
    assert value == pytest.approx(expected, abs=1e-9)
    achieved = domain_.weighted_perimeter(subset) - t * \
        domain_.weighted_volume(subset)
    assert achieved == pytest.approx(expected, abs=1e-9)


@pytest.mark.unit
def test_cut_graph_capacities_normalised():
    net = cheeger.build_cut_graph(random_domain(3), 2.0)
    capacities = [attr['capacity']
                  for __, __, attr in net.graph.edges(data=True)]
    assert max(capacities) == pytest.approx(1.0)
    assert min(capacities) >= 0


@pytest.mark.unit
def test_cheeger_options_validation():
    with pytest.raises(errors.ValidationError):
        cheeger.CheegerOptions(algorithm='preflow')
    with pytest.raises(errors.ValidationError):
        cheeger.CheegerOptions(delta=-1.0)


@pytest.mark.unit
def test_dinkelbach_interval():
    solution = cheeger.dinkelbach_cheeger(unit_interval(8))
    assert solution.h == pytest.approx(2.0, rel=1e-12)
    assert solution.set.size == 8
    assert solution.method == 'dinkelbach'
    assert solution.iterations >= 1
    assert solution.certificate == pytest.approx(0.0, abs=1e-12)


@pytest.mark.unit
def test_dinkelbach_square():
    solution = cheeger.dinkelbach_cheeger(unit_square(4))
    assert solution.h == pytest.approx(4.0, rel=1e-12)
    assert solution.set.size == 16


@pytest.mark.unit
@pytest.mark.parametrize('seed', range(5))
def test_dinkelbach_matches_brute_force(seed):
    dom = random_domain(seed)
    exact = cheeger.brute_force_cheeger(dom)
    fast = cheeger.dinkelbach_cheeger(dom)
    assert fast.h == pytest.approx(exact.h, rel=1e-10)


@pytest.mark.unit
def test_dinkelbach_edmonds_karp():
    dom = random_domain(11)
    default = cheeger.dinkelbach_cheeger(dom)
    other = cheeger.dinkelbach_cheeger(
        dom, cheeger.CheegerOptions(algorithm='edmonds_karp'))
    assert other.h == pytest.approx(default.h, rel=1e-10)


@pytest.mark.unit
def test_brute_force_single_cell():
    solution = cheeger.brute_force_cheeger(single_cell(a=3.0, b=1.5))
    assert solution.h == 8.0
    assert solution.set.size == 1
    assert solution.method == 'brute'


@pytest.mark.unit
def test_brute_force_too_large():
    with pytest.raises(errors.TooLarge):
        cheeger.brute_force_cheeger(unit_square(5))


@pytest.mark.unit
def test_brute_force_prefers_smaller_sets():
    # mass only on the middle cell; every set around it ties on volume
    dom = domain_.WeightedDomain(
        1, (3,), 1.0, None, np.ones(3), np.array([0.0, 1.0, 0.0]))
    solution = cheeger.brute_force_cheeger(dom)
    assert solution.h == 2.0
    np.testing.assert_array_equal(solution.set.cells, [False, True, False])


@pytest.mark.unit
def test_interior_family_square():
    dom = unit_square(8)
    family = cheeger.interior_family(dom)
    assert len(family) == 6
    assert [depth for __, __, depth in family] == [1, 2, 2, 3, 3, 3]
    assert [subset.size for subset, __, __ in family] == \
        [36, 16, 16, 4, 4, 4]
    assert family[-1][1] == pytest.approx(3 * dom.spacing)


@pytest.mark.unit
def test_sigma_upper_bound_above_h():
    dom = unit_square(8)
    h = cheeger.dinkelbach_cheeger(dom).h
    for inner, eps, __ in cheeger.interior_family(dom):
        assert cheeger.sigma_upper_bound(dom, inner, eps) >= h * (1 - 1e-12)


@pytest.mark.unit
def test_sigma_upper_bound_errors():
    dom = unit_square(8)
    inner, __, __ = cheeger.interior_family(dom, depths=(2,))[0]
    with pytest.raises(errors.TouchesBoundary):
        cheeger.sigma_upper_bound(dom, domain_.SetMask(dom.mask, dom), 0.25)
    with pytest.raises(errors.LayerTooThin):
        cheeger.sigma_upper_bound(dom, inner, dom.spacing / 2)
    with pytest.raises(errors.EmptySet):
        cheeger.sigma_upper_bound(
            dom, domain_.SetMask(np.zeros(dom.shape, dtype=bool), dom), 0.25)


@pytest.mark.unit
def test_lipschitz_approx():
    dom = random_domain(5, shape=(6, 6), low=0.5, high=3.0)
    k = 2.0
    approx = cheeger.lipschitz_monotone_approx(dom, k)
    assert approx.same_grid(dom)
    assert (approx.a_cells <= dom.a_cells).all()

    points = np.column_stack([axis[dom.mask] for axis in dom.centers])
    distance = np.linalg.norm(points[:, None] - points[None], axis=-1)
    jumps = np.abs(approx.a_cells[:, None] - approx.a_cells[None])
    assert (jumps <= k * distance + 1e-12).all()

    assert cheeger.dinkelbach_cheeger(approx).h <= \
        cheeger.dinkelbach_cheeger(dom).h * (1 + 1e-12)


@pytest.mark.unit
def test_lipschitz_approx_keeps_constant_weight():
    dom = unit_square(4, a=2.0)
    approx = cheeger.lipschitz_monotone_approx(dom, 1)
    np.testing.assert_array_equal(approx.a_field, dom.a_field)
    with pytest.raises(errors.ValidationError):
        cheeger.lipschitz_monotone_approx(dom, 0.5)


@pytest.mark.unit
def test_best_level_set():
    dom = domain_.WeightedDomain(
        1, (4,), 0.25, None, np.ones(4), np.ones(4))
    ratio, subset = cheeger.best_level_set(
        dom, dom.field(np.array([1.0, 2.0, 2.0, 1.0])))
    assert ratio == pytest.approx(2.0)
    assert subset.size == 4


@pytest.mark.unit
def test_best_level_set_errors():
    dom = unit_interval(3)
    with pytest.raises(errors.NegativeField):
        cheeger.best_level_set(dom, dom.field(np.array([1.0, -1.0, 0.0])))
    with pytest.raises(errors.EmptySet):
        cheeger.best_level_set(dom, dom.field(np.zeros(3)))


@pytest.mark.unit
@hsettings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 16), lift=st.floats(0.0, 2.0))
def test_h_monotone_in_a(seed, lift):
    dom = random_domain(seed)
    bump = np.random.default_rng(seed + 1).uniform(0.0, lift, size=dom.shape)
    heavier = dom.with_weights(a=dom.a_field + bump)
    assert cheeger.dinkelbach_cheeger(dom).h <= \
        cheeger.dinkelbach_cheeger(heavier).h * (1 + 1e-12)


@pytest.mark.unit
@hsettings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 16), lift=st.floats(0.0, 2.0))
def test_h_antitone_in_b(seed, lift):
    dom = random_domain(seed)
    bump = np.random.default_rng(seed + 1).uniform(0.0, lift, size=dom.shape)
    heavier = dom.with_weights(b=dom.b_field + bump)
    assert cheeger.dinkelbach_cheeger(heavier).h <= \
        cheeger.dinkelbach_cheeger(dom).h * (1 + 1e-12)
