import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from cheeger_lab import domain as domain_, errors


def line(values, spacing=1.0, a=1.0, b=1.0):
    n = len(values)
    dom = domain_.WeightedDomain(
        1, (n,), spacing, None, np.full(n, a), np.full(n, b))
    return dom, dom.field(np.asarray(values, dtype=float))


def grid(shape, seed, low=0.5, high=2.0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(low, high, size=shape)
    b = rng.uniform(low, high, size=shape)
    return domain_.WeightedDomain(
        len(shape), shape, 1.0 / shape[0], None, a, b), rng


shapes = st.one_of(
    st.tuples(st.integers(1, 12)),
    st.tuples(st.integers(1, 8), st.integers(1, 8)))


@pytest.mark.unit
def test_gradient_1d_with_ghost_zeros():
    __, u = line([0.0, 1.0, 0.0])
    grad = domain_.gradient(u)
    np.testing.assert_array_equal(grad.values, [0.0, 1.0, -1.0, 0.0])


@pytest.mark.unit
def test_faces_1d():
    dom, __ = line([0.0, 0.0, 0.0])
    faces = dom.faces
    np.testing.assert_array_equal(faces.tail, [-1, 0, 1, 2])
    np.testing.assert_array_equal(faces.head, [0, 1, 2, -1])
    np.testing.assert_array_equal(dom.exterior, [True, False, False, True])


@pytest.mark.unit
def test_tv_and_energy_bump():
    __, u = line([0.0, 1.0, 0.0])
    assert domain_.weighted_tv(u) == 2.0
    assert domain_.p_energy(u, 1.5) == pytest.approx(2.0)
    assert domain_.p_mass(u, 1.5) == 1.0


@pytest.mark.unit
def test_weighted_tv_scales_with_a():
    __, u = line([1.0, 3.0, 2.0], a=2.5)
    assert domain_.weighted_tv(u) == pytest.approx(
        2.5 * domain_.unweighted_tv(u))


@pytest.mark.unit
def test_perimeter_unit_square():
    dom = domain_.build_domain(domain_.DomainSpec(dim=2, n=4, extent=1.0))
    full = domain_.SetMask(dom.mask, dom)
    assert domain_.weighted_perimeter(full) == pytest.approx(4.0, rel=1e-14)
    assert domain_.weighted_volume(full) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.unit
def test_perimeter_single_cell():
    dom = domain_.WeightedDomain(
        2, (1, 1), 1.0, None, np.full((1, 1), 3.0), np.full((1, 1), 1.5))
    cell = domain_.SetMask(dom.mask, dom)
    assert domain_.weighted_perimeter(cell) == 12.0
    assert domain_.weighted_volume(cell) == 1.5


@pytest.mark.unit
def test_perimeter_interval():
    dom, __ = line(np.zeros(8), spacing=1.0 / 8)
    full = domain_.SetMask(dom.mask, dom)
    assert domain_.weighted_perimeter(full) == 2.0
    assert domain_.weighted_volume(full) == 1.0


@pytest.mark.unit
def test_crofton_stencil_faces():
    dom = domain_.build_domain(domain_.DomainSpec(
        dim=2, n=3, extent=1.0, stencil='CroftonC8'))
    weights = set(np.round(dom.faces.weight, 12))
    assert weights == {
        round(math.pi / 8, 12), round(math.pi / (8 * math.sqrt(2)), 12)}


@pytest.mark.unit
def test_crofton_stencil_1d_rejected():
    with pytest.raises(errors.ValidationError):
        domain_.build_domain(domain_.DomainSpec(
            dim=1, n=4, stencil='CroftonC8'))


@pytest.mark.unit
def test_build_domain_expressions():
    dom = domain_.build_domain(domain_.DomainSpec(
        dim=2, n=4, extent=1.0, a='1 + x', b='2'))
    x, __ = dom.centers
    np.testing.assert_allclose(dom.a_field, 1 + x)
    np.testing.assert_array_equal(dom.b_cells, np.full(16, 2.0))
    assert dom.mu == pytest.approx(1.125)


@pytest.mark.unit
def test_build_domain_mask_expression():
    dom = domain_.build_domain(domain_.DomainSpec(
        dim=2, n=8, extent=1.0,
        mask='0.16 - (x - 0.5)^2 - (y - 0.5)^2'))
    assert 0 < dom.cell_count < 64
    assert not dom.mask[0, 0]
    assert dom.mask[4, 4]
    # cells outside the mask carry no weight
    assert dom.a_field[0, 0] == 0.0


@pytest.mark.unit
@pytest.mark.parametrize('kwargs, error', [
    ({'mask': np.zeros(3, dtype=bool)}, errors.EmptyDomain),
    ({'mask': np.array([True, False, True])}, errors.DisconnectedMask),
    ({'a': np.array([1.0, 0.0, 1.0])}, errors.NonPositiveWeightA),
    ({'a': np.array([1.0, np.nan, 1.0])}, errors.NonFiniteWeight),
    ({'mu': 2.0}, errors.WeightBelowMu),
    ({'b': np.array([1.0, -1.0, 1.0])}, errors.NegativeWeightB),
    ({'b': np.zeros(3)}, errors.ZeroMassB),
])
def test_domain_validation(kwargs, error):
    options = {'mask': None, 'a': np.ones(3), 'b': np.ones(3), 'mu': None}
    options.update(kwargs)
    with pytest.raises(error):
        domain_.WeightedDomain(
            1, (3,), 1.0, options['mask'], options['a'], options['b'],
            mu=options['mu'])


@pytest.mark.unit
def test_domain_errors_are_validation_errors():
    assert issubclass(errors.ZeroMassB, errors.ValidationError)
    assert issubclass(errors.WeightBelowMu, errors.NonPositiveWeightA)


@pytest.mark.unit
def test_field_shape_mismatch():
    dom, __ = line([0.0, 0.0])
    with pytest.raises(errors.DomainMismatch):
        dom.field(np.zeros(3))


@pytest.mark.unit
def test_set_outside_mask_rejected():
    dom = domain_.WeightedDomain(
        1, (3,), 1.0, np.array([True, True, False]), np.ones(3), np.ones(3))
    with pytest.raises(errors.DomainMismatch):
        domain_.SetMask(np.array([False, True, True]), dom)


@pytest.mark.unit
def test_with_weights_keeps_grid():
    dom, __ = line([0.0, 0.0, 0.0], a=2.0)
    heavier = dom.with_weights(a=np.full(3, 4.0))
    assert heavier.same_grid(dom)
    assert heavier.mu == 4.0
    np.testing.assert_array_equal(heavier.b_field, dom.b_field)


@pytest.mark.unit
def test_coarea_decompose_levels():
    dom, u = line([1.0, 3.0, 0.0])
    levels = domain_.coarea_decompose(u)
    assert [level.threshold for level in levels] == [0.0, 1.0]
    assert [level.dt for level in levels] == [1.0, 2.0]
    np.testing.assert_array_equal(levels[0].set.cells, [True, True, False])
    np.testing.assert_array_equal(levels[1].set.cells, [False, True, False])
    assert dom is levels[0].set.domain


@pytest.mark.unit
def test_coarea_decompose_negative():
    __, u = line([1.0, -1.0])
    with pytest.raises(errors.NegativeField):
        domain_.coarea_decompose(u)


@pytest.mark.unit
@hsettings(max_examples=50, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2 ** 16))
def test_divergence_is_negative_adjoint(shape, seed):
    dom, rng = grid(shape, seed)
    u = dom.from_cells(rng.normal(size=dom.cell_count))
    z = domain_.VectorField(rng.normal(size=dom.face_count), dom)
    left = float(domain_.gradient(u).values @ z.values)
    right = -domain_.inner(u, domain_.divergence(z))
    scale = np.abs(domain_.gradient(u).values).sum() * np.abs(
        z.values).max() + 1.0
    assert abs(left - right) <= 1e-12 * scale


@pytest.mark.unit
@hsettings(max_examples=50, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2 ** 16))
def test_coarea_identity(shape, seed):
    dom, rng = grid(shape, seed)
    values = rng.integers(0, 6, size=dom.cell_count) * rng.uniform(0.1, 3)
    u = dom.from_cells(values)
    total = sum(level.dt * domain_.weighted_perimeter(level.set)
                for level in domain_.coarea_decompose(u))
    assert total == pytest.approx(domain_.weighted_tv(u), rel=1e-10, abs=0)


@pytest.mark.unit
@hsettings(max_examples=50, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2 ** 16))
def test_weighted_tv_lower_bound(shape, seed):
    dom, rng = grid(shape, seed)
    u = dom.from_cells(rng.normal(size=dom.cell_count))
    assert domain_.weighted_tv(u) >= dom.mu * domain_.unweighted_tv(u) * (
        1 - 1e-12)


@pytest.mark.unit
@hsettings(max_examples=30, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2 ** 16),
       scale=st.floats(0.1, 10.0), p=st.floats(1.0, 2.0))
def test_energy_homogeneity(shape, seed, scale, p):
    dom, rng = grid(shape, seed)
    u = dom.from_cells(rng.normal(size=dom.cell_count))
    assert domain_.p_energy(scale * u, p) == pytest.approx(
        scale ** p * domain_.p_energy(u, p), rel=1e-10)
    assert domain_.p_mass(scale * u, p) == pytest.approx(
        scale ** p * domain_.p_mass(u, p), rel=1e-10)
