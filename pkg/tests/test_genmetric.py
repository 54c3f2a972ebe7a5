import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import NotAGroupError
from src.models.affine import AffineDiffeo
from src.models.courant_models import SectionKind
from src.models.fields import KForm, SymTensor2
from src.models.genmetric_models import GenMetric, GMTangent
from src.models.symmetry_models import GroupElement
from src.services.genmetric_service import (act, act_frame, average, check_group, from_subbundle, graph_frame,
                                            tangent_inner, tangent_pushforward)
from src.services.suite_runner import ROTATIONS
from src.services.symmetry_service import compose
from tests.test_symmetry import random_element


def random_genmetric(factory, kind):
    gamma = factory.form(1, 0.3) if kind == SectionKind.odd else None
    return GenMetric(g=factory.metric(0.2), omega=factory.form(2, 0.3), gamma=gamma)


def random_tangent(factory, kind):
    gamma_dot = factory.form(1) if kind == SectionKind.odd else None
    return GMTangent(g_dot=factory.sym(), omega_dot=factory.form(2), gamma_dot=gamma_dot)


def rotation_group(grid, kind=SectionKind.exact):
    rotation = AffineDiffeo.from_arrays(grid, np.array(ROTATIONS[grid.n]))
    elements, phi = [], AffineDiffeo.identity(grid)
    for _ in range(4):
        elements.append(GroupElement.diffeo(phi, kind))
        phi = phi.compose(rotation)
    return elements


def test_metric_part_must_be_positive(grid2):
    with pytest.raises(ValidationError):
        GenMetric(g=SymTensor2.flat(grid2) * -1.0, omega=KForm.zeros(grid2, 2))


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_graph_frame_recovers_metric(factory3, kind):
    V = random_genmetric(factory3, kind)
    frame = graph_frame(V)
    assert from_subbundle(frame).difference(V).norm() <= 1e-10


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_action_on_generalized_metrics_is_a_right_action(factory3, kind):
    g1, g2 = random_element(factory3, kind), random_element(factory3, kind)
    V = random_genmetric(factory3, kind)
    assert act(compose(g1, g2), V).difference(act(g2, act(g1, V))).norm() <= 1e-10


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_pair_formula_matches_subbundle_action(factory3, kind):
    g = random_element(factory3, kind)
    V = random_genmetric(factory3, kind)
    assert from_subbundle(act_frame(g, graph_frame(V))).difference(act(g, V)).norm() <= 1e-8


@pytest.mark.parametrize("kind", [SectionKind.exact, SectionKind.odd])
def test_tangent_metric_is_invariant(factory3, kind):
    g = random_element(factory3, kind)
    V = random_genmetric(factory3, kind)
    t1, t2 = random_tangent(factory3, kind), random_tangent(factory3, kind)
    before = tangent_inner(V, t1, t2)
    after = tangent_inner(act(g, V), tangent_pushforward(g, t1), tangent_pushforward(g, t2))
    assert after == pytest.approx(before, rel=1e-9, abs=1e-9)


def test_tangent_metric_is_positive(factory3):
    V = random_genmetric(factory3, SectionKind.odd)
    t = random_tangent(factory3, SectionKind.odd)
    assert tangent_inner(V, t, t) > 0.0


def test_average_is_invariant(grid2, factory2):
    group = rotation_group(grid2)
    averaged = average(group, random_genmetric(factory2, SectionKind.exact))
    for element in group:
        assert act(element, averaged).difference(averaged).norm() <= 1e-10


def test_average_needs_a_group(grid2, factory2):
    incomplete = rotation_group(grid2)[:2]
    with pytest.raises(NotAGroupError):
        check_group(incomplete)
    with pytest.raises(NotAGroupError):
        average(incomplete, random_genmetric(factory2, SectionKind.exact))


def test_generalized_metric_json_round_trip(factory3):
    V = random_genmetric(factory3, SectionKind.odd)
    assert GenMetric.from_json_dict(V.grid, V.to_json_dict()).difference(V).norm() <= 1e-10
