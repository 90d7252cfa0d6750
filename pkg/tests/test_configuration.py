"""
Tests for configurations, ensembles and the configuration operations.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.errors import InvalidConfigurationError
from app.domain.configuration import (
    Ensemble,
    MarkedConfiguration,
    MarkedTestFunction,
    SimpleConfiguration,
    count,
    pair,
    pair_marked_function,
    pushforward,
    restrict,
    sigma_map,
    sigma_map_inverse,
)
from app.domain.fields import FieldSum, ProductBump
from app.domain.space import flow
from app.schemas.window import Window

coordinates = st.floats(min_value=-0.99, max_value=0.99, allow_nan=False)
marks = st.floats(min_value=0.1, max_value=5.0, allow_nan=False)


@st.composite
def configurations(draw, max_atoms: int = 8) -> MarkedConfiguration:
    xs = draw(st.lists(coordinates, max_size=max_atoms, unique=True))
    ss = draw(st.lists(marks, min_size=len(xs), max_size=len(xs)))
    return MarkedConfiguration(np.array(xs).reshape(-1, 1), np.array(ss), 1)


class StepField:
    """Indicator-like test function: 1 left of zero, 4 right of it."""

    dimension = 1
    order = 0
    support = Window.from_bounds(-1.0, 1.0)

    def value(self, points):
        return np.where(np.asarray(points)[:, 0] < 0, 1.0, 4.0)


class TestConfigurations:
    """Test construction and validation."""

    def test_duplicate_points_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            MarkedConfiguration(np.array([[0.1], [0.1]]), np.array([1.0, 2.0]))

    def test_non_positive_marks_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            MarkedConfiguration(np.array([[0.1]]), np.array([0.0]))

    def test_atoms_are_sorted(self):
        omega = MarkedConfiguration(np.array([[0.5], [-0.5]]), np.array([2.0, 1.0]))
        assert omega.atoms() == [[-0.5, 1.0], [0.5, 2.0]]

    def test_json_line_round_trip(self, omega):
        assert MarkedConfiguration.from_json_line(omega.to_json_line(), 1) == omega

    def test_vector_marks_json_round_trip(self):
        omega = MarkedConfiguration(np.array([[0.1], [0.2]]), np.array([[0.3, -1.0], [0.5, 2.0]]))
        assert MarkedConfiguration.from_json_line(omega.to_json_line(), 1) == omega

    def test_csv_has_header(self, omega):
        lines = omega.to_csv().splitlines()
        assert lines[0] == "x_1,mark"
        assert len(lines) == 4


class TestPair:
    """Test ⟨ω, f⟩ in both weightings."""

    def test_marked_and_unmarked(self):
        omega = MarkedConfiguration(np.array([[-0.5], [0.5]]), np.array([2.0, 0.5]))
        f = StepField()
        assert pair(omega, f, "marked") == 4.0
        assert pair(omega, f, "unmarked") == 5.0

    def test_empty_configuration(self):
        empty = MarkedConfiguration.empty(1)
        assert pair(empty, StepField(), "marked") == 0.0
        assert pair(empty, StepField(), "unmarked") == 0.0

    def test_ensemble_matches_single_configurations(self, omega):
        other = MarkedConfiguration(np.array([[0.4]]), np.array([1.5]))
        batch = Ensemble.from_configurations([omega, MarkedConfiguration.empty(1), other])
        bump = ProductBump([0.0], 0.5)
        values = pair(batch, bump)
        assert values == pytest.approx([pair(omega, bump), 0.0, pair(other, bump)])

    @pytest.mark.parametrize("weighting", ["marked", "unmarked"])
    def test_linear_in_the_field(self, omega, weighting):
        f, g = ProductBump([0.0], 0.5), ProductBump([0.2], 0.4)
        combined = FieldSum([(2.0, f), (-0.5, g)])
        expected = 2.0 * pair(omega, f, weighting) - 0.5 * pair(omega, g, weighting)
        assert pair(omega, combined, weighting) == pytest.approx(expected, abs=1e-12)

    def test_marked_test_function(self):
        omega = MarkedConfiguration(np.array([[0.0]]), np.array([[0.5, 1.0]]))
        f = MarkedTestFunction(ProductBump([0.0], 0.5), [2.0, 1.0], 0.5)
        bump_at_zero = ProductBump([0.0], 0.5).value(np.zeros((1, 1)))[0]
        assert pair_marked_function(omega, f) == pytest.approx(bump_at_zero * 2.5)


class TestSigmaMap:
    """Test Σ between X × R₊ and compound configurations."""

    def test_relabels_last_coordinate(self):
        gamma_hat = SimpleConfiguration(np.array([[0.1, 1.5], [0.7, 2.0]]))
        omega = sigma_map(gamma_hat)
        assert omega.atoms() == [[0.1, 1.5], [0.7, 2.0]]

    def test_coinciding_positions_rejected(self):
        gamma_hat = SimpleConfiguration(np.array([[0.1, 1.5], [0.1, 2.0]]))
        with pytest.raises(InvalidConfigurationError):
            sigma_map(gamma_hat)

    def test_empty(self):
        assert len(sigma_map(SimpleConfiguration(np.zeros((0, 2))))) == 0

    @settings(max_examples=50, deadline=None)
    @given(configurations())
    def test_round_trip(self, omega):
        assert sigma_map(sigma_map_inverse(omega)) == omega


class TestRestrictAndCount:
    """Test p_Λ and N_Λ."""

    def test_full_and_disjoint_windows(self, omega, domain):
        assert restrict(omega, domain) == omega
        assert len(restrict(omega, Window.from_bounds(2.0, 3.0))) == 0
        assert count(omega, domain) == 3

    def test_empty_count(self, domain):
        assert count(MarkedConfiguration.empty(1), domain) == 0

    @settings(max_examples=50, deadline=None)
    @given(configurations(), st.floats(min_value=-0.9, max_value=0.9))
    def test_count_is_additive_over_a_partition(self, omega, cut):
        domain = Window.from_bounds(-1.0, 1.0)
        left, right = domain.split(at=cut)
        inside = count(omega, left) + count(omega, right)
        on_cut = int(np.sum(omega.points[:, 0] == cut))
        assert inside + on_cut == count(omega, domain)

    @settings(max_examples=50, deadline=None)
    @given(configurations())
    def test_nested_restrictions_are_consistent(self, omega):
        outer = Window.from_bounds(-0.8, 0.8)
        inner = Window.from_bounds(-0.3, 0.5)
        assert restrict(restrict(omega, outer), inner) == restrict(omega, inner)

    def test_restrict_keeps_ensemble_size(self, omega):
        batch = Ensemble.replicate(omega, 4)
        kept = restrict(batch, Window.from_bounds(-0.1, 0.1))
        assert kept.size == 4
        assert kept.counts().tolist() == [1, 1, 1, 1]


class TestPushforward:
    """Test φ*ω."""

    def test_zero_time_and_far_atoms_unchanged(self, fields):
        omega = MarkedConfiguration(np.array([[0.8], [-0.9]]), np.array([1.0, 2.0]))
        assert pushforward(omega, fields[0], 0.0) == omega
        assert pushforward(omega, fields[0], 0.4) == omega

    def test_marks_are_carried(self, omega, fields):
        moved = pushforward(omega, fields[0], 0.2)
        assert sorted(moved.marks.tolist()) == sorted(omega.marks.tolist())

    def test_pairing_identity(self, omega, fields, bumps):
        """⟨φ*ω, f⟩ = ⟨ω, f∘φ⟩."""
        v, f = fields[0], bumps[1]
        moved = pushforward(omega, v, 0.2)
        composed = np.sum(omega.marks * f.value(flow(v, 0.2, omega.points).endpoint))
        assert pair(moved, f) == pytest.approx(composed, abs=1e-7)


class TestEnsemble:
    """Test flat batches of configurations."""

    def test_configurations_round_trip(self, omega):
        other = MarkedConfiguration(np.array([[0.4]]), np.array([1.5]))
        batch = Ensemble.from_configurations([omega, other])
        assert list(batch.configurations()) == [omega, other]
        assert batch.counts().tolist() == [3, 1]

    def test_concatenate_offsets_owners(self, omega):
        batch = Ensemble.concatenate([Ensemble.replicate(omega, 2), Ensemble.replicate(omega, 3)])
        assert batch.size == 5
        assert batch.counts().tolist() == [3] * 5
        assert batch.configuration(4) == omega
