import math

import numpy as np
import pytest

from tslim.errors import NumericalError, ValidationError
from tslim.quadrature import (
    chunked_mode_sum,
    cumulative,
    legendre_nodes,
    refined_time_grid,
    simpson,
    spectral_sum,
)


class TestRefinedTimeGrid:
    def test_layout(self):
        nodes = refined_time_grid(10.0, n_quad=8, n_log=16)
        assert nodes[0] == 0.0
        assert nodes[1] == pytest.approx(1e-6)
        assert nodes[-1] == 10.0
        assert nodes.size == 1 + 16 + 2 * 8 + 1
        assert np.all(np.diff(nodes) > 0)

    def test_zero_horizon(self):
        np.testing.assert_array_equal(refined_time_grid(0.0), [0.0])

    def test_invalid(self):
        with pytest.raises(ValidationError, match="T: must be non-negative"):
            refined_time_grid(-1.0)
        with pytest.raises(ValidationError, match="n_quad"):
            refined_time_grid(1.0, n_quad=0)


class TestSimpson:
    def test_exponential_on_refined_grid(self):
        nodes = refined_time_grid(5.0, n_quad=256)
        value = simpson(np.exp(-2.0 * nodes), nodes)
        assert value == pytest.approx(-math.expm1(-10.0) / 2.0, rel=1e-7)

    def test_non_finite_values(self):
        nodes = np.linspace(0.0, 1.0, 5)
        values = np.ones(5)
        values[3] = np.inf
        with pytest.raises(NumericalError, match="node 3"):
            simpson(values, nodes)

    def test_single_node(self):
        assert simpson([1.0], [0.0]) == 0.0

    def test_cumulative_matches_simpson(self):
        nodes = np.linspace(0.0, 2.0, 401)
        values = np.cos(nodes)
        running = cumulative(values, nodes)
        assert running[0] == 0.0
        np.testing.assert_allclose(running, np.sin(nodes), atol=1e-9)

    def test_cumulative_two_nodes(self):
        np.testing.assert_allclose(cumulative([1.0, 3.0], [0.0, 2.0]), [0.0, 4.0])


class TestLegendreNodes:
    def test_polynomial_exactness(self):
        nodes, weights = legendre_nodes(8)
        assert np.sum(weights * nodes**14) == pytest.approx(2.0 / 15.0, rel=1e-13)

    def test_read_only_and_cached(self):
        nodes, _ = legendre_nodes(16)
        assert legendre_nodes(16)[0] is nodes
        with pytest.raises(ValueError):
            nodes[0] = 0.0


class TestSums:
    def test_spectral_sum_is_exactly_rounded(self):
        terms = [1e16, 1.0, -1e16] * 1000
        assert spectral_sum(terms) == 1000.0

    def test_chunked_mode_sum_ignores_chunking(self, rng):
        rates = rng.uniform(0.1, 2.0, size=50)
        times = np.linspace(0.0, 3.0, 37)

        def term(t):
            return np.exp(-rates * t)

        expected = chunked_mode_sum(times, term, chunk=len(times))
        np.testing.assert_allclose(
            chunked_mode_sum(times, term, chunk=5), expected, rtol=1e-14
        )
        np.testing.assert_allclose(
            expected, np.exp(-np.outer(times, rates)).sum(axis=1), rtol=1e-13
        )
