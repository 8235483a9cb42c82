import numpy as np
import pytest

from nilmws.geometry import count_self_intersections, shoelace
from oracles import brute_force_crossings


def test_unit_square_area_and_orientation():
    x = [0, 1, 1, 0]
    y = [0, 0, 1, 1]
    assert shoelace(x, y) == 1.0
    assert shoelace(x[::-1], y[::-1]) == -1.0


def test_degenerate_polygons():
    assert shoelace([0, 1], [0, 1]) == 0.0
    assert count_self_intersections([0, 1, 2], [0, 1, 0]) == 0


def test_figure_eight_has_one_crossing():
    t = 2 * np.pi * np.arange(256) / 256
    assert count_self_intersections(np.sin(t), np.sin(2 * t)) == 1


def test_retraced_line_has_no_crossings():
    t = 2 * np.pi * np.arange(256) / 256
    v = np.sin(t)
    assert count_self_intersections(v, 0.1 * v) == 0


def test_bow_tie():
    assert count_self_intersections([0, 1, 1, 0], [0, 1, 0, 1]) == 1


def test_crossing_through_a_shared_vertex_counts_once():
    # two strokes of an X meeting exactly at vertex (1, 1)
    x = [0, 1, 2, 2, 1, 0]
    y = [0, 1, 2, 0, 1, 2]
    assert count_self_intersections(x, y) == brute_force_crossings(np.array(x) + [0, 1e-3, 0, 0, 0, 0], y) == 1


def test_touching_vertex_is_not_a_crossing():
    # the polygon touches (1, 1) twice from the same side
    x = [0, 1, 2, 3, 1, -1]
    y = [0, 1, 0, 2, 1, 2]
    assert count_self_intersections(x, y) == 0


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force_on_lissajous(seed):
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(256) / 256
    v = np.sin(t)
    i = sum(rng.normal() * np.sin(k * t + rng.uniform(0, 2 * np.pi)) for k in range(1, 6))
    assert count_self_intersections(v, i) == brute_force_crossings(v, i)
