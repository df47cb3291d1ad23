import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairbell.angles import (
    PI,
    axis_distance,
    canon_angle,
    canon_angle_array,
    degrees_from_radians,
    radians_from_degrees,
)

finite_angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@given(finite_angles)
def test_canon_lands_in_range(x):
    r = canon_angle(x)
    assert 0.0 <= r < PI


@given(finite_angles)
def test_canon_is_idempotent(x):
    r = canon_angle(x)
    assert canon_angle(r) == r


@given(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False))
def test_canon_has_period_pi(x):
    a = canon_angle(x)
    b = canon_angle(x + PI)
    # compare as axes: 0 and pi-epsilon are the same axis
    assert axis_distance(a, b) < 1e-9


def test_canon_tiny_negative_does_not_round_to_pi():
    r = canon_angle(-1e-20)
    assert 0.0 <= r < PI


def test_canon_array_matches_scalar():
    xs = np.array([-5.0, -1e-20, 0.0, 0.3, PI, PI + 0.25, 10.0])
    got = canon_angle_array(xs)
    want = np.array([canon_angle(float(x)) for x in xs])
    np.testing.assert_array_equal(got, want)
    assert np.all((got >= 0) & (got < PI))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        canon_angle(math.nan)
    with pytest.raises(ValueError):
        canon_angle(math.inf)


def test_degree_conversion_canonicalizes():
    assert radians_from_degrees(202.5) == pytest.approx(math.radians(22.5), abs=1e-12)
    assert degrees_from_radians(math.radians(202.5)) == pytest.approx(22.5, abs=1e-9)
    assert radians_from_degrees(180.0) == 0.0


def test_axis_distance_folds():
    assert axis_distance(0.0, PI - 0.01) == pytest.approx(0.01, abs=1e-12)
    assert axis_distance(0.1, 0.1 + PI / 2) == pytest.approx(PI / 2, abs=1e-12)
