import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augconjoint.errors import DataValidationError, NumericalError
from augconjoint.metrics import ErrorCurve, MetricsReport, data_savings, l2_error, mape, mse


def test_mape_examples():
    assert mape([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mape([1.1, 1.8], [1.0, 2.0], epsilon=0.0) == pytest.approx(10.0)
    assert mape([0.05, 1.0], [0.0, 1.0], epsilon=0.1) == pytest.approx(25.0)


def test_mape_errors():
    with pytest.raises(DataValidationError):
        mape([1.0], [1.0, 2.0])
    with pytest.raises(DataValidationError):
        mape([1.0, 1.0], [0.0, 1.0], epsilon=0.0)
    with pytest.raises(DataValidationError):
        mape([1.0], [1.0], epsilon=-1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=5), st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_mape_scale_invariant(star, c, seed):
    star = np.array(star) * np.random.default_rng(seed).choice([-1, 1], size=len(star))
    hat = star + np.random.default_rng(seed).normal(size=len(star))
    assert mape(c * hat, c * star, 0.0) == pytest.approx(mape(hat, star, 0.0), rel=1e-9)


def test_mse_and_l2():
    assert mse([1.0, 3.0], [0.0, 1.0]) == pytest.approx(2.5)
    assert l2_error([3.0, 4.0], [0.0, 0.0]) == pytest.approx(5.0)


def test_metrics_report():
    rep = MetricsReport.compute([1.1, 1.8], [1.0, 2.0], 0.0)
    np.testing.assert_allclose(rep.per_feature_ape, [10.0, 10.0])
    assert rep.mape == pytest.approx(10.0) and rep.mse == pytest.approx(0.025)


def _root_curve(c=3.0):
    sizes = np.array([25, 50, 100, 200, 400, 800])
    return ErrorCurve(sizes, c / np.sqrt(sizes))


def test_savings_inverse_root_curve():
    entry = data_savings(3.0 / np.sqrt(200), _root_curve(), 50)
    assert entry.n2 == pytest.approx(200.0, rel=1e-12)
    assert entry.percent == pytest.approx(75.0, abs=1e-9)
    assert not entry.extrapolated


def test_savings_between_grid_points_is_exact_for_power_laws():
    entry = data_savings(3.0 / np.sqrt(300), _root_curve(), 60)
    assert entry.n2 == pytest.approx(300.0, rel=1e-12)
    assert entry.percent == pytest.approx(80.0, abs=1e-9)


def test_no_savings_when_errors_match():
    curve = _root_curve()
    assert data_savings(3.0 / np.sqrt(100), curve, 100).percent == pytest.approx(0.0, abs=1e-9)


def test_savings_invariant_to_point_order():
    pts = list(zip(_root_curve().sizes, _root_curve().errors))
    a = data_savings(0.2, ErrorCurve.from_points(pts), 40)
    b = data_savings(0.2, ErrorCurve.from_points(pts[::-1]), 40)
    assert a == b


def test_extrapolation_flag_and_refusal():
    curve = _root_curve()
    with pytest.raises(NumericalError):
        data_savings(3.0 / np.sqrt(3200), curve, 50)
    entry = data_savings(3.0 / np.sqrt(3200), curve, 50, extrapolate=True)
    assert entry.extrapolated and entry.n2 == pytest.approx(3200.0, rel=1e-9)
    assert entry.percent < 100


def test_isotonic_smoothing_of_noisy_curve():
    curve = ErrorCurve([10, 20, 40, 80], [1.0, 0.6, 0.7, 0.3])
    np.testing.assert_allclose(curve.smoothed(), [1.0, 0.65, 0.65, 0.3])
    assert np.all(np.diff(curve.smoothed()) <= 0)


def test_curve_validation():
    with pytest.raises(DataValidationError):
        ErrorCurve([10, 10], [1.0, 0.5])
    with pytest.raises(DataValidationError):
        ErrorCurve([10], [1.0])
    with pytest.raises(DataValidationError):
        ErrorCurve([10, 20], [1.0, np.nan])
    with pytest.raises(DataValidationError):
        data_savings(0.5, _root_curve(), 0)
