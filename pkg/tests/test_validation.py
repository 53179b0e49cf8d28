import pytest

from validation import FULL_SCALE, QUICK_SCALE, CheckResult, Suite


@pytest.fixture
def suite():
    return Suite(seed=0, quick=True)


def test_quick_scale_is_smaller():
    assert QUICK_SCALE.runs < FULL_SCALE.runs
    assert QUICK_SCALE.path_samples < FULL_SCALE.path_samples
    assert FULL_SCALE.variance_samples >= 100_000


@pytest.mark.parametrize('name', ['recurrence', 'monotonicity', 'reduction_identity', 'scaling', 'invariance'])
def test_closed_form_checks_pass(suite, name):
    result = getattr(suite, name)()
    assert isinstance(result, CheckResult)
    assert result.passed, result.detail


def test_determinism_check_passes(suite):
    assert suite.determinism().passed


@pytest.mark.slow
def test_variance_anchor_is_exact(suite):
    anchor = suite.variance()[-1]
    assert anchor.name == "variance anchor lambda=1"
    assert anchor.passed


@pytest.mark.slow
def test_rate_checks_pass(suite):
    for result in suite.no_cumulation_rates() + suite.cumulation_rates():
        assert result.passed, result.detail


@pytest.mark.slow
def test_perturbed_damping_fails():
    perturbed = Suite(seed=0, quick=True, perturb_dsigma=1.5)
    results = perturbed.no_cumulation_rates() + [perturbed.x_divergence()]
    assert not any(result.passed for result in results)
    assert not perturbed.variance()[-1].passed


def test_invariance_compares_a_prefix_before_underflow(suite):
    result = suite.invariance(steps=5000)
    assert result.passed, result.detail
    assert not result.detail.startswith("5000 ")


@pytest.mark.slow
def test_random_walk_increment_is_gated_on_shape(suite):
    law = suite.random_walk()[-1]
    assert law.name == "chi-square increment lambda=1"
    assert law.passed, law.detail
    assert "KS D" in law.detail
