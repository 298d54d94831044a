"""Acceptance suite: every criterion at its stated tolerance, one line each."""
import pytest

from whitham_lab.harness import CRITERIA, default_config, run_acceptance

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def results():
    return {r.key: r for r in run_acceptance(default_config())}


@pytest.fixture
def check(results, capsys):
    def _check(key):
        r = results[key]
        line = r.line() + (f" ({r.detail.strip()})" if r.detail.strip() else "")
        with capsys.disabled():
            print(f"\n{line}  [{r.runtime:.1f}s]")
        assert r.passed, line
    return _check


def test_energy_conservation(check):
    check("C1")


def test_residual_order_n1_n2(check):
    check("C2")


def test_validity_law_slope(check):
    check("C3")


def test_dual_path_residuals(check):
    check("C4")


def test_hand_formula_oracles(check):
    check("C5")


def test_unmodulated_wavetrain_exact(check):
    check("C6")


def test_wavetrain_stability_structure(check):
    check("C7")


def test_hyperbolicity_preserved(check):
    check("C8")


def test_solver_self_convergence(check):
    check("C9")


def test_every_criterion_covered(results):
    assert sorted(results) == sorted(CRITERIA)
