import math

import numpy as np
import pytest

from ringpair import _kernels, verify

GH = "transfer: G = H P_xi X_tau - T_rho (relative)"


def test_fast_suite_passes():
    results = verify.run("fast")
    assert len(results) >= 20
    failed = [(r.name, r.residual, r.tolerance, r.error) for r in results if not r.passed]
    assert not failed
    report = verify.format_report(results)
    assert report.endswith(f"{len(results)}/{len(results)} invariants passed")


def test_registry_names_unique():
    names = [name for name, _ in verify.registry()]
    assert len(names) == len(set(names))
    assert any(full for _, full in verify.registry())


def test_seeded_runs_are_reproducible():
    a = verify.run("fast", names=[GH])
    b = verify.run("fast", names=[GH])
    assert a[0].residual == b[0].residual


@pytest.mark.parametrize("column", [1, 2])
def test_sign_error_in_off_diagonal_is_caught(monkeypatch, column):
    real = _kernels.transfer

    def broken(*args):
        out = real(*args).copy()
        out[..., column] *= -1
        return out

    monkeypatch.setattr(_kernels, "transfer", broken)
    (result,) = verify.run("fast", names=[GH])
    assert not result.passed
    assert result.residual > 1e-6


def test_exceptions_become_failures(monkeypatch):
    def boom(*args):
        raise FloatingPointError("injected")

    monkeypatch.setattr(_kernels, "transfer", boom)
    (result,) = verify.run("fast", names=[GH])
    assert not result.passed and math.isinf(result.residual)
    assert "injected" in result.error
    assert "[FloatingPointError: injected]" in verify.format_report([result])


def test_random_configs_are_in_range():
    configs = verify.random_configs(np.random.default_rng(1), 200)
    assert len(configs) == 200
    for c in configs:
        assert 0.0 <= c.signal.rho <= 0.99 and 0.5 <= c.idler.alpha <= 1.0
        assert 0.5 <= c.signal.T <= 2.0
        assert abs(c.r_a) <= 1e-3 and abs(c.r_b) <= 1e-3


def test_unknown_level():
    with pytest.raises(ValueError):
        verify.run("thorough")
