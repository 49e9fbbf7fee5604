import numpy as np
import pytest

from icokd.dco import (
    ProbeStrategy,
    UsdPovm,
    build_usd,
    exact_rates,
    probe_attack_as_joint,
    probe_only,
    probe_update,
    round_distribution,
    run_two_way,
    usd_probe,
)
from icokd.procmat import p_detect_process
from icokd.qmath import KET0, KET1, KETP, SX, Basis, DenseOperator, identity, projector


def test_probe_update_examples():
    z0 = projector(KET0)
    assert probe_update(z0, Basis.Z).allclose(z0)
    assert probe_update(z0, Basis.X).allclose(identity(2) * 0.5)
    mixed = identity(2) * 0.5
    for b in Basis:
        assert probe_update(mixed, b).allclose(mixed)


def test_usd_construction():
    usd = build_usd(projector(KET0))
    assert usd.beta == 1.0
    assert abs(usd.p_conclusive_x - 0.25) < 1e-15
    assert abs(np.trace(usd.pi_x.entries @ usd.xi_z.entries)) < 1e-12
    assert np.abs(usd.pi_z.entries).max() == 0
    assert np.abs(usd.pi_x.entries - projector(KET1).entries).max() < 1e-15


def test_usd_suboptimal_beta():
    assert abs(build_usd(projector(KET0), beta=0.5).p_conclusive_x - 1 / 8) < 1e-15
    with pytest.raises(ValueError):
        build_usd(projector(KET0), beta=1.5)


def test_usd_other_pole():
    usd = build_usd(projector(KET1))
    assert np.abs(usd.pi_x.entries - projector(KET0).entries).max() < 1e-15


def test_usd_rejects_unreduced_probe():
    with pytest.raises(ValueError, match="reduce"):
        build_usd(projector(KETP))
    with pytest.raises(ValueError, match="reduce"):
        build_usd(DenseOperator(np.diag([0.7, 0.3])))


def test_usd_invariants_enforced():
    z = DenseOperator(np.zeros((2, 2)))
    with pytest.raises(AssertionError):
        # pi_x fires on the z-returned probe
        UsdPovm(z, projector(KET0), projector(KET1), 0.0, 1.0, projector(KET0), identity(2) * 0.5)


def test_strategy_validation():
    with pytest.raises(ValueError):
        ProbeStrategy(projector(KET0), {"a": projector(KET0)}, {"a": [identity(2)]})
    with pytest.raises(ValueError):
        ProbeStrategy(projector(KET0), {"a": identity(2)}, {"a": [identity(2) * 0.5]})
    with pytest.raises(ValueError):
        ProbeStrategy(projector(KET0), {"a": identity(2)}, {})


def test_round_distribution_normalised():
    for eve in (None, probe_only(), usd_probe()):
        dist = round_distribution(eve)
        assert abs(sum(p for _, p in dist) - 1) < 1e-12
        for r, _ in dist:
            assert r.alice_final_outcome.basis is r.alice_basis


def test_exact_rates_no_eve():
    r = exact_rates()
    assert r["p_error_same"] == 0.0
    assert abs(r["p_error_diff"] - 0.5) < 1e-12


def test_exact_rates_probe_only():
    r = exact_rates(probe_only())
    assert r["p_error_same"] == 0.0 and r["p_error_diff"] == 0.0


def test_exact_rates_usd_probe():
    r = exact_rates(usd_probe())
    assert r["p_error_same"] == 0.0
    assert abs(r["conclusive_rate"] - 0.25) < 1e-12
    # error only when Bob used x, Eve is sure of it, and Alice prepared in z
    assert abs(r["p_error_diff_joint"] - 1 / 8) < 1e-12
    assert abs(r["p_error_diff"] - 1 / 4) < 1e-12
    # flipping on a sure outcome costs at most p/2 of all rounds
    assert r["p_error_diff_joint"] <= r["conclusive_rate"] / 2 + 1e-12


def test_half_beta_halves_errors():
    usd = build_usd(projector(KET0), beta=0.5)
    eve = ProbeStrategy(projector(KET0), usd.elements, {"z": [identity(2)], "x": [SX], "?": [identity(2)]})
    r = exact_rates(eve)
    assert abs(r["p_error_diff"] - 1 / 8) < 1e-12
    assert abs(r["conclusive_rate"] - 1 / 8) < 1e-12


def test_monte_carlo_no_eve():
    r = run_two_way(100_000, seed=1)
    assert r["p_error_same"] == 0.0
    assert abs(r["p_error_diff"] - 0.5) < 0.01


def test_monte_carlo_probe_only():
    r = run_two_way(100_000, probe_only(), seed=2)
    assert r["p_error_same"] == 0.0 and r["p_error_diff"] == 0.0


def test_monte_carlo_usd():
    r = run_two_way(100_000, usd_probe(), seed=3)
    assert r["p_error_same"] == 0.0
    assert abs(r["conclusive_rate"] - 0.25) < 0.01
    assert abs(r["p_error_diff"] - 0.25) < 0.01
    assert abs(r["p_error_diff_joint"] - 0.125) < 0.01


def test_monte_carlo_reproducible():
    assert run_two_way(5_000, usd_probe(), seed=4) == run_two_way(5_000, usd_probe(), seed=4)
    with pytest.raises(ValueError):
        run_two_way(0)


def test_probe_attack_detected_in_switch():
    att = probe_attack_as_joint()
    assert p_detect_process(att, np.array([0.6, 0.8])) > 0
