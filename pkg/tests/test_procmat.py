import math

import numpy as np
import pytest

from icokd.dco import probe_attack_as_joint
from icokd.procmat import (
    BELL_FAMILY,
    KEPT_PAIRS,
    MEAS,
    PARTIES,
    SWAP,
    JointKrausAttack,
    choi,
    closed_form_probability,
    complete_with_complement,
    eavesdropper_information,
    f_vector,
    haar_ket,
    joint_distribution,
    outcome_table,
    p_detect_process,
    random_family_attack,
    random_kraus,
    recover,
    switch_process_vector,
    targeted_counterexample,
    theorem1_project,
    theorem1_verify,
    validate_process,
)
from icokd.qmath import KET0, KET1, KETP, OUTCOMES, Basis, DenseOperator, Outcome, projector
from icokd.switch import SwitchSpec, identity_instrument, measurement_instrument, switch_branches

import oracles

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def channel(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return m / np.trace(m)


# --- Choi operators --------------------------------------------------------


def test_choi_identity():
    m = choi([np.eye(2)]).matrix.entries
    v = np.eye(2).reshape(-1)
    assert np.abs(m - np.outer(v, v)).max() < 1e-15
    assert abs(np.trace(m) - 2) < 1e-15


def test_choi_depolarising():
    paulis = [np.eye(2), SX, SY, SZ]
    m = choi([p / 2 for p in paulis]).matrix.entries
    assert np.abs(m - np.eye(4) / 2).max() < 1e-15


def test_choi_of_measurement_element():
    a0 = MEAS[Outcome.ZERO]
    cj = choi([a0])
    v = a0.conj().reshape(-1)
    assert np.abs(cj.matrix.entries - np.outer(v, v.conj()).T).max() < 1e-15
    assert abs(np.trace(cj.matrix.entries) - 0.5) < 1e-15
    rho = random_density(np.random.default_rng(0), 2)
    assert np.abs(recover(cj, rho).entries - a0 @ rho @ a0).max() < 1e-14


def test_choi_round_trip():
    rng = np.random.default_rng(1)
    for d_in, d_out in ((2, 2), (2, 3), (3, 2), (4, 4)):
        for _ in range(5):
            ks = random_kraus(d_in, d_out, rng)
            cj = choi(ks)
            assert cj.is_cptp()
            for _ in range(20):
                rho = random_density(rng, d_in)
                assert np.abs(recover(cj, rho).entries - channel(ks, rho)).max() < 1e-10


def test_non_trace_preserving_detected():
    cj = choi([MEAS[Outcome.ZERO]])
    assert cj.is_psd() and not cj.is_cptp()


# --- process vector ----------------------------------------------------------


def test_process_vector_norm():
    w = switch_process_vector(np.array([0.6, 0.8]))
    # four unnormalised wire links of norm sqrt(2) each
    assert abs(w.norm - 4) < 1e-12


def test_process_vector_reproduces_switch():
    rng = np.random.default_rng(2)
    for _ in range(3):
        psi = haar_ket(rng)
        w = switch_process_vector(psi)
        meas = measurement_instrument()
        # the process vector's |0> branch visits Y first, which is the
        # switch module's |0> branch for the party list (A, E, B, Y)
        spec = SwitchSpec((meas, identity_instrument(), meas, identity_instrument()),
                          projector(KETP), projector(psi))
        branches = switch_branches(spec)
        for (a, e, b, y), op in branches.items():
            amp = w.contract({"Y": np.eye(2), "B": MEAS[b], "E": np.eye(2), "A": MEAS[a]})
            assert np.abs(np.outer(amp.reshape(-1), amp.reshape(-1).conj()) - op.entries).max() < 1e-10


def test_f_vector_is_scaled_contraction():
    rng = np.random.default_rng(3)
    psi = haar_ket(rng)
    w = switch_process_vector(psi)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for i, j in KEPT_PAIRS:
        f = f_vector(g, i, j, psi)
        c = w.contract_joint(MEAS[i], MEAS[j], g).reshape(-1)
        assert np.abs(f - math.sqrt(2) * c).max() < 1e-12


def test_joint_contraction_matches_product_operators():
    rng = np.random.default_rng(4)
    psi = haar_ket(rng)
    w = switch_process_vector(psi)
    e = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    y = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a, b = MEAS[Outcome.PLUS], MEAS[Outcome.ZERO]
    got = w.contract_joint(a, b, np.kron(e, y))
    want = w.contract({"Y": y, "B": b, "E": e, "A": a})
    assert np.abs(got - want).max() < 1e-12


def test_process_validity():
    w = switch_process_vector(np.array([0.6, 0.8j]))
    r = validate_process(w, trials=5)
    assert r.valid and r.worst_normalisation_deviation < 1e-10
    zero = DenseOperator(np.zeros((4, 4)), (2, 2))
    assert not validate_process(zero, [(2, 2)], trials=3).valid


def test_sequential_comb_is_valid():
    # A's output wired to B's input by an identity channel, rho into A, B's output traced
    rho = random_density(np.random.default_rng(5), 2)
    link = np.eye(2).reshape(-1)
    w = np.kron(np.kron(rho.T, np.outer(link, link)), np.eye(2))
    r = validate_process(DenseOperator(w, (2,) * 4), [(2, 2), (2, 2)], trials=20)
    assert r.valid, r
    assert r.min_eigenvalue > -1e-12


# --- joint attacks -------------------------------------------------------------


def test_f_vector_identity_is_switch():
    psi = np.array([0.6, 0.8j])
    for i, j in KEPT_PAIRS:
        f = f_vector(np.eye(4), i, j, psi).reshape(2, 2)
        a, b = MEAS[i], MEAS[j]
        assert np.abs(f[:, 0] - a @ b @ psi).max() < 1e-14
        assert np.abs(f[:, 1] - b @ a @ psi).max() < 1e-14


def test_f_vector_zz_has_no_minus():
    rng = np.random.default_rng(6)
    km = (KET0 - KET1) / math.sqrt(2)
    for _ in range(5):
        psi = haar_ket(rng)
        for i, j in KEPT_PAIRS:
            f = f_vector(np.kron(SZ, SZ), i, j, psi).reshape(2, 2)
            assert np.abs(f @ km).max() < 1e-14


def test_f_vector_vs_term_by_term_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        psi = haar_ket(rng)
        for i, j in KEPT_PAIRS:
            a0, a1 = oracles.joint_amplitudes(z, i.value, j.value, psi)
            f = f_vector(z, i, j, psi).reshape(2, 2)
            assert np.abs(f[:, 0] - a0).max() < 1e-12
            assert np.abs(f[:, 1] - a1).max() < 1e-12


def test_sigma_x_attack_detected():
    psi = np.array([1, 2]) / math.sqrt(5)
    z = np.kron(SX, np.eye(2))
    d = p_detect_process([z], psi)
    assert d > 0
    assert abs(d - oracles.p_minus_joint_oracle([z], psi)) < 1e-12


def test_p_detect_process_identity():
    assert p_detect_process(JointKrausAttack.identity(), haar_ket(np.random.default_rng(8))) < 1e-15


def test_family_members_undetected():
    rng = np.random.default_rng(9)
    for _ in range(20):
        att = random_family_attack(rng)
        assert att.completeness_deviation() < 1e-10
        for psi in (haar_ket(rng), KET0, KET1):
            assert p_detect_process(att, psi) < 1e-10


def test_theorem1_project_examples():
    r, res = theorem1_project(np.kron(SY, SY))
    assert np.abs(r - [0, 0, 1, 0]).max() < 1e-15 and res < 1e-15
    r, res = theorem1_project(np.kron(SX, SZ))
    assert np.abs(r).max() < 1e-15 and abs(res - 2) < 1e-14


def test_theorem1_project_abcd_map():
    # family operators have the |00>,|11> block [[a, d], [d, a']] and |01>,|10> block
    rng = np.random.default_rng(10)
    r = rng.normal(size=4) + 1j * rng.normal(size=4)
    z = sum(c * s for c, s in zip(r, BELL_FAMILY))
    a, c = z[0, 0], z[1, 1]
    b, d = z[1, 2], z[0, 3]
    want = np.array([a + c, d + b, d - b, a - c]) / 2
    want[2] *= -1  # sigma_y (x) sigma_y carries a minus sign on |00><11|
    got, res = theorem1_project(z)
    assert res < 1e-12
    assert np.abs(got - want).max() < 1e-12


def test_targeted_counterexample():
    z = targeted_counterexample()
    d = p_detect_process([z], np.array([0.6, 0.8]))
    assert d > 0
    assert abs(d - oracles.p_minus_joint_oracle([z], np.array([0.6, 0.8]))) < 1e-12


def test_complete_with_complement():
    rng = np.random.default_rng(11)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    att = complete_with_complement(0.9 * g / np.linalg.norm(g, 2))
    assert att.completeness_deviation() < 1e-10
    with pytest.raises(ValueError):
        complete_with_complement(2 * np.eye(4))


def test_incomplete_attack_rejected():
    with pytest.raises(ValueError):
        JointKrausAttack((0.5 * np.eye(4),))


def test_theorem1_small_run():
    rep = theorem1_verify(trials=30, seed=1)
    assert rep.passed
    assert rep.family_max_p_minus < 1e-9
    assert rep.nonfamily_min_p_minus > 0 and rep.nonfamily_min_residual > 0.1


def test_theorem1_worker_independent():
    a = theorem1_verify(trials=8, seed=2, workers=1).as_dict()
    b = theorem1_verify(trials=8, seed=2, workers=4).as_dict()
    assert a == b


# --- joint distribution ----------------------------------------------------------


def test_joint_distribution_identity():
    psi = np.array([0.6, 0.8])
    jd = joint_distribution(np.array([[1, 0, 0, 0]]), psi)
    for (x, i, j), p in jd.table.items():
        want = abs(np.vdot(i.ket, psi)) ** 2 / 2 if i == j else 0.0
        assert abs(p - want) < 1e-12
    assert abs(sum(jd.table.values()) - 1) < 1e-12


def test_joint_distribution_xx():
    psi = np.array([0.6, 0.8])
    r = [0, 1, 0, 0]
    for i, j in KEPT_PAIRS:
        p = closed_form_probability(r, i, j, psi)
        if i.basis is Basis.Z:
            assert (p > 0) == (i != j)
        else:
            assert (p > 0) == (i == j)


def test_joint_distribution_vs_f_vectors_and_zero_information():
    rng = np.random.default_rng(12)
    for _ in range(20):
        att = random_family_attack(rng)
        jd = joint_distribution(att, haar_ket(rng))
        assert abs(sum(jd.table.values()) - 1) < 1e-10
        info = eavesdropper_information(jd)
        for basis in Basis:
            assert abs(info[basis]["mi"]) < 1e-12
            assert info[basis]["tv"] < 1e-10


def test_joint_distribution_rejects_nonfamily():
    rng = np.random.default_rng(13)
    g = rng.normal(size=(4, 4))
    att = complete_with_complement(0.9 * g / np.linalg.norm(g, 2))
    with pytest.raises(ValueError):
        joint_distribution(att, np.array([0.6, 0.8]))


def test_outcome_table_identity_matches_switch():
    t = outcome_table(JointKrausAttack.identity())
    assert abs(t.sum() - 1) < 1e-12
    for a, i in enumerate(OUTCOMES):
        for b, j in enumerate(OUTCOMES):
            want = 1 / 8 if i == j else (1 / 16 if i.basis is not j.basis else 0.0)
            assert abs(t[a, b].sum() - want) < 1e-12
            if i.basis is j.basis:
                assert t[a, b, 1] < 1e-15


def test_probe_attack_detected_in_switch():
    att = probe_attack_as_joint()
    assert p_detect_process(att, np.array([0.6, 0.8])) > 0
    assert p_detect_process(att, KET0) > 0


def test_parties_order():
    assert PARTIES == ("Y", "B", "E", "A")
    assert np.abs(SWAP @ SWAP - np.eye(4)).max() == 0
