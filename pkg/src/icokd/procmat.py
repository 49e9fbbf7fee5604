"""Choi operators, process matrices and joint eavesdropper attacks on the switch.

Wire layout of the switch process vector (one qubit per axis):

    (Y_I, Y_O, B_I, B_O, E_I, E_O, A_I, A_O, C_t, C_c)

On the control ``|0>`` branch the target visits Y, B, E, A in that order;
on ``|1>`` it visits A, E, B, Y. Wires between consecutive parties are
unnormalised ``|1>> = sum_n |n>|n>`` links, so the vector has norm 4 and
contracting it with any trace-preserving local operations gives total
probability 1.

A joint eavesdropper operation ``Z`` is a 4x4 matrix on (E wire) (x)
(Y wire). Undetectable operations are exactly the span of
``sigma_mu (x) sigma_mu``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qmath import (
    KET0,
    KET1,
    KETM,
    OUTCOMES,
    PAULIS,
    Basis,
    DenseOperator,
    Outcome,
    WiringError,
    mutual_information,
    partial_trace,
    policy,
)

SQRT2 = math.sqrt(2.0)
AXES = ("Y_I", "Y_O", "B_I", "B_O", "E_I", "E_O", "A_I", "A_O", "C_t", "C_c")
PARTIES = ("Y", "B", "E", "A")
# swaps the two qubits of a 4x4 operator
SWAP = np.eye(4)[[0, 2, 1, 3]]
BELL_FAMILY = tuple(np.kron(p.entries, p.entries) for p in PAULIS)
KEPT_PAIRS = tuple((i, j) for i in OUTCOMES for j in OUTCOMES if i.basis is j.basis)
ALL_PAIRS = tuple((i, j) for i in OUTCOMES for j in OUTCOMES)


def _proj(o: Outcome) -> np.ndarray:
    return np.outer(o.ket, o.ket.conj()) / SQRT2


MEAS = {o: _proj(o) for o in OUTCOMES}


# ---------------------------------------------------------------------------
# Choi operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CJOperator:
    """Choi operator ``M = sum_k |K_k>><<K_k|`` on input (x) output.

    ``|K>> = (1 (x) K)|1>>`` so entry ``(i, o)`` of ``|K>>`` is ``K[o, i]``.
    """

    matrix: DenseOperator
    in_dim: int
    out_dim: int

    def is_psd(self) -> bool:
        return self.matrix.is_psd()

    def trace_preservation_deviation(self) -> float:
        red = partial_trace(self.matrix, [0]).entries
        return float(np.abs(red - np.eye(self.in_dim)).max())

    def is_cptp(self) -> bool:
        return self.is_psd() and self.trace_preservation_deviation() <= policy.atol

    def apply(self, rho: np.ndarray | DenseOperator) -> DenseOperator:
        return recover(self, rho)


def choi(kraus: Sequence[DenseOperator | np.ndarray]) -> CJOperator:
    """Choi operator of the map ``rho -> sum_k K_k rho K_k^dag``."""
    ks = [np.asarray(k.entries if isinstance(k, DenseOperator) else k, dtype=complex) for k in kraus]
    d_out, d_in = ks[0].shape
    for k in ks:
        if k.shape != (d_out, d_in):
            raise WiringError(f"Kraus shapes differ: {k.shape} vs {(d_out, d_in)}")
    m = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in ks:
        v = k.T.reshape(-1)
        m += np.outer(v, v.conj())
    return CJOperator(DenseOperator(m, (d_in, d_out)), d_in, d_out)


def recover(cj: CJOperator, rho: np.ndarray | DenseOperator) -> DenseOperator:
    """Channel action from its Choi operator: ``Tr_in[(rho^T (x) 1) M]``."""
    r = np.asarray(rho.entries if isinstance(rho, DenseOperator) else rho, dtype=complex)
    if r.shape != (cj.in_dim, cj.in_dim):
        raise WiringError(f"state shape {r.shape} does not match input dim {cj.in_dim}")
    m = cj.matrix.entries.reshape(cj.in_dim, cj.out_dim, cj.in_dim, cj.out_dim)
    return DenseOperator(np.einsum("ij,iajb->ab", r, m), (cj.out_dim,))


def random_kraus(d_in: int, d_out: int, rng: np.random.Generator, n_kraus: int | None = None) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map from a Haar-like isometry."""
    k = n_kraus or max(2, -(-d_in // d_out))
    if k * d_out < d_in:
        raise ValueError("not enough Kraus operators for an isometry")
    g = rng.normal(size=(k * d_out, d_in)) + 1j * rng.normal(size=(k * d_out, d_in))
    q, _ = np.linalg.qr(g)
    return [q[a * d_out:(a + 1) * d_out] for a in range(k)]


# ---------------------------------------------------------------------------
# process matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProcessVector:
    """Pure switch process ``|w_psi>`` as a rank-10 tensor of qubit axes."""

    vector: np.ndarray
    psi: np.ndarray
    axes: tuple[str, ...] = AXES

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def wires(self) -> list[tuple[int, int]]:
        """Per-party ``(d_in, d_out)``; the final party holds ``C_t C_c``."""
        return [(2, 2)] * 4 + [(4, 1)]

    def dense(self) -> DenseOperator:
        v = self.vector.reshape(-1)
        return DenseOperator(np.outer(v, v.conj()), (2,) * 10)

    def contract(self, ops: Mapping[str, np.ndarray]) -> np.ndarray:
        """Amplitude on ``(C_t, C_c)`` after each party applies one Kraus operator."""
        y, b, e, a = (np.asarray(ops[p]) for p in PARTIES)
        return np.einsum("yobpefagtc,oy,pb,fe,ga->tc", self.vector, y, b, e, a)

    def contract_joint(self, alice: np.ndarray, bob: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Amplitude with a joint 4x4 operator ``z`` on (E wire) (x) (Y wire)."""
        zt = np.asarray(z).reshape(2, 2, 2, 2)  # [E_O, Y_O, E_I, Y_I]
        return np.einsum("yobpefagtc,ga,pb,foey->tc", self.vector, alice, bob, zt)


def switch_process_vector(psi: np.ndarray) -> ProcessVector:
    """Pure process of the four-party switch fed with ``|psi>`` and control ``|+>``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    d = np.eye(2)
    w0 = np.einsum("y,ob,pe,fa,gt,c->yobpefagtc", psi, d, d, d, d, KET0)
    w1 = np.einsum("a,ge,fb,py,ot,c->yobpefagtc", psi, d, d, d, d, KET1)
    return ProcessVector((w0 + w1) / SQRT2, psi)


@dataclass(frozen=True)
class ProcessValidity:
    """Diagnostics from :func:`validate_process`."""

    valid: bool
    min_eigenvalue: float
    worst_normalisation_deviation: float
    trials: int


def _party_choi_product(chois: Sequence[np.ndarray]) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for c in chois:
        m = np.kron(m, c)
    return m


def validate_process(w: DenseOperator | ProcessVector, wires: Sequence[tuple[int, int]] | None = None,
                     trials: int = 20, rng: np.random.Generator | None = None) -> ProcessValidity:
    """Check positivity and unit probability for random local CPTP maps.

    Parameters
    ----------
    w : DenseOperator or ProcessVector
        Dense process matrix with subsystems ordered ``in_1, out_1, in_2,
        out_2, ...``, or a pure process vector.
    wires : sequence of (d_in, d_out)
        One entry per party. Taken from the vector for a ProcessVector.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if isinstance(w, ProcessVector):
        wires = w.wires()
        min_eig = 0.0
    else:
        if wires is None:
            raise WiringError("wires are required for a dense process matrix")
        if math.prod(a * b for a, b in wires) != w.dim:
            raise WiringError(f"wires {list(wires)} do not match dimension {w.dim}")
        h = 0.5 * (w.entries + w.entries.conj().T)
        min_eig = float(np.linalg.eigvalsh(h).min()) if w.is_hermitian() else -math.inf
    worst = 0.0
    for _ in range(trials):
        kraus = [random_kraus(a, b, rng) for a, b in wires]
        if isinstance(w, ProcessVector):
            prob = 0.0
            for combo in itertools.product(*kraus[:4]):
                amp = w.contract(dict(zip(PARTIES, combo)))
                prob += float(np.sum(np.abs(amp) ** 2))
        else:
            m = _party_choi_product([choi(k).matrix.entries for k in kraus])
            prob = float(np.sum(m * w.entries).real)  # Tr[M^T W]
        worst = max(worst, abs(prob - 1.0))
    valid = min_eig >= -policy.atol and worst <= policy.derived
    return ProcessValidity(valid, min_eig, worst, trials)


# ---------------------------------------------------------------------------
# joint attacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointKrausAttack:
    """Joint Kraus operators ``Z_x`` of Eve and Yves on (E wire) (x) (Y wire)."""

    operators: tuple[np.ndarray, ...]
    labels: tuple = field(default=())

    def __post_init__(self):
        ops = tuple(np.array(z, dtype=complex) for z in self.operators)
        for z in ops:
            if z.shape != (4, 4):
                raise WiringError(f"joint operators must be 4x4, got {z.shape}")
            z.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", tuple(self.labels) or tuple(range(len(ops))))
        dev = self.completeness_deviation()
        if dev > policy.atol:
            raise ValueError(f"joint operators are not complete: deviation {dev:.3e}")

    def completeness_deviation(self) -> float:
        s = sum(z.conj().T @ z for z in self.operators)
        return float(np.abs(s - np.eye(4)).max())

    @classmethod
    def identity(cls) -> "JointKrausAttack":
        return cls((np.eye(4),))

    @classmethod
    def from_family(cls, r: np.ndarray) -> "JointKrausAttack":
        """Operators ``sum_mu r[x, mu] sigma_mu (x) sigma_mu`` for each row of ``r``."""
        return cls(tuple(family_operator(row) for row in np.atleast_2d(r)))


def family_operator(r: Sequence[complex]) -> np.ndarray:
    return sum(c * s for c, s in zip(r, BELL_FAMILY))


def f_vector(z: np.ndarray, i: Outcome, j: Outcome, psi: np.ndarray) -> np.ndarray:
    """Output ket on ``C_t (x) C_c`` for Alice outcome ``i`` and Bob outcome ``j``.

    Evaluates ``sum_n [(<n| (x) 1)(B_j (x) A_i) Z' |psi>|n>|0>
    + (1 (x) <n|) Z' (B_j (x) A_i)|n>|psi>|1>]`` where ``Z'`` is ``z`` with
    its two qubits swapped: in this expression the first slot of ``Z'`` is
    the Y wire. The result equals ``sqrt(2)`` times the process-vector
    contraction.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (4, 4):
        raise WiringError(f"joint operator must be 4x4, got {z.shape}")
    psi = np.asarray(psi, dtype=complex)
    zs = SWAP @ z @ SWAP
    ba = np.kron(MEAS[j], MEAS[i])
    eye = np.eye(2)
    out = np.zeros((2, 2), dtype=complex)
    for n in range(2):
        en = eye[n]
        out[:, 0] += np.kron(en, eye) @ ba @ zs @ np.kron(psi, en)
        out[:, 1] += np.kron(eye, en) @ zs @ ba @ np.kron(en, psi)
    return out.reshape(4)


def _minus_weight(f: np.ndarray) -> float:
    return float(np.sum(np.abs(f.reshape(2, 2) @ KETM.conj()) ** 2))


def p_detect_process(attack: JointKrausAttack | Sequence[np.ndarray], psi: np.ndarray) -> float:
    """Probability of control outcome ``-`` given Alice and Bob used the same basis."""
    ops = attack.operators if isinstance(attack, JointKrausAttack) else attack
    minus = total = 0.0
    for z in ops:
        for i, j in KEPT_PAIRS:
            f = f_vector(z, i, j, psi)
            minus += _minus_weight(f)
            total += float(np.vdot(f, f).real)
    return minus / total


def theorem1_project(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients on ``sigma_mu (x) sigma_mu`` and the residual Frobenius norm."""
    z = np.asarray(z, dtype=complex)
    r = np.array([np.trace(s.conj().T @ z) / 4 for s in BELL_FAMILY])
    return r, float(np.linalg.norm(z - family_operator(r)))


def random_family_attack(rng: np.random.Generator, n_ops: int = 4) -> JointKrausAttack:
    """Random complete family attack.

    Coefficients are complex Gaussians. Completeness is imposed by
    ``Z_x -> Z_x S^(-1/2)`` with ``S = sum_x Z_x^dag Z_x``; ``S`` is diagonal in
    the Bell basis, so the result stays in the family.
    """
    while True:
        r = rng.normal(size=(n_ops, 4)) + 1j * rng.normal(size=(n_ops, 4))
        zs = [family_operator(row) for row in r]
        s = sum(z.conj().T @ z for z in zs)
        w, v = np.linalg.eigh(s)
        if w.min() > 1e-6:
            break
    s_inv = (v / np.sqrt(w)) @ v.conj().T
    return JointKrausAttack(tuple(z @ s_inv for z in zs))


def complete_with_complement(z1: np.ndarray) -> JointKrausAttack:
    """Two-outcome attack ``{Z1, sqrt(1 - Z1^dag Z1)}``; requires ``||Z1|| <= 1``."""
    w, v = np.linalg.eigh(np.eye(4) - z1.conj().T @ z1)
    if w.min() < -policy.atol:
        raise ValueError("operator norm exceeds 1")
    z2 = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    return JointKrausAttack((z1, z2))


def haar_ket(rng: np.random.Generator, pole_gap: float = 0.0) -> np.ndarray:
    """Haar-random qubit ket with both amplitudes at least ``pole_gap`` in modulus."""
    while True:
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        if np.abs(v).min() >= pole_gap:
            return v


@dataclass(frozen=True)
class Theorem1Report:
    """Both directions of the undetectability characterisation."""

    trials: int
    family_max_p_minus: float
    family_max_p_minus_poles: float
    nonfamily_min_p_minus: float
    nonfamily_min_p_minus_poles: float
    nonfamily_min_residual: float
    nonfamily_mean_residual: float
    targeted_p_minus: float

    @property
    def passed(self) -> bool:
        return (self.family_max_p_minus < 1e-9 and self.family_max_p_minus_poles < 1e-9
                and self.nonfamily_min_p_minus > 0 and self.nonfamily_min_p_minus_poles > 0
                and self.targeted_p_minus > 0)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passed"] = self.passed
        return d


POLES = (KET0, KET1)


def _family_trial(seed: int, k: int) -> tuple[float, float]:
    rng = np.random.default_rng((seed, 0, k))
    att = random_family_attack(rng)
    psi = haar_ket(rng)
    return p_detect_process(att, psi), max(p_detect_process(att, p) for p in POLES)


def _nonfamily_trial(seed: int, k: int) -> tuple[float, float, float]:
    rng = np.random.default_rng((seed, 1, k))
    while True:
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        z1 = 0.9 * g / np.linalg.norm(g, 2)
        _, res = theorem1_project(z1)
        if res > 0.1:
            break
    att = complete_with_complement(z1)
    psi = haar_ket(rng, pole_gap=0.05)
    return p_detect_process(att, psi), min(p_detect_process(att, p) for p in POLES), res


def targeted_counterexample() -> np.ndarray:
    """Identity except ``<00|Z|01> = 1``: violates one zero constraint only."""
    z = np.eye(4, dtype=complex)
    z[0, 1] = 1.0
    return z


def theorem1_verify(trials: int = 1000, seed: int = 0, workers: int = 1) -> Theorem1Report:
    """Check that family attacks are never detected and others sometimes are.

    Each trial uses its own generator seeded by ``(seed, direction, trial)`` so
    the report does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    idx = range(trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fam = list(ex.map(lambda k: _family_trial(seed, k), idx))
            non = list(ex.map(lambda k: _nonfamily_trial(seed, k), idx))
    else:
        fam = [_family_trial(seed, k) for k in idx]
        non = [_nonfamily_trial(seed, k) for k in idx]
    fam_a = np.array(fam)
    non_a = np.array(non)
    zt = targeted_counterexample()
    targeted = p_detect_process([zt], np.array([0.6, 0.8], dtype=complex))
    return Theorem1Report(
        trials=trials,
        family_max_p_minus=float(fam_a[:, 0].max()),
        family_max_p_minus_poles=float(fam_a[:, 1].max()),
        nonfamily_min_p_minus=float(non_a[:, 0].min()),
        nonfamily_min_p_minus_poles=float(non_a[:, 1].min()),
        nonfamily_min_residual=float(non_a[:, 2].min()),
        nonfamily_mean_residual=float(non_a[:, 2].mean()),
        targeted_p_minus=float(targeted),
    )


# ---------------------------------------------------------------------------
# joint distribution for family attacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """``P(x, i, j)`` over same-basis outcome pairs.

    Attributes
    ----------
    table : dict
        ``(x, i, j) -> probability``, normalised to total 1.
    raw_total : float
        Total of ``<f|f>`` before normalisation. It is 1 when each ``Z_x`` is
        a multiple of a single ``sigma_mu (x) sigma_mu`` and can be smaller
        for coherent combinations.
    """

    table: dict
    raw_total: float
    n_ops: int

    def basis_table(self, basis: Basis) -> np.ndarray:
        """``P(x, alice key bit)`` for rounds of one basis, unnormalised."""
        t = np.zeros((self.n_ops, 2))
        for (x, i, _), p in self.table.items():
            if i.basis is basis:
                t[x, i.key_bit] += p
        return t


def closed_form_probability(r: Sequence[complex], i: Outcome, j: Outcome, psi: np.ndarray) -> float:
    amp = abs(np.vdot(i.ket, psi)) ** 2 / 2
    same = i == j
    if i.basis is Basis.Z:
        w = abs(r[0] + r[3]) ** 2 if same else abs(r[1] + r[2]) ** 2
    else:
        w = abs(r[0] + r[1]) ** 2 if same else abs(r[2] + r[3]) ** 2
    return float(amp * w)


def joint_distribution(attack: JointKrausAttack | np.ndarray, psi: np.ndarray) -> JointDistribution:
    """Closed-form ``P(x, i, j)`` for a family attack, checked against ``<f|f>``.

    Parameters
    ----------
    attack : JointKrausAttack or array of shape (n, 4)
        Family operators, or their coefficient rows.
    """
    if isinstance(attack, JointKrausAttack):
        rows = []
        for z in attack.operators:
            r, res = theorem1_project(z)
            if res > policy.atol:
                raise ValueError(f"operator lies outside the undetectable family (residual {res:.3e})")
            rows.append(r)
        r_all = np.array(rows)
    else:
        r_all = np.atleast_2d(np.asarray(attack, dtype=complex))
        JointKrausAttack.from_family(r_all)  # completeness check
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    table = {}
    for x, r in enumerate(r_all):
        z = family_operator(r)
        for i, j in KEPT_PAIRS:
            p = closed_form_probability(r, i, j, psi)
            f = f_vector(z, i, j, psi)
            ff = float(np.vdot(f, f).real)
            if abs(p - ff) > policy.derived:
                raise AssertionError(f"closed form {p} differs from <f|f> = {ff} at {(x, i, j)}")
            table[(x, i, j)] = p
    total = sum(table.values())
    return JointDistribution({k: v / total for k, v in table.items()}, total, len(r_all))


def eavesdropper_information(jd: JointDistribution) -> dict:
    """Eavesdropper/Alice information once the basis is public.

    Returns, per basis, the mutual information between the joint outcome
    ``x`` and Alice's key bit, and the total-variation distance between
    ``P(x | bit = 0)`` and ``P(x | bit = 1)``.
    """
    out = {}
    for basis in Basis:
        t = jd.basis_table(basis)
        col = t.sum(axis=0)
        if col.min() <= policy.null:
            tv = 0.0
        else:
            cond = t / col
            tv = 0.5 * float(np.abs(cond[:, 0] - cond[:, 1]).sum())
        out[basis] = {"mi": mutual_information(t) if t.sum() > 0 else 0.0, "tv": tv}
    return out


def outcome_table(attack: JointKrausAttack, rho_kets: Sequence[np.ndarray] = POLES) -> np.ndarray:
    """``P(alice, bob, control)`` for a joint attack with ``rho`` an even mixture of ``rho_kets``.

    Axes follow ``OUTCOMES`` for Alice and Bob and ``(+, -)`` for the control.
    The table is normalised by its total.
    """
    t = np.zeros((4, 4, 2))
    plus = (KET0 + KET1) / SQRT2
    for psi in rho_kets:
        for z in attack.operators:
            for a, i in enumerate(OUTCOMES):
                for b, j in enumerate(OUTCOMES):
                    f = f_vector(z, i, j, psi).reshape(2, 2)
                    t[a, b, 0] += float(np.sum(np.abs(f @ plus.conj()) ** 2))
                    t[a, b, 1] += float(np.sum(np.abs(f @ KETM.conj()) ** 2))
    return t / t.sum()
