"""Two-way key distribution in a definite causal order, and probe attacks on it.

Alice prepares a basis state in basis V and sends it to Bob, who measures in
basis W and returns the post-measurement state; Alice measures it again in V.
An *error* is a final outcome different from the prepared state. Without an
eavesdropper the error rate is 0 when V = W and 1/2 when V != W.

A probe attack keeps Alice's qubit, sends Bob a probe ``xi`` instead, measures
the returned probe with a POVM and then applies an outcome-dependent
operation to Alice's qubit before returning it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .procmat import JointKrausAttack
from .qmath import (
    KET0,
    KET1,
    SX,
    Basis,
    DenseOperator,
    Outcome,
    identity,
    mutual_information,
    policy,
    projector,
    require_state,
)

BASES = (Basis.Z, Basis.X)


def basis_outcomes(b: Basis) -> tuple[Outcome, Outcome]:
    return (Outcome.ZERO, Outcome.ONE) if b is Basis.Z else (Outcome.PLUS, Outcome.MINUS)


def _p(o: Outcome) -> np.ndarray:
    return np.outer(o.ket, o.ket.conj())


def probe_update(xi: DenseOperator, bob_basis: Basis) -> DenseOperator:
    """Bob's projective measurement, outcome forgotten: dephasing in his basis."""
    require_state(xi, "probe")
    m = sum(_p(o) @ xi.entries @ _p(o) for o in basis_outcomes(bob_basis))
    return DenseOperator(m)


@dataclass(frozen=True, eq=False)
class UsdPovm:
    """Unambiguous discrimination of Bob's basis from the returned probe."""

    pi_z: DenseOperator
    pi_x: DenseOperator
    pi_inconclusive: DenseOperator
    alpha: float
    beta: float
    xi_z: DenseOperator
    xi_x: DenseOperator

    def __post_init__(self):
        total = self.pi_z.entries + self.pi_x.entries + self.pi_inconclusive.entries
        if np.abs(total - np.eye(2)).max() > policy.atol:
            raise AssertionError("USD elements do not sum to identity")
        for name in ("pi_z", "pi_x", "pi_inconclusive"):
            if not getattr(self, name).is_psd():
                raise AssertionError(f"{name} is not positive semidefinite")
        if abs(np.trace(self.pi_x.entries @ self.xi_z.entries)) > 1e-12:
            raise AssertionError("pi_x fires on the z-returned probe")
        if abs(np.trace(self.pi_z.entries @ self.xi_x.entries)) > 1e-12:
            raise AssertionError("pi_z fires on the x-returned probe")

    @property
    def elements(self) -> dict[str, DenseOperator]:
        return {"z": self.pi_z, "x": self.pi_x, "?": self.pi_inconclusive}

    @property
    def p_conclusive_x(self) -> float:
        """Probability Eve is sure Bob used x, with Bob choosing x half the time."""
        return 0.5 * float(np.trace(self.pi_x.entries @ self.xi_x.entries).real)


def build_usd(xi: DenseOperator, beta: float | None = None) -> UsdPovm:
    """USD measurement for a probe that is a z-basis state.

    A probe whose z-dephased form has full support gives no conclusive
    outcome; such probes must first be reduced to ``|0><0|`` (or ``|1><1|``).

    Parameters
    ----------
    beta : float, optional
        Weight of the conclusive-x element; defaults to the largest valid
        value, 1.
    """
    require_state(xi, "probe")
    xi_z, xi_x = probe_update(xi, Basis.Z), probe_update(xi, Basis.X)
    diag = np.diag(xi.entries).real
    off_diagonal = np.abs(xi.entries - np.diag(np.diag(xi.entries))).max()
    basis_state = any(np.allclose(diag, d, atol=policy.atol) for d in ([1.0, 0.0], [0.0, 1.0]))
    if off_diagonal > policy.atol or not basis_state:
        raise ValueError("probe must be |0><0| or |1><1|; reduce it to a z-basis state first "
                         "(only then does the z-returned probe have a kernel to detect x)")
    perp = projector(KET1 if diag[0] > 0.5 else KET0)
    b = 1.0 if beta is None else float(beta)
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {b}")
    zero = DenseOperator(np.zeros((2, 2)))
    pi_x = perp * b
    return UsdPovm(zero, pi_x, identity(2) - pi_x, 0.0, b, xi_z, xi_x)


@dataclass(frozen=True, eq=False)
class ProbeStrategy:
    """Eve's probe, her measurement of the returned probe, and her actions.

    Attributes
    ----------
    probe : DenseOperator
        State sent to Bob in place of Alice's qubit.
    povm : mapping label -> DenseOperator
        Measurement on the probe Bob returns.
    actions : mapping label -> sequence of DenseOperator
        Kraus operators applied to Alice's qubit for each POVM outcome.
    """

    probe: DenseOperator
    povm: Mapping[str, DenseOperator]
    actions: Mapping[str, Sequence[DenseOperator]]

    def __post_init__(self):
        require_state(self.probe, "probe")
        total = sum(e.entries for e in self.povm.values())
        if np.abs(total - np.eye(2)).max() > policy.atol:
            raise ValueError("POVM elements do not sum to identity")
        for label in self.povm:
            ks = self.actions.get(label)
            if not ks:
                raise ValueError(f"no action for POVM outcome {label!r}")
            s = sum(k.entries.conj().T @ k.entries for k in ks)
            if np.abs(s - np.eye(2)).max() > policy.atol:
                raise ValueError(f"action for {label!r} is not trace preserving")


def probe_only(xi: DenseOperator | None = None) -> ProbeStrategy:
    """Send a probe and return Alice's qubit untouched."""
    xi = projector(KET0) if xi is None else xi
    return ProbeStrategy(xi, {"?": identity(2)}, {"?": [identity(2)]})


def usd_probe(beta: float | None = None) -> ProbeStrategy:
    """Probe ``|0>``, USD on the return, and ``sigma_x`` on Alice's qubit when sure of x."""
    xi = projector(KET0)
    usd = build_usd(xi, beta)
    return ProbeStrategy(xi, usd.elements,
                         {"z": [identity(2)], "x": [SX], "?": [identity(2)]})


# ---------------------------------------------------------------------------
# exact round distribution and sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoWayRound:
    alice_basis: Basis
    bob_basis: Basis
    alice_prepared: Outcome
    bob_outcome: Outcome
    alice_final_outcome: Outcome
    eve_outcome: str | None = None

    @property
    def same_basis(self) -> bool:
        return self.alice_basis is self.bob_basis

    @property
    def error(self) -> bool:
        return self.alice_final_outcome is not self.alice_prepared

    @property
    def error_same(self) -> bool:
        return self.same_basis and self.error

    @property
    def error_diff(self) -> bool:
        return not self.same_basis and self.error


def round_distribution(eve: ProbeStrategy | None = None) -> list[tuple[TwoWayRound, float]]:
    """Every round outcome with its exact probability (zero entries dropped)."""
    out = []
    labels = [None] if eve is None else list(eve.povm)
    for v, w in itertools.product(BASES, BASES):
        for k in basis_outcomes(v):
            p0 = 0.25 * 0.5
            rho = _p(k)
            sent = rho if eve is None else eve.probe.entries
            for j in basis_outcomes(w):
                pj = float(np.trace(_p(j) @ sent).real)
                if pj <= policy.null:
                    continue
                returned = _p(j)
                for lab in labels:
                    if eve is None:
                        pe, back = 1.0, returned
                    else:
                        pe = float(np.trace(eve.povm[lab].entries @ returned).real)
                        ks = eve.actions[lab]
                        back = sum(K.entries @ rho @ K.entries.conj().T for K in ks)
                    if pe <= policy.null:
                        continue
                    for l in basis_outcomes(v):
                        pl = float(np.trace(_p(l) @ back).real)
                        prob = p0 * pj * pe * pl
                        if prob > policy.null:
                            out.append((TwoWayRound(v, w, k, j, l, lab), prob))
    total = sum(p for _, p in out)
    if abs(total - 1.0) > policy.derived:
        raise AssertionError(f"round distribution sums to {total}")
    return [(r, p / total) for r, p in out]


def _rates(rounds: Sequence[TwoWayRound], weights: np.ndarray) -> dict:
    w = np.asarray(weights, dtype=float)
    same = np.array([r.same_basis for r in rounds])
    err = np.array([r.error for r in rounds])
    x_sure = np.array([r.eve_outcome == "x" for r in rounds])
    n = w.sum()
    ws, wd = w[same].sum(), w[~same].sum()
    bits = np.zeros((3, 2))
    labels = {"z": 0, "x": 1, "?": 2, None: 2}
    for r, c in zip(rounds, w):
        if r.same_basis:
            bits[labels.get(r.eve_outcome, 2), r.bob_outcome.key_bit] += c
    nan = float("nan")
    return {
        "p_error_same": float(w[same & err].sum() / ws) if ws else nan,
        "p_error_diff": float(w[~same & err].sum() / wd) if wd else nan,
        "p_error_diff_joint": float(w[~same & err].sum() / n),
        "conclusive_rate": float(w[x_sure].sum() / n),
        "eve_info_rate": mutual_information(bits) if bits.sum() > 0 else 0.0,
    }


def exact_rates(eve: ProbeStrategy | None = None) -> dict:
    """Error and conclusive rates from the exact round distribution."""
    dist = round_distribution(eve)
    return _rates([r for r, _ in dist], np.array([p for _, p in dist]))


def run_two_way(n: int, eve: ProbeStrategy | None = None, seed: int = 0) -> dict:
    """Monte Carlo estimate of the two-way rates over ``n`` rounds.

    Returns
    -------
    dict
        ``p_error_same`` and ``p_error_diff`` are error rates conditioned on
        the bases agreeing or not. ``p_error_diff_joint`` is the fraction of
        all rounds that have different bases and an error.
        ``conclusive_rate`` is the fraction of rounds where Eve is sure Bob
        used x, and ``eve_info_rate`` the information (bits) between Eve's
        POVM outcome and Bob's key bit on same-basis rounds.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    dist = round_distribution(eve)
    probs = np.array([p for _, p in dist])
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    idx = _kernels.sample_categorical(cdf, _kernels.counter_uniforms(seed, 0, n))
    counts = np.bincount(idx, minlength=len(dist)).astype(float)
    out = _rates([r for r, _ in dist], counts)
    out["rounds"] = n
    return out


def probe_attack_as_joint() -> JointKrausAttack:
    """The probe attack written as a joint operation of the two switch eavesdroppers.

    Eve stores the incoming qubit and emits ``|0>``; Yves discards what he
    receives and emits the stored qubit. Kraus operators
    ``Z_m = sum_k |0><k| (x) |k><m|`` on (E wire) (x) (Y wire).
    """
    kets = (KET0, KET1)
    ops = tuple(sum(np.kron(np.outer(KET0, k), np.outer(k, kets[m])) for k in kets) for m in range(2))
    return JointKrausAttack(ops)
