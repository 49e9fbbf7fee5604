"""Quantum switch over a list of parties, and basis sifting.

A switch with parties ``(P1, ..., Pn)`` and Kraus choices ``K1, ..., Kn``
has the Kraus operator

    S = (K1 K2 ... Kn) (x) |0><0| + (Kn ... K2 K1) (x) |1><1|

so the control in ``|1>`` applies ``P1`` first and the control in ``|0>``
applies it last. With ``(A, B)`` this is ``A B (x) |0><0| + B A (x) |1><1|``;
with ``(A, E, B)`` the middle party stays in the middle in both orders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qmath import (
    KET0,
    KET1,
    OUTCOMES,
    Basis,
    DegenerateInputError,
    DenseOperator,
    KrausInstrument,
    Outcome,
    WiringError,
    embed_operator,
    identity,
    partial_trace,
    policy,
    projector,
    require_state,
    tensor,
)

SQRT2 = np.sqrt(2.0)
_P0 = np.outer(KET0, KET0.conj())
_P1 = np.outer(KET1, KET1.conj())
_SZ = np.diag([1.0, -1.0]).astype(complex)


def measurement_instrument(dims: Sequence[int] = (2,), target: int = 0) -> KrausInstrument:
    """The four-outcome instrument ``{|i><i|/sqrt(2)}`` for ``i`` in ``0, 1, +, -``.

    Parameters
    ----------
    dims : sequence of int
        Register the instrument acts on; the qubit sits at ``target``.
    """
    outs = []
    for o in OUTCOMES:
        k = projector(o.ket) * (1 / SQRT2)
        outs.append((o, (embed_operator(k, [target], dims),)))
    return KrausInstrument(tuple(outs))


alice_instrument = bob_instrument = measurement_instrument


def unitary_instrument(u: DenseOperator, label: str = "U") -> KrausInstrument:
    return KrausInstrument(((label, (u,)),))


def identity_instrument(dims: Sequence[int] = (2,), label: str = "I") -> KrausInstrument:
    return unitary_instrument(identity(tuple(dims)), label)


def switch_kraus(parties: Sequence[DenseOperator], control_dim: int = 2) -> DenseOperator:
    """Switch Kraus operator for one Kraus choice per party.

    Parameters
    ----------
    parties : sequence of DenseOperator
        One operator per party, at least two, all on the same register.

    Returns
    -------
    DenseOperator
        Operator on register (x) control with the control as last subsystem.
    """
    if control_dim != 2:
        raise WiringError("only a qubit control is supported")
    if len(parties) < 2:
        raise WiringError("a switch needs at least two parties")
    dims = parties[0].dims
    for p in parties:
        if p.dims != dims:
            raise WiringError(f"party dims {p.dims} differ from {dims}")
    fwd, rev = _products(parties)
    return DenseOperator(np.kron(fwd, _P0) + np.kron(rev, _P1), dims + (2,))


def _products(parties: Sequence[DenseOperator]) -> tuple[np.ndarray, np.ndarray]:
    fwd = parties[0].entries
    rev = parties[0].entries
    for p in parties[1:]:
        fwd = fwd @ p.entries
        rev = p.entries @ rev
    return fwd, rev


@dataclass(frozen=True, eq=False)
class SwitchSpec:
    """Parties, control qubit and input state of a switch run.

    Parameters
    ----------
    party_instruments : sequence of KrausInstrument
        In the order of the ``|1>`` branch (first entry acts first there).
    control_state : DenseOperator
        Control qubit ``omega``.
    target_state : DenseOperator
        Target qubit ``rho``.
    ancilla_state : DenseOperator, optional
        Extra registers (eavesdropper ancillae) appended after the target.
        The instruments act on target (x) ancilla.
    """

    party_instruments: tuple[KrausInstrument, ...]
    control_state: DenseOperator
    target_state: DenseOperator
    ancilla_state: DenseOperator | None = None
    work_dims: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "party_instruments", tuple(self.party_instruments))
        for name, st in (("control_state", self.control_state), ("target_state", self.target_state)):
            if st.dim != 2:
                raise WiringError(f"{name} must be a qubit")
            require_state(st, name)
        dims = self.target_state.dims
        if self.ancilla_state is not None:
            require_state(self.ancilla_state, "ancilla_state")
            dims = dims + self.ancilla_state.dims
        object.__setattr__(self, "work_dims", dims)
        if len(self.party_instruments) < 2:
            raise WiringError("a switch needs at least two parties")
        for inst in self.party_instruments:
            if inst.dims != dims:
                raise WiringError(f"instrument dims {inst.dims} do not match register {dims}")

    def work_state(self) -> DenseOperator:
        if self.ancilla_state is None:
            return self.target_state
        return tensor(self.target_state, self.ancilla_state)


def switch_branches(spec: SwitchSpec, check: bool = True) -> dict[tuple, DenseOperator]:
    """Unnormalised output for every joint outcome of the parties.

    The output is computed as a direct Kraus sum. With ``check`` it is also
    computed from the split ``S = M (x) 1 + N (x) sigma_z`` with
    ``M, N = (forward +- reversed)/2`` and the two are asserted equal.
    """
    rho = spec.work_state().entries
    om = spec.control_state.entries
    dims = spec.work_dims + (2,)
    full = np.kron(rho, om)
    terms = (om, om @ _SZ, _SZ @ om, _SZ @ om @ _SZ)
    out = {}
    for combo in itertools.product(*(inst.outcomes for inst in spec.party_instruments)):
        labels = tuple(lab for lab, _ in combo)
        direct = np.zeros_like(full)
        split = np.zeros_like(full)
        for ks in itertools.product(*(kk for _, kk in combo)):
            fwd, rev = _products(ks)
            s = np.kron(fwd, _P0) + np.kron(rev, _P1)
            direct += s @ full @ s.conj().T
            if check:
                m, n = 0.5 * (fwd + rev), 0.5 * (fwd - rev)
                mh, nh = m.conj().T, n.conj().T
                split += (np.kron(m @ rho @ mh, terms[0]) + np.kron(m @ rho @ nh, terms[1])
                          + np.kron(n @ rho @ mh, terms[2]) + np.kron(n @ rho @ nh, terms[3]))
        if check:
            dev = np.abs(direct - split).max()
            if dev > policy.atol:
                raise AssertionError(f"Kraus sum and commutator split disagree by {dev:.3e}")
        out[labels] = DenseOperator(direct, dims)
    return out


def run_switch(spec: SwitchSpec, check: bool = True) -> dict[tuple, tuple[float, DenseOperator | None]]:
    """Outcome probabilities and normalised joint post-states (control last)."""
    res = {}
    for labels, op in switch_branches(spec, check).items():
        p = float(op.trace().real)
        res[labels] = (p, op * (1 / p) if p > policy.null else None)
    return res


def marginal_branches(branches: Mapping[tuple, DenseOperator], alice: int, bob: int) -> dict:
    """Sum branches over every party other than Alice and Bob.

    Returns a dict keyed by ``(alice_outcome, bob_outcome)``.
    """
    out: dict = {}
    for labels, op in branches.items():
        key = (labels[alice], labels[bob])
        out[key] = out[key] + op if key in out else op
    return out


@dataclass(frozen=True, eq=False)
class SiftedState:
    """Same-basis branches renormalised to unit total trace.

    Attributes
    ----------
    joint : dict
        ``(alice_outcome, bob_outcome) -> DenseOperator`` over register (x)
        control, unnormalised individually but summing to trace 1.
    kept_fraction : float
        Weight of the kept branches before renormalisation.
    """

    joint: dict
    kept_fraction: float

    def basis(self, key: tuple) -> Basis:
        return key[0].basis

    def total(self, keys=None) -> DenseOperator:
        keys = list(self.joint) if keys is None else list(keys)
        ops = [self.joint[k] for k in keys]
        acc = ops[0]
        for op in ops[1:]:
            acc = acc + op
        return acc

    def weight(self, key: tuple) -> float:
        return float(self.joint[key].trace().real)

    def control_state(self, keys=None) -> DenseOperator:
        t = self.total(keys)
        return partial_trace(t, [len(t.dims) - 1])

    def p_minus(self, keys=None) -> float:
        """Probability of the control outcome ``-`` (unnormalised over ``keys``)."""
        c = self.control_state(keys).entries
        km = (KET0 - KET1) / SQRT2
        return float((km.conj() @ c @ km).real)

    def p_error(self) -> float:
        return sum(self.weight(k) for k in self.joint if k[0].key_bit != k[1].key_bit)


def sift(branches: Mapping[tuple, DenseOperator]) -> SiftedState:
    """Keep branches where Alice and Bob measured in the same basis.

    Parameters
    ----------
    branches : mapping
        ``(alice_outcome, bob_outcome) -> unnormalised joint operator``.
    """
    total = sum(float(op.trace().real) for op in branches.values())
    kept = {k: op for k, op in branches.items() if Outcome(k[0]).basis is Outcome(k[1]).basis}
    w = sum(float(op.trace().real) for op in kept.values())
    if total <= policy.null or w <= policy.null:
        raise DegenerateInputError("no weight left to sift")
    return SiftedState({k: op * (1 / w) for k, op in kept.items()}, w / total)
