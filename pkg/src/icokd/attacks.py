"""Individual attacks by Eve (between Alice and Bob) and Yves (outside them).

Each eavesdropper entangles the passing qubit with a 4-dimensional ancilla

    U |k>|e> = |k>|eps_kk> + |k'>|eps_kk'>,      k' = 1 - k,

with ``<eps_kk|eps_kk> = F``, ``<eps_kk'|eps_kk'> = D = 1 - F``,
``<eps_00|eps_11> = F cos x``, ``<eps_01|eps_10> = D cos y`` and the cross
overlaps zero. Yves uses the same form with primed parameters. In the
switch the parties appear as ``U_Y B U_E A`` on the control ``|0>`` branch
and ``A U_E B U_Y`` on the ``|1>`` branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .qmath import (
    KET0,
    KET1,
    KETP,
    Basis,
    DegenerateInputError,
    DenseOperator,
    Outcome,
    binary_entropy,
    embed_operator,
    identity,
    mutual_information,
    partial_trace,
    policy,
    projector,
    tensor,
)
from .switch import (
    SiftedState,
    SwitchSpec,
    marginal_branches,
    measurement_instrument,
    sift,
    switch_branches,
    unitary_instrument,
)

HALF_PI = 0.5 * math.pi
ANCILLA_DIM = 4
# register layout: target S, Eve's ancilla E, Yves's ancilla Y
REGISTER = (2, ANCILLA_DIM, ANCILLA_DIM)
PAIR_KEYS = ("00", "01", "10", "11")


@dataclass(frozen=True)
class AttackParams:
    """Parameters ``(F, F', x, y, x', y')`` of an Eve/Yves individual attack."""

    F: float = 1.0
    Fp: float = 1.0
    x: float = 0.0
    y: float = 0.0
    xp: float = 0.0
    yp: float = 0.0

    def __post_init__(self):
        for name in ("F", "Fp"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("x", "y", "xp", "yp"):
            v = getattr(self, name)
            if not (0.0 <= v <= HALF_PI + 1e-12) or not math.isfinite(v):
                raise ValueError(f"{name} must lie in [0, pi/2], got {v}")

    @property
    def D(self) -> float:
        return 1.0 - self.F

    @property
    def Dp(self) -> float:
        return 1.0 - self.Fp

    @classmethod
    def intercept_z(cls) -> "AttackParams":
        """Eve measures in z between Alice and Bob; Yves idle."""
        return cls(F=1.0, Fp=1.0, x=HALF_PI, xp=0.0)

    @classmethod
    def yves_intercept_z(cls) -> "AttackParams":
        """Yves measures in z outside the Alice-Bob segment; Eve idle."""
        return cls(F=1.0, Fp=1.0, x=0.0, xp=HALF_PI)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "AttackParams":
        F, Fp = rng.random(2)
        x, y, xp, yp = rng.random(4) * HALF_PI
        return cls(float(F), float(Fp), float(x), float(y), float(xp), float(yp))


def ancilla_vectors(F: float, x: float, y: float) -> dict[str, np.ndarray]:
    """Lower-triangular Gram factor of ``eps_00, eps_11, eps_01, eps_10``."""
    D = 1.0 - F
    e = np.eye(ANCILLA_DIM, dtype=complex)
    sF, sD = math.sqrt(F), math.sqrt(D)
    return {
        "00": sF * e[0],
        "11": sF * (math.cos(x) * e[0] + math.sin(x) * e[1]),
        "01": sD * e[2],
        "10": sD * (math.cos(y) * e[2] + math.sin(y) * e[3]),
    }


@dataclass(frozen=True, eq=False)
class AncillaModel:
    """Explicit ancilla vectors for Eve (``eps``) and Yves (``eta``)."""

    eve_vectors: dict
    yves_vectors: dict

    @classmethod
    def from_params(cls, p: AttackParams) -> "AncillaModel":
        m = cls(ancilla_vectors(p.F, p.x, p.y), ancilla_vectors(p.Fp, p.xp, p.yp))
        m.check(p)
        return m

    def check(self, p: AttackParams) -> None:
        for vec, F, x, y in ((self.eve_vectors, p.F, p.x, p.y), (self.yves_vectors, p.Fp, p.xp, p.yp)):
            D = 1.0 - F
            g = {(a, b): np.vdot(vec[a], vec[b]) for a in PAIR_KEYS for b in PAIR_KEYS}
            want = {("00", "00"): F, ("11", "11"): F, ("01", "01"): D, ("10", "10"): D,
                    ("00", "11"): F * math.cos(x), ("01", "10"): D * math.cos(y),
                    ("00", "01"): 0, ("00", "10"): 0, ("11", "01"): 0, ("11", "10"): 0}
            for key, val in want.items():
                if abs(g[key] - val) > policy.atol:
                    raise AssertionError(f"ancilla Gram entry {key} is {g[key]}, expected {val}")

    def gram(self, who: str = "eve") -> np.ndarray:
        vec = self.eve_vectors if who == "eve" else self.yves_vectors
        m = np.array([vec[k] for k in PAIR_KEYS])
        return m.conj() @ m.T


def attack_unitary(F: float, x: float, y: float) -> DenseOperator:
    """Unitary on qubit (x) 4-dim ancilla with the ancilla starting in ``e_0``.

    Columns for inputs ``|0>|e0>`` and ``|1>|e0>`` carry the attack; the rest
    are completed by Gram-Schmidt over the canonical basis in order, so the
    no-attack point ``F = 1, x = 0`` gives exactly the identity.
    """
    v = ancilla_vectors(F, x, y)
    dim = 2 * ANCILLA_DIM
    cols = {0: np.kron(KET0, v["00"]) + np.kron(KET1, v["01"]),
            ANCILLA_DIM: np.kron(KET1, v["11"]) + np.kron(KET0, v["10"])}
    basis = list(cols.values())
    fill = []
    for c in np.eye(dim, dtype=complex):
        r = c - sum(b * np.vdot(b, c) for b in basis)
        nr = np.linalg.norm(r)
        if nr > 1e-8:
            r = r / nr
            basis.append(r)
            fill.append(r)
    u = np.zeros((dim, dim), dtype=complex)
    free = iter(fill)
    for k in range(dim):
        u[:, k] = cols[k] if k in cols else next(free)
    dev = np.abs(u.conj().T @ u - np.eye(dim)).max()
    if dev > policy.atol:
        raise AssertionError(f"attack unitary deviates from unitarity by {dev:.3e}")
    return DenseOperator(u, (2, ANCILLA_DIM))


def build_attack(params: AttackParams) -> tuple[DenseOperator, DenseOperator]:
    """``(U_E, U_Y)`` as 8x8 unitaries on qubit (x) ancilla."""
    AncillaModel.from_params(params)
    return (attack_unitary(params.F, params.x, params.y),
            attack_unitary(params.Fp, params.xp, params.yp))


# ---------------------------------------------------------------------------
# switch evaluation
# ---------------------------------------------------------------------------


def _e0_state() -> DenseOperator:
    e0 = np.zeros(ANCILLA_DIM, dtype=complex)
    e0[0] = 1
    return projector(e0)


def attack_spec(params: AttackParams, rho: DenseOperator | None = None,
                omega: DenseOperator | None = None) -> SwitchSpec:
    """Four-slot switch ``(U_Y, B, U_E, A)`` with both ancillae in ``e_0``."""
    ue, uy = build_attack(params)
    meas = measurement_instrument(REGISTER, 0)
    parties = (
        unitary_instrument(embed_operator(uy, [0, 2], REGISTER), "Y"),
        meas,
        unitary_instrument(embed_operator(ue, [0, 1], REGISTER), "E"),
        meas,
    )
    e0 = _e0_state()
    return SwitchSpec(parties,
                      projector(KETP) if omega is None else omega,
                      identity(2) * 0.5 if rho is None else rho,
                      tensor(e0, e0))


ALICE_SLOT, BOB_SLOT = 3, 1


def attack_branches(params: AttackParams, rho=None, omega=None, check: bool = True) -> dict:
    """Unnormalised joint outputs keyed by ``(alice_outcome, bob_outcome)``."""
    return marginal_branches(switch_branches(attack_spec(params, rho, omega), check), ALICE_SLOT, BOB_SLOT)


@lru_cache(maxsize=256)
def _sifted_cached(params: AttackParams) -> SiftedState:
    return sift(attack_branches(params))


def sifted_state(params: AttackParams) -> SiftedState:
    """Sifted joint state for ``rho = 1/2`` and ``omega = |+><+|``."""
    return _sifted_cached(params)


def p_detect_analytic(p: AttackParams) -> float:
    """Closed-form probability of a ``-`` control outcome after sifting."""
    c = math.cos
    F, Fp, D, Dp = p.F, p.Fp, p.D, p.Dp
    return 0.5 - (F * Fp * (3 + c(p.x) * c(p.xp)) + D * Dp * (1 + 3 * c(p.y) * c(p.yp))
                  + F * Dp * (c(p.x) + c(p.yp)) + D * Fp * (c(p.y) + c(p.xp))) / 8


def p_detect_numeric(p: AttackParams) -> float:
    """``-`` probability of the sifted control, from the switch itself."""
    return sifted_state(p).p_minus()


def p_error(p: AttackParams) -> float:
    """Fraction of sifted weight where Alice's and Bob's key bits differ."""
    return sifted_state(p).p_error()


def p_error_curve(x: float | np.ndarray) -> float | np.ndarray:
    """Error probability ``(1 - cos x)/4`` when ``F = F' = 1``."""
    return (1 - np.cos(x)) / 4


def option1_detect(y: float, yp: float) -> float:
    return 3 / 8 * (1 - math.cos(y) * math.cos(yp))


def option2_detect(x: float, xp: float) -> float:
    return 1 / 8 * (1 - math.cos(x) * math.cos(xp))


@dataclass(frozen=True)
class MinDetect:
    """Result of minimising detection over ``(F, F')``.

    Attributes
    ----------
    d : float
        Minimum detection probability.
    F, Fp : float
        Minimiser.
    branch : str
        ``"option1"`` (F = F' = 0), ``"option2"`` (F = F' = 1), ``"both"`` when
        the two coincide, or ``"none"``.
    corners : dict
        Detection probability at the four corners of the square.
    """

    d: float
    F: float
    Fp: float
    branch: str
    corners: dict


def _golden(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    # the objective is linear along each axis, so also look at the ends
    return min((a, b, lo, hi), key=f)


def min_detect(x: float, y: float, xp: float, yp: float, n: int = 101) -> MinDetect:
    """Minimise detection over ``F, F' in [0, 1]`` for fixed angles.

    A dense grid locates the basin, then golden-section sweeps refine each
    coordinate to 1e-8. All four corners are checked and the two published
    corners are asserted to be the minimisers.
    """
    def pd(F, Fp):
        return p_detect_analytic(AttackParams(F, Fp, x, y, xp, yp))

    corners = {(F, Fp): pd(F, Fp) for F in (0.0, 1.0) for Fp in (0.0, 1.0)}
    c00, c10, c01, c11 = corners[0, 0], corners[1, 0], corners[0, 1], corners[1, 1]
    coeffs = np.array([c00, c10 - c00, c01 - c00, c11 - c10 - c01 + c00])
    _, a, b = _kernels.bilinear_grid_min(coeffs, n)
    step = 1.0 / (n - 1)
    F, Fp = a * step, b * step
    for _ in range(3):
        F = _golden(lambda t: pd(t, Fp), max(0.0, F - step), min(1.0, F + step))
        Fp = _golden(lambda t: pd(F, t), max(0.0, Fp - step), min(1.0, Fp + step))
    d = pd(F, Fp)
    best_corner = min(corners, key=corners.get)
    if corners[best_corner] < d:
        (F, Fp), d = best_corner, corners[best_corner]
    o1, o2 = option1_detect(y, yp), option2_detect(x, xp)
    if max(c01, c10) < min(o1, o2) - 1e-12:
        raise AssertionError("a mixed corner beats both published options")
    m1, m2 = abs(d - o1) <= 1e-6, abs(d - o2) <= 1e-6
    branch = "both" if m1 and m2 else "option1" if m1 else "option2" if m2 else "none"
    return MinDetect(float(d), float(F), float(Fp), branch, corners)


# ---------------------------------------------------------------------------
# eavesdropper information
# ---------------------------------------------------------------------------


def _basis_outcomes(basis: Basis) -> tuple[Outcome, Outcome]:
    return (Outcome.ZERO, Outcome.ONE) if basis is Basis.Z else (Outcome.PLUS, Outcome.MINUS)


def eaves_conditional_states(params: AttackParams, basis: Basis, party: str = "alice"):
    """Joint ancilla states conditioned on Alice's (or Bob's) outcome.

    Returns
    -------
    (states, priors)
        Two normalised operators on E (x) Y and their sifted weights.
    """
    st = sifted_state(params)
    slot = 0 if party == "alice" else 1
    states, priors = [], []
    for o in _basis_outcomes(basis):
        keys = [k for k in st.joint if k[slot] is o]
        w = sum(st.weight(k) for k in keys)
        if w <= policy.null:
            raise DegenerateInputError(f"outcome {o} has zero weight")
        red = partial_trace(st.total(keys), [1, 2])
        states.append(red * (1 / red.trace().real))
        priors.append(w)
    return tuple(states), tuple(priors)


def closed_form_ancilla_states(option: str, basis: Basis, params: AttackParams) -> tuple[DenseOperator, DenseOperator]:
    """Conditional ancilla states at the two published corners."""
    m = AncillaModel.from_params(params)
    ev, hv = m.eve_vectors, m.yves_vectors

    def prod(a, b):
        return np.kron(np.outer(ev[a], ev[a].conj()), np.outer(hv[b], hv[b].conj()))

    dims = (ANCILLA_DIM, ANCILLA_DIM)
    if option == "F1":
        if basis is Basis.Z:
            return DenseOperator(prod("00", "00"), dims), DenseOperator(prod("11", "11"), dims)
        keys = ("00", "11")
    elif option == "F0":
        if basis is Basis.Z:
            s = (prod("01", "10") + prod("10", "01")) / 2
            return DenseOperator(s, dims), DenseOperator(s, dims)
        keys = ("01", "10")
    else:
        raise ValueError(f"option must be 'F0' or 'F1', got {option!r}")
    s = sum(prod(a, b) for a in keys for b in keys) / 4
    return DenseOperator(s, dims), DenseOperator(s, dims)


def eaves_ancilla_states(option: str, basis: Basis, params: AttackParams) -> tuple[DenseOperator, DenseOperator]:
    """Conditional ancilla states at ``F = F' = 0`` (``"F0"``) or ``F = F' = 1`` (``"F1"``).

    Computed from the switch and asserted equal to the closed forms.
    """
    want = 0.0 if option == "F0" else 1.0
    if option not in ("F0", "F1") or params.F != want or params.Fp != want:
        raise ValueError(f"option {option!r} needs F = F' = {want:g}")
    (a, b), _ = eaves_conditional_states(params, basis)
    ca, cb = closed_form_ancilla_states(option, basis, params)
    dev = max(np.abs(a.entries - ca.entries).max(), np.abs(b.entries - cb.entries).max())
    if dev > policy.derived:
        raise AssertionError(f"conditional ancilla states miss the closed form by {dev:.3e}")
    return a, b


def helstrom_mi(overlap: float) -> float:
    """Information (bits) from the Helstrom measurement on two pure states.

    The states ``cos t |a> +- sin t |b>`` with overlap ``cos 2t`` are measured
    with ``pi_l = (|a> + (-1)^l |b>)(<a| + (-1)^l <b|)/2``. Equal priors.
    """
    o = float(overlap)
    if not -policy.null <= o <= 1 + policy.null:
        raise ValueError(f"overlap must lie in [0, 1], got {o}")
    o = min(max(o, 0.0), 1.0)
    t = 0.5 * math.acos(o)
    states = [np.array([math.cos(t), math.sin(t)]), np.array([math.cos(t), -math.sin(t)])]
    povm = [0.5 * np.outer(v, v) for v in (np.array([1.0, 1.0]), np.array([1.0, -1.0]))]
    joint = np.array([[0.5 * s @ p @ s for p in povm] for s in states])
    mi = mutual_information(joint)
    closed = 1 - binary_entropy((1 + math.sqrt(max(0.0, 1 - o * o))) / 2)
    if abs(mi - closed) > policy.derived:
        raise AssertionError(f"Helstrom information {mi} differs from closed form {closed}")
    return closed


def helstrom_mi_mixed(states: Sequence[DenseOperator], priors: Sequence[float]) -> float:
    """Information (bits) between a binary label and its Helstrom guess.

    The Helstrom measurement projects onto the positive part of
    ``p0 rho0 - p1 rho1``; its kernel is split evenly between the two guesses
    so the result does not depend on how the eigensolver orders it.
    """
    p = np.asarray(priors, dtype=float)
    p = p / p.sum()
    gamma = p[0] * states[0].entries - p[1] * states[1].entries
    w, v = np.linalg.eigh(0.5 * (gamma + gamma.conj().T))
    # eigenvalues at zero favour neither label; split them evenly
    weight = np.where(w > policy.atol, 1.0, np.where(w < -policy.atol, 0.0, 0.5))
    pi0 = (v * weight) @ v.conj().T
    pi1 = np.eye(len(w)) - pi0
    joint = np.array([[p[k] * np.trace(pi @ s.entries).real for pi in (pi0, pi1)]
                      for k, s in enumerate(states)])
    return mutual_information(np.clip(joint, 0.0, None))


def mi_eve_alice(params: AttackParams, basis: Basis, party: str = "alice") -> float:
    """Eavesdroppers' Helstrom information about Alice's (or Bob's) bit in one basis."""
    states, priors = eaves_conditional_states(params, basis, party)
    return helstrom_mi_mixed(states, priors)


def h_za_of_d(d: float | np.ndarray) -> float | np.ndarray:
    """Maximal eavesdropper information in z rounds at detection ``d``."""
    d = np.asarray(d, dtype=float)
    q = (1 + 4 * np.sqrt(np.clip(d * (1 - 4 * d), 0.0, None))) / 2
    out = 1 - np.vectorize(binary_entropy)(np.clip(q, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def ab_joint_table(params: AttackParams, basis: Basis) -> np.ndarray:
    """``P(alice bit, bob bit)`` over sifted rounds of one basis (unnormalised)."""
    st = sifted_state(params)
    t = np.zeros((2, 2))
    for (a, b), _ in st.joint.items():
        if a.basis is basis:
            t[a.key_bit, b.key_bit] += st.weight((a, b))
    return t


def mi_alice_bob(params: AttackParams, basis: Basis) -> float:
    """Alice-Bob mutual information in one basis.

    Computed from the sifted outcome table; at ``F = F' = 1`` it is asserted
    equal to the closed form (1 in z, ``1 - h[(1 + cos x)/2]`` in x).
    """
    mi = mutual_information(ab_joint_table(params, basis))
    if params.F == 1.0 and params.Fp == 1.0:
        closed = 1.0 if basis is Basis.Z else 1 - binary_entropy((1 + math.cos(params.x)) / 2)
        if abs(mi - closed) > policy.derived:
            raise AssertionError(f"Alice-Bob information {mi} differs from closed form {closed}")
    return mi


def bounds_and_error(d: float) -> dict:
    """Bounds on x-basis Alice-Bob information and on the error rate at detection ``d``."""
    d = float(d)
    if not 0.0 <= d <= 0.125 + policy.null:
        raise ValueError(f"d must lie in [0, 1/8], got {d}")
    d = min(d, 0.125)
    return {"H_pm_range": (1 - binary_entropy(4 * d), 1.0), "P_error_range": (0.0, 2 * d)}


def fig_mi_table(d_grid: Sequence[float] | int = 51) -> list[dict]:
    """Rows ``(d, H_ZA, H_AB_z, H_AB_x_lower, H_AB_x_upper)`` over ``d in [0, 1/8]``.

    Each row is also evaluated along the ``x' = 0`` axis through the switch
    (``cos x = 1 - 8 d``) and asserted to match.
    """
    grid = np.linspace(0.0, 0.125, d_grid) if isinstance(d_grid, int) else np.asarray(d_grid, float)
    if grid.size == 0 or grid.min() < 0 or grid.max() > 0.125 + policy.null:
        raise ValueError("d grid must lie in [0, 1/8]")
    rows = []
    for d in grid:
        d = float(min(d, 0.125))
        b = bounds_and_error(d)
        row = {"d": d, "H_ZA": float(h_za_of_d(d)), "H_AB_z": 1.0,
               "H_AB_x_lower": b["H_pm_range"][0], "H_AB_x_upper": b["H_pm_range"][1]}
        x = math.acos(min(1.0, max(-1.0, 1 - 8 * d)))
        p = AttackParams(1.0, 1.0, min(x, HALF_PI), 0.0, 0.0, 0.0)
        a, bb = eaves_ancilla_states("F1", Basis.Z, p)
        ov = abs(np.trace(a.entries @ bb.entries)) ** 0.5
        checks = (
            (helstrom_mi(ov), row["H_ZA"]),
            (mi_alice_bob(p, Basis.Z), row["H_AB_z"]),
            (mi_alice_bob(p, Basis.X), row["H_AB_x_lower"]),
            (p_detect_numeric(p), d),
        )
        for got, want in checks:
            if abs(got - want) > policy.derived:
                raise AssertionError(f"row d={d}: switch value {got} differs from {want}")
        rows.append(row)
    return rows


def axis_maximisation_check(n: int = 41, levels: Sequence[float] = (0.02, 0.05, 0.08, 0.11)) -> float:
    """Check that, at fixed ``d``, z-basis eavesdropper information peaks on an axis.

    For each detection level the ``(x, x')`` curve with ``F = F' = 1`` is
    sampled, the eavesdroppers' information is computed from the switch, and
    the gap between its maximum and the axis value is returned (worst case).
    """
    worst = 0.0
    for d in levels:
        c = 1 - 8 * d
        axis = mi_eve_alice(AttackParams(1.0, 1.0, math.acos(c), 0.0, 0.0, 0.0), Basis.Z)
        best = axis
        for cx in np.linspace(c, 1.0, n):
            p = AttackParams(1.0, 1.0, math.acos(min(1.0, cx)), 0.0, math.acos(min(1.0, c / cx)), 0.0)
            best = max(best, mi_eve_alice(p, Basis.Z))
        worst = max(worst, best - axis)
    return worst
