"""Jones-calculus model of a Sagnac interferometer acting as a quantum switch.

The photon's polarisation (``|H> = |0>``, ``|V> = |1>``) is the target and its
path is the control. A 50/50 beamsplitter

    U = [[i, 1], [1, i]] / sqrt(2)

sends the reflected part (path 0, phase ``i``) clockwise through Alice's then
Bob's polariser and the transmitted part (path 1) the other way round. On
the way out the same splitter acts as ``U^dag``, so the two exit ports carry

    +:  (X_0 + X_1) psi / 2        -:  i (X_0 - X_1) psi / 2

with ``X_0 = P_B P_A`` and ``X_1 = P_A P_B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qmath import DenseOperator, Outcome

HALF_PI = 0.5 * math.pi
QUARTER_PI = 0.25 * math.pi
BEAMSPLITTER = np.array([[1j, 1], [1, 1j]]) / math.sqrt(2)
CIRCULAR = {
    "+i": np.array([1, 1j]) / math.sqrt(2),
    "-i": np.array([1, -1j]) / math.sqrt(2),
}
TABLE_ROWS = (
    (0.0, 0.0), (0.0, HALF_PI), (HALF_PI, 0.0), (HALF_PI, HALF_PI),
    (QUARTER_PI, QUARTER_PI), (QUARTER_PI, -QUARTER_PI), (-QUARTER_PI, QUARTER_PI), (-QUARTER_PI, -QUARTER_PI),
)
ALLOWED_ANGLES = (0.0, HALF_PI, QUARTER_PI, -QUARTER_PI)


def jones_polarizer(theta: float) -> DenseOperator:
    """Ideal linear polariser: projector onto ``(cos theta, sin theta)``."""
    v = np.array([math.cos(theta), math.sin(theta)])
    return DenseOperator(np.outer(v, v))


@dataclass(frozen=True)
class OpticalConfig:
    """Polariser settings and input polarisation for one run.

    ``eve_angle`` optionally inserts a polariser between Alice and Bob on
    both arms.
    """

    input_polarization: str = "+i"
    alice_angle: float = 0.0
    bob_angle: float = 0.0
    eve_angle: float | None = None
    beamsplitter_ratio: float = 0.5

    def __post_init__(self):
        if self.input_polarization not in CIRCULAR:
            raise ValueError(f"input_polarization must be one of {tuple(CIRCULAR)}")
        if self.beamsplitter_ratio != 0.5:
            raise ValueError("only a 50/50 beamsplitter is modelled")


def _arm(polarisers, amp: np.ndarray) -> tuple[np.ndarray, float]:
    """Propagate through polarisers in order; return output and absorbed intensity."""
    absorbed = 0.0
    for p in polarisers:
        out = p @ amp
        absorbed += float(np.vdot(amp, amp).real - np.vdot(out, out).real)
        amp = out
    return amp, absorbed


def sagnac_run(config: OpticalConfig) -> dict:
    """Exit-port intensities for one setting.

    Returns
    -------
    dict
        ``I_plus``, ``I_minus``, ``I_enter``, ``I_exit``, ``absorbed``,
        ``P_setting = I_exit / I_enter`` (probability the photon passes the
        polarisers), ``P = P_setting / 4`` (joint probability of the two
        outcomes, including each party's 1/2 choice weight) and
        ``detection_ratio = I_minus / I_exit`` (0 when nothing exits).
    """
    psi = CIRCULAR[config.input_polarization]
    pa = jones_polarizer(config.alice_angle).entries
    pb = jones_polarizer(config.bob_angle).entries
    mid = [] if config.eve_angle is None else [jones_polarizer(config.eve_angle).entries]
    split = BEAMSPLITTER @ np.array([1.0, 0.0])
    # clockwise: Alice first; counter-clockwise: Bob first
    out0, lost0 = _arm([pa, *mid, pb], split[0] * psi)
    out1, lost1 = _arm([pb, *mid, pa], split[1] * psi)
    recombined = BEAMSPLITTER.conj().T @ np.array([out0, out1])
    i_plus = float(np.vdot(recombined[0], recombined[0]).real)
    i_minus = float(np.vdot(recombined[1], recombined[1]).real)
    i_enter = float(np.vdot(psi, psi).real)
    i_exit = i_plus + i_minus
    p_setting = i_exit / i_enter
    return {
        "I_plus": i_plus,
        "I_minus": i_minus,
        "I_enter": i_enter,
        "I_exit": i_exit,
        "absorbed": lost0 + lost1,
        "P_setting": p_setting,
        "P": p_setting / 4,
        "detection_ratio": i_minus / i_exit if i_exit > 1e-15 else 0.0,
    }


def averaged_run(alice_angle: float, bob_angle: float, eve_angle: float | None = None) -> dict:
    """Average of :func:`sagnac_run` over the two circular inputs (an unpolarised source)."""
    runs = [sagnac_run(OpticalConfig(k, alice_angle, bob_angle, eve_angle)) for k in CIRCULAR]
    out = {key: sum(r[key] for r in runs) / len(runs) for key in runs[0]}
    out["detection_ratio"] = out["I_minus"] / out["I_exit"] if out["I_exit"] > 1e-15 else 0.0
    return out


def table_sweep() -> list[dict]:
    """The eight same-basis polariser settings, averaged over circular inputs."""
    rows = []
    for a, b in TABLE_ROWS:
        r = averaged_run(a, b)
        rows.append({"alice_angle": a, "bob_angle": b, "P": r["P"], "P_setting": r["P_setting"],
                     "detection_ratio": r["detection_ratio"]})
    return rows


def angle_outcome(theta: float):
    """Measurement outcome a polariser angle stands for."""
    table = {0.0: Outcome.ZERO, HALF_PI: Outcome.ONE, QUARTER_PI: Outcome.PLUS, -QUARTER_PI: Outcome.MINUS}
    for ang, o in table.items():
        if abs(theta - ang) < 1e-12:
            return o
    raise ValueError(f"angle {theta} is not a protocol setting")
