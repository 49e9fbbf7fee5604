"""Monte Carlo runs of the switch key-distribution protocol.

Each round prepares ``rho = 1/2`` and ``omega = |+><+|``, sends the target
through the switch with Alice's and Bob's four-outcome instruments (and any
eavesdroppers), compares bases, and measures the control in ``{|+>, |->}``.
Rounds are sampled from the exact joint outcome table, one counter-based
uniform per round, so a round's result depends only on ``(seed, index)``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .attacks import AttackParams, attack_branches
from .procmat import JointKrausAttack, outcome_table
from .qmath import KETM, KETP, OUTCOMES, Basis, Outcome, identity, policy, projector
from .switch import SwitchSpec, measurement_instrument, switch_branches

CONTROL = ("+", "-")
RECORD_FIELDS = ("round_index", "alice_basis", "bob_basis", "alice_outcome", "bob_outcome",
                 "kept", "control_outcome", "key_bit_alice", "key_bit_bob")
SUMMARY_FIELDS = ("rounds", "kept", "kept_fraction", "detection_rate", "detection_rate_discarded",
                  "qber", "minus_count", "minus_count_discarded", "error_count")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    alice_basis: Basis
    bob_basis: Basis
    alice_outcome: Outcome
    bob_outcome: Outcome
    kept: bool
    control_outcome: str
    key_bit_alice: int | None = None
    key_bit_bob: int | None = None

    def as_row(self) -> dict:
        return {
            "round_index": self.round_index,
            "alice_basis": self.alice_basis.value,
            "bob_basis": self.bob_basis.value,
            "alice_outcome": self.alice_outcome.value,
            "bob_outcome": self.bob_outcome.value,
            "kept": self.kept,
            "control_outcome": self.control_outcome,
            "key_bit_alice": self.key_bit_alice,
            "key_bit_bob": self.key_bit_bob,
        }

    @classmethod
    def from_row(cls, row: dict) -> "RoundRecord":
        def bit(v):
            return None if v in (None, "") else int(v)

        kept = row["kept"]
        if isinstance(kept, str):
            kept = kept.strip().lower() == "true"
        return cls(int(row["round_index"]), Basis(row["alice_basis"]), Basis(row["bob_basis"]),
                   Outcome(row["alice_outcome"]), Outcome(row["bob_outcome"]), bool(kept),
                   row["control_outcome"], bit(row["key_bit_alice"]), bit(row["key_bit_bob"]))


def _record(index: int, cell: int) -> RoundRecord:
    a, rest = divmod(int(cell), 8)
    b, c = divmod(rest, 2)
    ia, ib = OUTCOMES[a], OUTCOMES[b]
    kept = ia.basis is ib.basis
    return RoundRecord(index, ia.basis, ib.basis, ia, ib, kept, CONTROL[c],
                       ia.key_bit if kept else None, ib.key_bit if kept else None)


# ---------------------------------------------------------------------------
# exact outcome tables
# ---------------------------------------------------------------------------


def _control_split(op) -> tuple[float, float]:
    c = op.entries.reshape(op.dim // 2, 2, op.dim // 2, 2)
    c = np.einsum("aiaj->ij", c)
    return float((KETP.conj() @ c @ KETP).real), float((KETM.conj() @ c @ KETM).real)


@lru_cache(maxsize=64)
def _params_table(params: AttackParams | None) -> np.ndarray:
    if params is None:
        meas = measurement_instrument((2,), 0)
        spec = SwitchSpec((meas, meas), projector(KETP), identity(2) * 0.5)
        branches = {(k[0], k[1]): v for k, v in switch_branches(spec).items()}
    else:
        branches = attack_branches(params)
    t = np.zeros((4, 4, 2))
    for (i, j), op in branches.items():
        t[OUTCOMES.index(i), OUTCOMES.index(j)] = _control_split(op)
    return t


def exact_table(attack: AttackParams | JointKrausAttack | None = None) -> np.ndarray:
    """``P(alice outcome, bob outcome, control)`` with axes (4, 4, 2).

    Entries below the null threshold are set to exactly zero, so outcomes
    that cannot happen are never sampled.
    """
    if attack is None or isinstance(attack, AttackParams):
        t = _params_table(attack).copy()
    elif isinstance(attack, JointKrausAttack):
        t = outcome_table(attack)
    else:
        raise TypeError(f"unsupported attack {type(attack).__name__}")
    t[t < policy.null] = 0.0
    s = t.sum()
    if abs(s - 1.0) > policy.derived:
        raise AssertionError(f"outcome table sums to {s}")
    return t / s


def _cdf(table: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(table.reshape(-1))
    cdf[-1] = 1.0
    # zero-width bins sit behind a non-zero one and can never be selected
    last = np.flatnonzero(table.reshape(-1) > 0)[-1]
    cdf[last:] = 1.0
    return cdf


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Transcript:
    """Per-round cells plus the seed and configuration that produced them.

    ``cells[k] = 8 * alice_index + 2 * bob_index + control_index`` with
    indices into ``OUTCOMES`` and ``("+", "-")``.
    """

    cells: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def records(self) -> Iterator[RoundRecord]:
        for k, c in enumerate(self.cells):
            yield _record(k, c)

    @property
    def rounds(self) -> list[RoundRecord]:
        return list(self.records())


def run_round(attack, seed: int, index: int) -> RoundRecord:
    """Sample round ``index`` of the session with ``seed``."""
    cdf = _cdf(exact_table(attack))
    u = _kernels.counter_uniforms(seed, index, 1)
    return _record(index, _kernels.sample_categorical(cdf, u)[0])


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_session(rounds: int, attack=None, seed: int = 0, workers: int = 1,
                chunk: int = 1 << 16, config: dict | None = None) -> Transcript:
    """Sample ``rounds`` rounds; the result does not depend on ``workers``."""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    cdf = _cdf(exact_table(attack))
    starts = list(range(0, rounds, chunk))

    def block(start: int) -> np.ndarray:
        n = min(chunk, rounds - start)
        return _kernels.sample_categorical(cdf, _kernels.counter_uniforms(seed, start, n))

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return Transcript(np.concatenate(parts).astype(np.int8), seed, dict(config or {}))


def session_stats(t: Transcript) -> dict:
    """Detection and error rates.

    ``detection_rate`` counts ``-`` control outcomes over kept (same-basis)
    rounds; discarded rounds are reported separately.
    """
    if len(t) == 0:
        raise ValueError("empty transcript")
    a, rest = np.divmod(t.cells.astype(np.int64), 8)
    b, c = np.divmod(rest, 2)
    kept = (a < 2) == (b < 2)
    bit_a = np.array([o.key_bit for o in OUTCOMES])[a]
    bit_b = np.array([o.key_bit for o in OUTCOMES])[b]
    minus = c == 1
    n_kept = int(kept.sum())
    n_disc = len(t) - n_kept
    errors = int((kept & (bit_a != bit_b)).sum())
    mk = int((minus & kept).sum())
    md = int((minus & ~kept).sum())
    nan = float("nan")
    return {
        "rounds": len(t),
        "kept": n_kept,
        "kept_fraction": n_kept / len(t),
        "detection_rate": mk / n_kept if n_kept else nan,
        "detection_rate_discarded": md / n_disc if n_disc else nan,
        "qber": errors / n_kept if n_kept else nan,
        "minus_count": mk,
        "minus_count_discarded": md,
        "error_count": errors,
        "detections_with_error": int((minus & kept & (bit_a != bit_b)).sum()),
    }


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def fmt(v):
    """Floats at 12 significant digits; other values unchanged."""
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v


def write_records(records: Iterable[RoundRecord], stream, fmt_name: str = "json") -> None:
    """Write one record per line (JSON lines) or a CSV table."""
    if fmt_name == "json":
        for r in records:
            stream.write(json.dumps(r.as_row()) + "\n")
    elif fmt_name == "csv":
        w = csv.DictWriter(stream, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.as_row())
    else:
        raise ValueError(f"unknown format {fmt_name!r}")


def read_records(stream, fmt_name: str = "json") -> list[RoundRecord]:
    if fmt_name == "json":
        return [RoundRecord.from_row(json.loads(line)) for line in stream if line.strip()]
    if fmt_name == "csv":
        return [RoundRecord.from_row(row) for row in csv.DictReader(stream)]
    raise ValueError(f"unknown format {fmt_name!r}")


def summary_document(t: Transcript) -> dict:
    stats = {k: fmt(v) for k, v in session_stats(t).items()}
    return {"seed": t.seed, "config": t.config, "stats": stats}


def records_text(t: Transcript, fmt_name: str = "json") -> str:
    buf = io.StringIO()
    write_records(t.records(), buf, fmt_name)
    return buf.getvalue()
