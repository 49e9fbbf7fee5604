"""Dense complex operator algebra for few-qubit systems.

Everything here is a small immutable value: operators carry their
subsystem dimensions so tensor products and partial traces can check
wiring, and instruments check completeness when built.

Conventions
-----------
The computational basis is ``|0>, |1>`` and ``|+-> = (|0> +- |1>)/sqrt(2)``.
Outcome labels are ``0, 1, +, -``; the key bit is 0 for ``0, +`` and 1 for
``1, -``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances shared by every module.

    Attributes
    ----------
    atol : float
        Construction checks (completeness, unitarity, positivity).
    derived : float
        Comparison of two independently derived quantities.
    null : float
        Probability below which a branch is treated as empty.
    """

    atol: float = 1e-10
    derived: float = 1e-9
    null: float = 1e-12


policy = NumericPolicy()


def set_policy(new: NumericPolicy) -> NumericPolicy:
    """Install a new global policy and return the previous one."""
    global policy
    old, policy = policy, new
    return old


class WiringError(ValueError):
    """Subsystem indices or dimensions do not fit together."""


class DegenerateInputError(ValueError):
    """An input carries zero weight where a normalisation is required."""


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Square complex matrix with an explicit subsystem dimension list.

    Parameters
    ----------
    entries : array_like
        Square matrix; copied and made read-only.
    dims : sequence of int, optional
        Subsystem dimensions, product must equal the side length. Defaults to
        a single subsystem.
    """

    entries: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise WiringError(f"operator must be square, got shape {m.shape}")
        dims = tuple(int(d) for d in self.dims) or (m.shape[0],)
        if math.prod(dims) != m.shape[0]:
            raise WiringError(f"dims {dims} do not multiply to side length {m.shape[0]}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        if self.dim != other.dim:
            raise WiringError(f"cannot multiply {self.dims} by {other.dims}")
        return DenseOperator(self.entries @ other.entries, self.dims)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        if self.dims != other.dims:
            raise WiringError(f"cannot add {self.dims} and {other.dims}")
        return DenseOperator(self.entries + other.entries, self.dims)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return self + (-1.0) * other

    def __mul__(self, c: complex) -> "DenseOperator":
        return DenseOperator(c * self.entries, self.dims)

    __rmul__ = __mul__

    def allclose(self, other: "DenseOperator", atol: float | None = None) -> bool:
        atol = policy.atol if atol is None else atol
        return self.dims == other.dims and np.abs(self.entries - other.entries).max() <= atol

    def is_hermitian(self, atol: float | None = None) -> bool:
        atol = policy.atol if atol is None else atol
        return float(np.abs(self.entries - self.entries.conj().T).max()) <= atol

    def is_psd(self, atol: float | None = None) -> bool:
        atol = policy.atol if atol is None else atol
        if not self.is_hermitian(atol):
            return False
        h = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(h).min()) >= -atol

    def is_state(self, atol: float | None = None) -> bool:
        """Hermitian, unit trace and positive semidefinite within ``atol``."""
        atol = policy.atol if atol is None else atol
        return abs(self.trace() - 1.0) <= atol and self.is_psd(atol)


def identity(dims: int | Sequence[int]) -> DenseOperator:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return DenseOperator(np.eye(math.prod(dims)), dims)


def projector(v: np.ndarray, dims: Sequence[int] = ()) -> DenseOperator:
    v = np.asarray(v, dtype=complex)
    return DenseOperator(np.outer(v, v.conj()), tuple(dims))


def require_state(rho: DenseOperator, what: str = "state") -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid density operator."""
    if not rho.is_hermitian():
        raise ValueError(f"{what} is not Hermitian")
    if not rho.is_state():
        raise ValueError(f"{what} is not a valid density operator")


KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KETP = (KET0 + KET1) / math.sqrt(2)
KETM = (KET0 - KET1) / math.sqrt(2)

I2 = identity(2)
SX = DenseOperator([[0, 1], [1, 0]])
SY = DenseOperator([[0, -1j], [1j, 0]])
SZ = DenseOperator([[1, 0], [0, -1]])
PAULIS = (I2, SX, SY, SZ)


# ---------------------------------------------------------------------------
# outcome labels
# ---------------------------------------------------------------------------


class Basis(enum.Enum):
    Z = "z"
    X = "x"


class Outcome(enum.Enum):
    """Measurement outcome labels ``0, 1, +, -``."""

    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (Outcome.ZERO, Outcome.ONE) else Basis.X

    @property
    def key_bit(self) -> int:
        return 0 if self in (Outcome.ZERO, Outcome.PLUS) else 1

    @property
    def ket(self) -> np.ndarray:
        return _KETS[self]

    def __str__(self) -> str:
        return self.value


_KETS = {Outcome.ZERO: KET0, Outcome.ONE: KET1, Outcome.PLUS: KETP, Outcome.MINUS: KETM}
OUTCOMES = tuple(Outcome)


def key_bit(o: Outcome | str) -> int:
    return Outcome(o).key_bit if isinstance(o, str) else o.key_bit


def same_basis(a: Outcome, b: Outcome) -> bool:
    return a.basis is b.basis


# ---------------------------------------------------------------------------
# instruments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrausInstrument:
    """Outcome-labelled Kraus operators forming a trace-preserving instrument.

    Parameters
    ----------
    outcomes : sequence of (label, sequence of DenseOperator)
        Kraus operators grouped by outcome.
    check : bool
        Assert completeness at construction. Disable only for deliberately
        partial instruments (e.g. a single branch used inside a larger sum).
    """

    outcomes: tuple[tuple[object, tuple[DenseOperator, ...]], ...]
    check: bool = True

    def __post_init__(self):
        outs = tuple((label, tuple(ks)) for label, ks in self.outcomes)
        if not outs or not all(ks for _, ks in outs):
            raise ValueError("instrument needs at least one Kraus operator per outcome")
        object.__setattr__(self, "outcomes", outs)
        first = outs[0][1][0]
        for _, ks in outs:
            for k in ks:
                if k.dims != first.dims:
                    raise WiringError(f"Kraus dims {k.dims} differ from {first.dims}")
        if self.check:
            dev = self.completeness_deviation()
            if dev > policy.atol:
                raise ValueError(f"instrument is not complete: max |sum K^dag K - 1| = {dev:.3e}")
            for label, _ in outs:
                gap = np.eye(first.dim) - self.effect(label).entries
                if np.linalg.eigvalsh(0.5 * (gap + gap.conj().T)).min() < -policy.atol:
                    raise ValueError(f"outcome {label!r} effect exceeds identity")

    @classmethod
    def from_dict(cls, d: Mapping[object, Iterable[DenseOperator]], check: bool = True) -> "KrausInstrument":
        return cls(tuple((k, tuple(v)) for k, v in d.items()), check)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.outcomes[0][1][0].dims

    input_dims = output_dims = dims

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.outcomes)

    def kraus(self, label) -> tuple[DenseOperator, ...]:
        for lab, ks in self.outcomes:
            if lab == label:
                return ks
        raise KeyError(label)

    def all_kraus(self) -> list[DenseOperator]:
        return [k for _, ks in self.outcomes for k in ks]

    def effect(self, label) -> DenseOperator:
        ks = self.kraus(label)
        return DenseOperator(sum(k.entries.conj().T @ k.entries for k in ks), ks[0].dims)

    def completeness_deviation(self) -> float:
        ks = self.all_kraus()
        s = sum(k.entries.conj().T @ k.entries for k in ks)
        return float(np.abs(s - np.eye(ks[0].dim)).max())


def apply_instrument(inst: KrausInstrument, state: DenseOperator) -> dict:
    """Born probabilities and normalised post-measurement states.

    Returns
    -------
    dict
        ``label -> (probability, post_state or None)``; the post-state is
        ``None`` when the probability is below the null threshold.
    """
    if state.dims != inst.dims:
        raise WiringError(f"state dims {state.dims} do not match instrument dims {inst.dims}")
    require_state(state)
    out = {}
    rho = state.entries
    for label, ks in inst.outcomes:
        m = sum(k.entries @ rho @ k.entries.conj().T for k in ks)
        p = float(np.trace(m).real)
        post = DenseOperator(m / p, state.dims) if p > policy.null else None
        out[label] = (p, post)
    return out


# ---------------------------------------------------------------------------
# tensor structure
# ---------------------------------------------------------------------------


def tensor(*ops: DenseOperator) -> DenseOperator:
    """Kronecker product; dims concatenate left to right."""
    if not ops:
        raise ValueError("tensor needs at least one operator")
    m = ops[0].entries
    dims = ops[0].dims
    for op in ops[1:]:
        m = np.kron(m, op.entries)
        dims = dims + op.dims
    return DenseOperator(m, dims)


def partial_trace(op: DenseOperator, keep: Iterable[int]) -> DenseOperator:
    """Trace out every subsystem not listed in ``keep``.

    Kept subsystems stay in their original relative order.
    """
    keep = sorted(set(int(k) for k in keep))
    n = len(op.dims)
    if any(k < 0 or k >= n for k in keep):
        raise WiringError(f"keep indices {keep} invalid for dims {op.dims}")
    t = op.entries.reshape(op.dims + op.dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise WiringError("too many subsystems for partial_trace")
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kd = tuple(op.dims[k] for k in keep)
    side = math.prod(kd) if kd else 1
    return DenseOperator(red.reshape(side, side), kd or (1,))


def permute_subsystems(op: DenseOperator, order: Sequence[int]) -> DenseOperator:
    """Reorder subsystems so that new subsystem ``k`` is old ``order[k]``."""
    n = len(op.dims)
    if sorted(order) != list(range(n)):
        raise WiringError(f"{order} is not a permutation of {n} subsystems")
    t = op.entries.reshape(op.dims + op.dims)
    t = t.transpose(list(order) + [n + k for k in order])
    dims = tuple(op.dims[k] for k in order)
    return DenseOperator(t.reshape(op.dim, op.dim), dims)


def embed_operator(op: DenseOperator, targets: Sequence[int], dims: Sequence[int]) -> DenseOperator:
    """Act with ``op`` on subsystems ``targets`` of a register with ``dims``.

    ``op.dims`` must list the target dimensions in the order of ``targets``.
    """
    dims = tuple(dims)
    targets = list(targets)
    if len(set(targets)) != len(targets) or any(t < 0 or t >= len(dims) for t in targets):
        raise WiringError(f"bad targets {targets} for dims {dims}")
    if tuple(dims[t] for t in targets) != op.dims:
        raise WiringError(f"operator dims {op.dims} do not fit targets {targets} of {dims}")
    rest = [k for k in range(len(dims)) if k not in targets]
    full = tensor(op, identity(tuple(dims[k] for k in rest))) if rest else op
    order_now = targets + rest
    # position of each original subsystem in the current ordering
    inv = [order_now.index(k) for k in range(len(dims))]
    return permute_subsystems(full, inv)


# ---------------------------------------------------------------------------
# information
# ---------------------------------------------------------------------------


def binary_entropy(q: float) -> float:
    """Binary Shannon entropy in bits, with ``0 log 0 = 0``."""
    q = float(q)
    if not 0.0 <= q <= 1.0:
        if -policy.null <= q < 0.0:
            q = 0.0
        elif 1.0 < q <= 1.0 + policy.null:
            q = 1.0
        else:
            raise ValueError(f"binary_entropy domain is [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def mutual_information(joint: np.ndarray) -> float:
    """Mutual information in bits of a 2-D joint probability table."""
    p = np.asarray(joint, dtype=float)
    p = p / p.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    mask = p > 0
    return float((p[mask] * np.log2(p[mask] / (px @ py)[mask])).sum())
