"""Dense state-vector engine: single-precision amplitudes, gate clustering,
cache-sized slice scheduling, and the amplitude text format.

Amplitudes are kept in complex64; norms and amplitude accumulation use
double precision.  Gates tolerate arbitrary (including non-unitary) 2x2
operators so the path-sum engine can reuse these kernels for projector
terms.  A state may carry an optional zero-block mask; kernels skip runs
of all-zero blocks and keep the mask consistent, which never changes the
numerical result.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    Circuit,
    DIAGONAL_KINDS,
    Gate,
    GateKind,
    ONE_QUBIT_KINDS,
    gate_matrix,
)

DTYPE = np.complex64
ACC_DTYPE = np.complex128
DEFAULT_SLICE_BYTES = 262144  # matches a typical per-core L2 cache
ZERO_BLOCK_AMPS = 64  # granularity of the zero-block occupancy mask

# e^(i*pi*k/4) for k in 0..7; T-count and CZ-parity phases live on this wheel.
PHASE8 = np.exp(0.25j * np.pi * np.arange(8)).astype(DTYPE)


class MemoryBudgetError(MemoryError):
    pass


@dataclass
class StateBlock:
    """2**n_qubits complex64 amplitudes, qubit 0 in the most significant bit."""

    n_qubits: int
    amps: np.ndarray
    zero_mask: np.ndarray | None = None  # True marks an all-zero block

    @classmethod
    def zero_state(cls, n_qubits: int) -> StateBlock:
        amps = np.zeros(2**n_qubits, dtype=DTYPE)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> StateBlock:
        mask = None if self.zero_mask is None else self.zero_mask.copy()
        return StateBlock(self.n_qubits, self.amps.copy(), mask)

    def norm_squared(self) -> float:
        # Accumulate in double precision regardless of amplitude dtype.
        return float(np.einsum("i,i->", self.amps, self.amps.conj(), dtype=ACC_DTYPE).real)


def refresh_zero_mask(state: StateBlock, block_amps: int = ZERO_BLOCK_AMPS) -> np.ndarray:
    """Recompute the occupancy mask: True for blocks that are exactly zero."""
    block_amps = min(block_amps, len(state.amps))
    view = state.amps.reshape(-1, block_amps)
    state.zero_mask = ~np.any(view != 0, axis=1)
    return state.zero_mask


def _nonzero_runs(mask: np.ndarray, block_amps: int):
    """Yield (start, stop) amplitude ranges covering consecutive live blocks."""
    live = np.flatnonzero(~mask)
    if len(live) == 0:
        return
    breaks = np.flatnonzero(np.diff(live) > 1)
    starts = np.concatenate(([0], breaks + 1))
    stops = np.concatenate((breaks, [len(live) - 1]))
    for s, e in zip(starts, stops):
        yield int(live[s]) * block_amps, (int(live[e]) + 1) * block_amps


def _mat1_on_range(amps: np.ndarray, u: np.ndarray, shift: int) -> None:
    # In-place 2x2 update on an aligned range where the pair stride fits.
    u = np.asarray(u, dtype=amps.dtype)
    view = amps.reshape(-1, 2, 1 << shift)
    x0 = view[:, 0, :]
    x1 = view[:, 1, :]
    n0 = u[0, 0] * x0 + u[0, 1] * x1
    n1 = u[1, 0] * x0 + u[1, 1] * x1
    view[:, 0, :] = n0
    view[:, 1, :] = n1


def apply_matrix1(state: StateBlock, u: np.ndarray, qubit: int) -> None:
    """Apply a 2x2 operator to one qubit, honoring the zero-block mask."""
    n = state.n_qubits
    shift = n - 1 - qubit
    mask = state.zero_mask
    if mask is None:
        _mat1_on_range(state.amps, u, shift)
        return
    block = len(state.amps) // len(mask)
    if (1 << shift) < block:
        # Pairs stay inside a block; zero blocks map to zero blocks.
        for start, stop in _nonzero_runs(mask, block):
            _mat1_on_range(state.amps[start:stop], u, shift)
        return
    u = np.asarray(u, dtype=state.amps.dtype)
    pbit = (1 << shift) // block
    for j in range(len(mask)):
        if j & pbit:
            continue
        k = j | pbit
        if mask[j] and mask[k]:
            continue
        x0 = state.amps[j * block : (j + 1) * block]
        x1 = state.amps[k * block : (k + 1) * block]
        n0 = u[0, 0] * x0 + u[0, 1] * x1
        n1 = u[1, 0] * x0 + u[1, 1] * x1
        state.amps[j * block : (j + 1) * block] = n0
        state.amps[k * block : (k + 1) * block] = n1
        mask[j] = mask[k] = False


def apply_diag1(state: StateBlock, diag: np.ndarray, qubit: int) -> None:
    """Apply a diagonal 1q operator diag(d0, d1); may grow the zero mask."""
    n = state.n_qubits
    shift = n - 1 - qubit
    d = np.asarray(diag, dtype=state.amps.dtype)
    mask = state.zero_mask
    if mask is None:
        view = state.amps.reshape(-1, 2, 1 << shift)
        view[:, 0, :] *= d[0]
        view[:, 1, :] *= d[1]
        return
    block = len(state.amps) // len(mask)
    if (1 << shift) < block:
        for start, stop in _nonzero_runs(mask, block):
            view = state.amps[start:stop].reshape(-1, 2, 1 << shift)
            view[:, 0, :] *= d[0]
            view[:, 1, :] *= d[1]
        return
    pbit = (1 << shift) // block
    for j in range(len(mask)):
        if mask[j]:
            continue
        value = d[1] if j & pbit else d[0]
        state.amps[j * block : (j + 1) * block] *= value
        if value == 0:
            mask[j] = True


def _mat2_permuted(u: np.ndarray, first_is_low: bool) -> np.ndarray:
    # Gate matrices index |first second>; swap if the low qubit is listed second.
    if first_is_low:
        return u
    perm = [0, 2, 1, 3]
    return u[np.ix_(perm, perm)]


def apply_matrix2(state: StateBlock, u: np.ndarray, qa: int, qb: int) -> None:
    """Apply a 4x4 operator to qubit pair (qa, qb); qa indexes the high bit of u."""
    n = state.n_qubits
    lo, hi = (qa, qb) if qa < qb else (qb, qa)
    m = np.asarray(_mat2_permuted(u, qa < qb), dtype=state.amps.dtype)
    if state.zero_mask is not None:
        # Non-diagonal two-qubit updates repopulate blocks; rebuild the mask after.
        block = len(state.amps) // len(state.zero_mask)
        state.zero_mask = None
        _apply_mat2_dense(state.amps, m, n, lo, hi)
        refresh_zero_mask(state, block)
        return
    _apply_mat2_dense(state.amps, m, n, lo, hi)


def _apply_mat2_dense(amps: np.ndarray, m: np.ndarray, n: int, lo: int, hi: int) -> None:
    view = amps.reshape(1 << lo, 2, 1 << (hi - lo - 1), 2, -1)
    x = [view[:, 0, :, 0, :], view[:, 0, :, 1, :], view[:, 1, :, 0, :], view[:, 1, :, 1, :]]
    out = [m[i, 0] * x[0] + m[i, 1] * x[1] + m[i, 2] * x[2] + m[i, 3] * x[3] for i in range(4)]
    view[:, 0, :, 0, :] = out[0]
    view[:, 0, :, 1, :] = out[1]
    view[:, 1, :, 0, :] = out[2]
    view[:, 1, :, 1, :] = out[3]


def apply_diag2(state: StateBlock, diag4: np.ndarray, qa: int, qb: int) -> None:
    """Apply a diagonal 4x4 operator given as its diagonal (|qa qb> order)."""
    n = state.n_qubits
    sa, sb = n - 1 - qa, n - 1 - qb
    d = np.asarray(diag4, dtype=state.amps.dtype)
    mask = state.zero_mask
    block = None if mask is None else len(state.amps) // len(mask)
    ranges = (
        [(0, len(state.amps))] if mask is None else list(_nonzero_runs(mask, block))
    )
    for start, stop in ranges:
        idx = np.arange(start, stop, dtype=np.int64)
        sel = (((idx >> sa) & 1) << 1) | ((idx >> sb) & 1)
        state.amps[start:stop] *= d.take(sel)


def apply_gate(state: StateBlock, gate: Gate) -> None:
    """Apply one circuit gate, using diagonal fast paths for T and CZ."""
    u = gate_matrix(gate)
    if gate.kind is GateKind.T:
        apply_diag1(state, np.diag(u), gate.qubits[0])
    elif gate.kind is GateKind.CZ:
        apply_diag2(state, np.diag(u), gate.qubits[0], gate.qubits[1])
    elif gate.kind in ONE_QUBIT_KINDS:
        apply_matrix1(state, u, gate.qubits[0])
    else:
        apply_matrix2(state, u, gate.qubits[0], gate.qubits[1])


class ClusterKind(enum.Enum):
    DIAGONAL = "diagonal"
    X_HALF = "x_1_2"
    Y_HALF = "y_1_2"
    H = "h"
    GENERIC = "generic"


_KIND_TO_CLUSTER = {
    GateKind.X_HALF: ClusterKind.X_HALF,
    GateKind.Y_HALF: ClusterKind.Y_HALF,
    GateKind.H: ClusterKind.H,
}


@dataclass
class GateCluster:
    """Commuting gate group applied as one unit.

    DIAGONAL clusters hold per-qubit T counts mod 8 plus CZ pair parities;
    the named one-qubit kinds hold a bit-encoded qubit set; GENERIC keeps
    its gates verbatim.
    """

    kind: ClusterKind
    n_qubits: int
    qubit_mask: int = 0
    t_counts: np.ndarray | None = None
    cz_parity: dict[tuple[int, int], int] = field(default_factory=dict)
    gates: list[Gate] = field(default_factory=list)

    @property
    def diagonal(self) -> bool:
        return self.kind is ClusterKind.DIAGONAL

    def add(self, gate: Gate) -> None:
        self.gates.append(gate)
        for q in gate.qubits:
            self.qubit_mask |= 1 << q
        if gate.kind is GateKind.T:
            self.t_counts[gate.qubits[0]] = (self.t_counts[gate.qubits[0]] + 1) % 8
        elif gate.kind is GateKind.CZ:
            pair = tuple(sorted(gate.qubits))
            self.cz_parity[pair] = self.cz_parity.get(pair, 0) ^ 1


def _gate_cluster_kind(gate: Gate) -> ClusterKind:
    if gate.kind in DIAGONAL_KINDS:
        return ClusterKind.DIAGONAL
    return _KIND_TO_CLUSTER.get(gate.kind, ClusterKind.GENERIC)


def _gate_mask(gate: Gate) -> int:
    m = 0
    for q in gate.qubits:
        m |= 1 << q
    return m


def cluster_gates(circuit: Circuit) -> list[GateCluster]:
    """Group gates into clusters; replaying clusters in order is equivalent.

    A gate may hop backwards over clusters it commutes with (disjoint
    qubits, or both diagonal) and merges into the nearest cluster of its
    own kind that can take it.
    """
    n = circuit.n_qubits
    clusters: list[GateCluster] = []
    for gate in circuit.gates:
        kind = _gate_cluster_kind(gate)
        gmask = _gate_mask(gate)
        gdiag = gate.kind in DIAGONAL_KINDS
        target = None
        for cl in reversed(clusters):
            if cl.kind is kind and _can_take(cl, gate, kind, gmask):
                target = cl
                break
            commutes = (cl.qubit_mask & gmask) == 0 or (cl.diagonal and gdiag)
            if not commutes:
                break
        if target is None:
            target = GateCluster(kind, n)
            if kind is ClusterKind.DIAGONAL:
                target.t_counts = np.zeros(n, dtype=np.int8)
            clusters.append(target)
        target.add(gate)
    return [cl for cl in clusters if not _cluster_is_identity(cl)]


def _can_take(cl: GateCluster, gate: Gate, kind: ClusterKind, gmask: int) -> bool:
    if kind is ClusterKind.DIAGONAL:
        return True
    if kind is ClusterKind.GENERIC:
        return True
    return (cl.qubit_mask & gmask) == 0


def _cluster_is_identity(cl: GateCluster) -> bool:
    # T counts and CZ parities can cancel to nothing.
    if cl.kind is not ClusterKind.DIAGONAL:
        return False
    return not np.any(cl.t_counts) and not any(cl.cz_parity.values())


def _diag_cluster_terms(cl: GateCluster):
    tq = [(q, int(c)) for q, c in enumerate(cl.t_counts) if c]
    pairs = [p for p, par in cl.cz_parity.items() if par]
    return tq, pairs


def apply_diagonal_cluster(
    state_amps: np.ndarray, cluster: GateCluster, n_qubits: int, base_index: int = 0
) -> None:
    """One read-modify-write pass applying all T counts and CZ parities.

    The phase exponent is accumulated mod 8 per amplitude index, so the
    whole cluster costs a single multiplier lookup per amplitude.
    """
    tq, pairs = _diag_cluster_terms(cluster)
    if not tq and not pairs:
        return
    idx = np.arange(base_index, base_index + len(state_amps), dtype=np.int64)
    exp = np.zeros(len(state_amps), dtype=np.int64)
    for q, count in tq:
        shift = n_qubits - 1 - q
        exp += count * ((idx >> shift) & 1)
    if pairs:
        par = np.zeros(len(state_amps), dtype=np.int64)
        for a, b in pairs:
            par ^= (idx >> (n_qubits - 1 - a)) & (idx >> (n_qubits - 1 - b)) & 1
        exp += par << 2
    state_amps *= PHASE8.take(exp & 7)


def _apply_cluster_dense(state: StateBlock, cluster: GateCluster) -> None:
    if cluster.kind is ClusterKind.DIAGONAL:
        if state.zero_mask is None:
            apply_diagonal_cluster(state.amps, cluster, state.n_qubits)
        else:
            block = len(state.amps) // len(state.zero_mask)
            for start, stop in _nonzero_runs(state.zero_mask, block):
                apply_diagonal_cluster(state.amps[start:stop], cluster, state.n_qubits, start)
    elif cluster.kind is ClusterKind.GENERIC:
        for gate in cluster.gates:
            apply_gate(state, gate)
    else:
        u = gate_matrix(cluster.gates[0])
        q = 0
        mask = cluster.qubit_mask
        while mask:
            if mask & 1:
                apply_matrix1(state, u, q)
            mask >>= 1
            q += 1


def apply_cluster(state: StateBlock, cluster: GateCluster) -> None:
    """Apply a cluster to the whole state."""
    _apply_cluster_dense(state, cluster)


def _slice_local(cluster: GateCluster, n: int, slice_amps: int) -> bool:
    # A cluster can run inside one slice when every touched pair stays inside.
    if cluster.kind is ClusterKind.DIAGONAL:
        return True
    if cluster.kind is ClusterKind.GENERIC:
        return False
    lowest = n  # qubits >= n - log2(slice) have strides below the slice length
    mask = cluster.qubit_mask
    q = 0
    while mask:
        if mask & 1:
            lowest = min(lowest, q)
        mask >>= 1
        q += 1
    return (1 << (n - 1 - lowest)) < slice_amps if lowest < n else True


def _apply_cluster_slice(
    amps: np.ndarray, cluster: GateCluster, n: int, base: int, slice_amps: int
) -> None:
    if cluster.kind is ClusterKind.DIAGONAL:
        apply_diagonal_cluster(amps, cluster, n, base)
        return
    u = gate_matrix(cluster.gates[0])
    mask = cluster.qubit_mask
    q = 0
    while mask:
        if mask & 1:
            _mat1_on_range(amps, u, n - 1 - q)
        mask >>= 1
        q += 1


def run_full(
    circuit: Circuit,
    slice_bytes: int = DEFAULT_SLICE_BYTES,
    mem_limit: int | None = None,
) -> StateBlock:
    """Simulate the full circuit from |0...0>, streaming cache-sized slices.

    Consecutive slice-local clusters are fused: each slice passes through
    the whole run before the next slice is touched.  The result does not
    depend on slice_bytes.
    """
    n = circuit.n_qubits
    required = (2**n) * np.dtype(DTYPE).itemsize
    if mem_limit is not None and required > mem_limit:
        raise MemoryBudgetError(
            f"state of {n} qubits requires {required} bytes, budget is {mem_limit}"
        )
    state = StateBlock.zero_state(n)
    clusters = cluster_gates(circuit)
    slice_amps = 1 << max(1, (slice_bytes // np.dtype(DTYPE).itemsize).bit_length() - 1)
    slice_amps = min(slice_amps, len(state.amps))

    i = 0
    while i < len(clusters):
        if _slice_local(clusters[i], n, slice_amps):
            j = i
            while j < len(clusters) and _slice_local(clusters[j], n, slice_amps):
                j += 1
            for base in range(0, len(state.amps), slice_amps):
                chunk = state.amps[base : base + slice_amps]
                for cl in clusters[i:j]:
                    _apply_cluster_slice(chunk, cl, n, base, slice_amps)
            i = j
        else:
            apply_cluster(state, clusters[i])
            i += 1
    return state


@dataclass
class AmplitudeBatch:
    """Requested basis-state indices with their (accumulated) amplitudes."""

    indices: np.ndarray  # int64
    amps: np.ndarray  # complex128

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.amps = np.asarray(self.amps, dtype=ACC_DTYPE)
        if self.indices.shape != self.amps.shape:
            raise ValueError("indices and amplitudes differ in length")

    @classmethod
    def zeros(cls, indices) -> AmplitudeBatch:
        indices = np.asarray(indices, dtype=np.int64)
        return cls(indices, np.zeros(len(indices), dtype=ACC_DTYPE))

    def copy(self) -> AmplitudeBatch:
        return AmplitudeBatch(self.indices.copy(), self.amps.copy())


def fetch_amplitudes(state: StateBlock, indices) -> AmplitudeBatch:
    """Read amplitudes at the requested indices, in request order."""
    idx = np.asarray(indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= len(state.amps)):
        raise IndexError("amplitude index outside the state")
    return AmplitudeBatch(idx, state.amps[idx].astype(ACC_DTYPE))


def write_amplitudes(
    path, batch: AmplitudeBatch, digits: int = 9, header: dict | None = None
) -> None:
    """Write "index_hex re im" lines, scientific notation with `digits` significant digits."""
    fmt = f"%x %.{digits - 1}e %.{digits - 1}e"
    with open(path, "w") as f:
        for key, value in (header or {}).items():
            f.write(f"# {key} {value}\n")
        for i, a in zip(batch.indices, batch.amps):
            f.write(fmt % (i, a.real, a.imag) + "\n")


def read_amplitudes(path) -> tuple[AmplitudeBatch, dict]:
    """Parse an amplitude file; returns the batch and any '# key value' header."""
    header: dict[str, str] = {}
    indices: list[int] = []
    amps: list[complex] = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip().split(None, 1)
                if len(body) == 2:
                    header[body[0]] = body[1]
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"amplitude line {lineno}: expected 3 fields, got {raw!r}")
            indices.append(int(parts[0], 16))
            amps.append(complex(float(parts[1]), float(parts[2])))
    return AmplitudeBatch(np.array(indices, dtype=np.int64), np.array(amps)), header
