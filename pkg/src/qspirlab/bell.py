"""Two-server retrieval from shared Bell pairs and Pauli data encodings.

The database is split into adjacent bit pairs, one Bell pair per database
pair.  The user keeps a sign qubit and prepares an equal superposition of
"all pairs in the correlated Bell state" and "the pair holding the wanted
bit swapped to a marker Bell state" (the bit-flipped pair marks an odd
index, the phase-flipped pair an even one).  Server 1 receives the left
qubit of every pair, server 2 the right.  Each server encodes its two
database bits per pair as one of four single-qubit operations: identity,
bit flip, phase flip, or their product.  Applied to both halves, those
operations fix the correlated state and multiply the marker state by -1
exactly when the wanted bit is 1, so the sign qubit again carries the
answer.  Every qubit in transit is maximally mixed on its own.

Odd database sizes are padded with a trailing zero bit.  Communication is
2n qubits: n/2 to each server and the same back.
"""

from __future__ import annotations

from .registers import RegisterLayout
from .schemes import Database
from .states import (
    PAULI,
    SQRT_HALF,
    SparseState,
    apply_local_map,
    conditional_xor_relabel,
    hadamard,
    measurement_branches,
)
from .transcript import USER, Transcript, TranscriptBuilder, server_party

# Bell labels used by the scheme; (p, q) names the pair basis state the
# marker uncomputes to.  The correlated pair is BELL_CORR; the two markers
# are a bit-flipped pair for odd indices and a phase-flipped pair for even.
BELL_CORR = (0, 0)
BELL_MARK_ODD = (0, 1)
BELL_MARK_EVEN = (1, 0)


def left_reg(slot: int) -> str:
    return f"left{slot}"


def right_reg(slot: int) -> str:
    return f"right{slot}"


def bell_layout(pair_count: int) -> RegisterLayout:
    regs = [("sign", 1)]
    regs += [(left_reg(s), 1) for s in range(1, pair_count + 1)]
    regs += [(right_reg(s), 1) for s in range(1, pair_count + 1)]
    return RegisterLayout(tuple(regs))


def marker_for(i: int) -> tuple[int, int]:
    return BELL_MARK_ODD if i % 2 == 1 else BELL_MARK_EVEN


def pair_slot(i: int) -> int:
    return (i + 1) // 2


def _bell_pair_terms(label: tuple[int, int]) -> tuple[tuple[int, int, float], ...]:
    """(left bit, right bit, sign) components of a Bell pair, amplitude 1/sqrt2 each."""
    p, q = label
    if (p, q) == (0, 0):
        return ((0, 0, 1.0), (1, 1, 1.0))
    if (p, q) == (0, 1):
        return ((0, 1, 1.0), (1, 0, 1.0))
    if (p, q) == (1, 0):
        return ((0, 0, 1.0), (1, 1, -1.0))
    return ((0, 1, 1.0), (1, 0, -1.0))


def build_bell_query(i: int, n: int) -> SparseState:
    """Query state for index i over an even-size database."""
    if n % 2 != 0:
        raise ValueError("database size must be even; pad odd sizes with a zero bit")
    if not 1 <= i <= n:
        raise IndexError(f"index {i} outside [1, {n}]")
    m = n // 2
    j = pair_slot(i)
    layout = bell_layout(m)
    amp = SQRT_HALF * (SQRT_HALF ** m)

    terms: dict[int, complex] = {}

    def add_branch(sign_bit: int, labels: list[tuple[int, int]]) -> None:
        partials = [(0, 1.0)]
        for slot, label in enumerate(labels, start=1):
            nxt = []
            for key, coeff in partials:
                for lbit, rbit, sgn in _bell_pair_terms(label):
                    piece = (lbit << (2 * m - slot)) | (rbit << (m - slot))
                    nxt.append((key | piece, coeff * sgn))
            partials = nxt
        for key, coeff in partials:
            full = (sign_bit << (2 * m)) | key
            terms[full] = terms.get(full, 0j) + amp * coeff

    add_branch(0, [BELL_CORR] * m)
    add_branch(1, [BELL_CORR] * (j - 1) + [marker_for(i)] + [BELL_CORR] * (m - j))
    return SparseState(layout, terms)


def server_pauli(state: SparseState, server: int, x: Database) -> SparseState:
    """Encode each database pair into this server's qubit of that pair."""
    if x.n % 2 != 0:
        raise ValueError("database size must be even")
    m = x.n // 2
    reg = left_reg if server == 1 else right_reg
    for slot in range(1, m + 1):
        op = PAULI[(x.bit(2 * slot - 1), x.bit(2 * slot))]
        state = apply_local_map(state, reg(slot), op)
    return state


# Per-pair basis changes between Bell pairs and classical pair labels.

def _pair_unentangle(sub: int) -> dict[int, float]:
    # (H x I) after a left-controlled flip of the right bit
    columns = {
        0b00: {0b00: SQRT_HALF, 0b10: SQRT_HALF},
        0b01: {0b01: SQRT_HALF, 0b11: SQRT_HALF},
        0b10: {0b01: SQRT_HALF, 0b11: -SQRT_HALF},
        0b11: {0b00: SQRT_HALF, 0b10: -SQRT_HALF},
    }
    return columns[sub]


def _pair_entangle(sub: int) -> dict[int, float]:
    # inverse of _pair_unentangle: |pq> -> the Bell pair labelled (p, q)
    columns = {
        0b00: {0b00: SQRT_HALF, 0b11: SQRT_HALF},
        0b01: {0b01: SQRT_HALF, 0b10: SQRT_HALF},
        0b10: {0b00: SQRT_HALF, 0b11: -SQRT_HALF},
        0b11: {0b01: SQRT_HALF, 0b10: -SQRT_HALF},
    }
    return columns[sub]


def unentangle_pairs(state: SparseState, m: int) -> SparseState:
    for slot in range(1, m + 1):
        state = apply_local_map(state, (left_reg(slot), right_reg(slot)), _pair_unentangle)
    return state


def entangle_pairs(state: SparseState, m: int) -> SparseState:
    for slot in range(1, m + 1):
        state = apply_local_map(state, (left_reg(slot), right_reg(slot)), _pair_entangle)
    return state


def clear_marker(state: SparseState, i: int) -> SparseState:
    """XOR away the marker label on the sign-1 branch after unentangling."""
    j = pair_slot(i)
    p, q = marker_for(i)
    return conditional_xor_relabel(
        state, "sign", [left_reg(j), right_reg(j)],
        {1: {left_reg(j): p, right_reg(j): q}},
    )


def recovery_branches_bell(state: SparseState, i: int, m: int):
    state = unentangle_pairs(state, m)
    state = clear_marker(state, i)
    state = apply_local_map(state, "sign", hadamard)
    return measurement_branches(state, "sign")


def bell_recover(state: SparseState, i: int) -> tuple[int, SparseState]:
    """Extract the requested bit; a unique unit-probability outcome is required."""
    m = (state.layout.width - 1) // 2
    branches = recovery_branches_bell(state, i, m)
    if len(branches) != 1:
        dist = {bit: p for p, bit, _ in branches}
        raise RuntimeError(f"recovery is not deterministic: {dist}")
    _, bit, post = branches[0]
    return bit, post


def bell_comm_cost(n: int) -> int:
    """Qubits communicated for an n-bit database (odd n padded to even)."""
    return 2 * (n + (n % 2))


class BellProtocol:
    kind = "quantum"
    name = "bell2"

    def __init__(self, n: int, dephase_servers: bool = False):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.padded_n = n + (n % 2)
        self.pair_count = self.padded_n // 2
        self.dephase_servers = dephase_servers
        self.k = 2

    def layout(self) -> RegisterLayout:
        return bell_layout(self.pair_count)

    def comm_qubits(self) -> int:
        return bell_comm_cost(self.n)

    def with_countermeasure(self) -> "BellProtocol":
        return BellProtocol(self.n, dephase_servers=True)

    def randomness_space(self):
        return range(1)  # the scheme draws no classical randomness

    def _padded(self, x: Database) -> Database:
        if x.n != self.n:
            raise ValueError("database size mismatch")
        if self.padded_n == self.n:
            return x
        return Database(self.padded_n, x.value << 1)

    def server_registers(self, server: int) -> list[str]:
        reg = left_reg if server == 1 else right_reg
        return [reg(s) for s in range(1, self.pair_count + 1)]

    def run(self, x: Database, i: int, r: int = 0, masks=()) -> Transcript:
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} outside [1, {self.n}]")
        xp = self._padded(x)
        m = self.pair_count
        layout = self.layout()
        knowledge = {
            "i": i,
            "pair_slot": pair_slot(i),
            "marker": "".join(map(str, marker_for(i))),
            "padded_n": self.padded_n,
            "countermeasure": self.dephase_servers,
        }
        b = TranscriptBuilder(self.name, self.n, x, i, knowledge, layout,
                              [USER, server_party(1), server_party(2)])
        b.assign(layout.names, USER)
        b.record("plan", USER)

        b.set_state(build_bell_query(i, self.padded_n))
        b.record("build", USER)

        for server in (1, 2):
            regs = self.server_registers(server)
            b.move(regs, server_party(server))
            b.record(f"send:server{server}", USER, moved=regs, qubits=m)

        for server in (1, 2):
            if self.dephase_servers:
                for reg in self.server_registers(server):
                    b.split_branches(lambda st, _r=reg: (
                        (p, post) for p, _, post in measurement_branches(st, _r)
                    ))
                b.record(f"measure:server{server}", server_party(server))
            b.map_branches(lambda st, _s=server: server_pauli(st, _s, xp))
            b.record(f"pauli:server{server}", server_party(server))

        for server in (1, 2):
            regs = self.server_registers(server)
            b.move(regs, USER)
            b.record(f"return:server{server}", server_party(server), moved=regs, qubits=m)

        output: dict[int, float] = {}
        final = []
        for p, st in b.branches:
            for q, bit, post in recovery_branches_bell(st, i, m):
                output[bit] = output.get(bit, 0.0) + p * q
                final.append((p * q, post))
        b.branches = final
        b.set_output(output)
        b.record("recover", USER)
        return b.done()

    def run_output(self, x: Database, i: int, r: int = 0, masks=()) -> dict[int, float]:
        xp = self._padded(x)
        m = self.pair_count
        branches = [(1.0, build_bell_query(i, self.padded_n))]
        for server in (1, 2):
            if self.dephase_servers:
                for reg in self.server_registers(server):
                    branches = [
                        (p * q, post)
                        for p, st in branches
                        for q, _, post in measurement_branches(st, reg)
                    ]
            branches = [(p, server_pauli(st, server, xp)) for p, st in branches]
        output: dict[int, float] = {}
        for p, st in branches:
            for q, bit, _ in recovery_branches_bell(st, i, m):
                output[bit] = output.get(bit, 0.0) + p * q
        return output
