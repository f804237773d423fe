"""Compile a linear-reconstruction PIR scheme into a quantum protocol.

The construction: alongside the classical queries the user draws one
random answer-length mask per server and prepares a two-branch
superposition, keeping a single sign qubit and sending each server its
query together with either the mask (sign 0 branch) or the mask XOR that
server's selection vector (sign 1 branch).  Each server applies a
conditional phase, flipping the sign of any basis string whose mask part
has odd inner product with the answer to its query part.  Those phases
multiply out so that once everything is back, the two branches differ by
exactly the requested database bit in the exponent; the user XORs both
branches down to the all-zero string, Hadamards the sign qubit, and
measures the bit.  Each server only ever sees its query with an
individually uniform mask, and the user's states depend on the database
only through the retrieved bit.

Communication is 2*k*(t+a) qubits: every register travels out and back.
"""

from __future__ import annotations

import itertools
from typing import Sequence

from . import kernels
from .registers import RegisterLayout, bits
from .schemes import Database, LinearPirScheme, QueryPlan
from .states import (
    SQRT_HALF,
    SparseState,
    apply_local_map,
    apply_phase_oracle,
    conditional_xor_relabel,
    hadamard,
    measurement_branches,
)
from .transcript import USER, Transcript, TranscriptBuilder, server_party


class RecoveryError(RuntimeError):
    """Recovery did not produce a single outcome with probability 1."""


def server_register(j: int) -> str:
    return f"srv{j}"


def compiled_layout(k: int, t: int, a: int) -> RegisterLayout:
    regs = [("sign", 1)]
    regs += [(server_register(j), t + a) for j in range(1, k + 1)]
    return RegisterLayout(tuple(regs))


def _check_masks(plan: QueryPlan, masks: Sequence[int]) -> None:
    if len(masks) != plan.k:
        raise ValueError(f"{len(masks)} masks for {plan.k} servers")
    for m in masks:
        if not 0 <= m < (1 << plan.a):
            raise ValueError(f"mask {m} does not fit {plan.a} bits")


def _register_values(plan: QueryPlan, masks: Sequence[int], flip: bool) -> dict[str, int]:
    values = {}
    for j, (q, sel, m) in enumerate(zip(plan.queries, plan.selects, masks), start=1):
        payload = m ^ sel if flip else m
        values[server_register(j)] = (q << plan.a) | payload
    return values


def build_query_state(plan: QueryPlan, masks: Sequence[int]) -> SparseState:
    """The two-branch query superposition over sign + per-server registers."""
    _check_masks(plan, masks)
    if all(sel == 0 for sel in plan.selects):
        raise ValueError("degenerate plan: all selection vectors are zero")
    layout = compiled_layout(plan.k, plan.t, plan.a)
    plain = _register_values(plan, masks, flip=False)
    flipped = _register_values(plan, masks, flip=True)
    k0 = layout.assemble({"sign": 0, **plain})
    k1 = layout.assemble({"sign": 1, **flipped})
    return SparseState(layout, {k0: SQRT_HALF, k1: SQRT_HALF})


def server_phase(state: SparseState, scheme: LinearPirScheme, j: int, x: Database) -> SparseState:
    """Server j's conditional phase: -1 on odd <answer(query), mask part>."""
    a = scheme.shape.a
    mask_bits = (1 << a) - 1

    def phase(sub: int) -> int:
        q = sub >> a
        return kernels.dot2(scheme.answer(q, x), sub & mask_bits, a)

    return apply_phase_oracle(state, server_register(j), phase)


def _recovery_relabel(state: SparseState, plan: QueryPlan, masks: Sequence[int]) -> SparseState:
    targets = [server_register(j) for j in range(1, plan.k + 1)]
    return conditional_xor_relabel(
        state, "sign", targets,
        {
            0: _register_values(plan, masks, flip=False),
            1: _register_values(plan, masks, flip=True),
        },
    )


def recovery_branches(state: SparseState, plan: QueryPlan, masks: Sequence[int]):
    """(probability, bit, post-state) outcomes of the recovery measurement."""
    _check_masks(plan, masks)
    relabeled = _recovery_relabel(state, plan, masks)
    rotated = apply_local_map(relabeled, "sign", hadamard)
    return measurement_branches(rotated, "sign")


def user_recover(state: SparseState, plan: QueryPlan, masks: Sequence[int]) -> tuple[int, SparseState]:
    """Recover the requested bit; exactly one outcome must carry probability 1."""
    branches = recovery_branches(state, plan, masks)
    if len(branches) != 1:
        dist = {bit: p for p, bit, _ in branches}
        raise RecoveryError(f"recovery is not deterministic: {dist} (broken base scheme?)")
    _, bit, post = branches[0]
    return bit, post


class CompiledProtocol:
    """Runs the compiled protocol end to end, producing transcripts."""

    kind = "quantum"

    def __init__(self, scheme: LinearPirScheme, dephase_servers: bool = False):
        self.scheme = scheme
        self.dephase_servers = dephase_servers

    @property
    def name(self) -> str:
        return f"qspir({self.scheme.name})"

    @property
    def n(self) -> int:
        return self.scheme.n

    @property
    def k(self) -> int:
        return self.scheme.shape.k

    def layout(self) -> RegisterLayout:
        s = self.scheme.shape
        return compiled_layout(s.k, s.t, s.a)

    def comm_qubits(self) -> int:
        s = self.scheme.shape
        return 2 * s.k * (s.t + s.a)

    def with_countermeasure(self) -> "CompiledProtocol":
        return CompiledProtocol(self.scheme, dephase_servers=True)

    def randomness_space(self):
        return self.scheme.randomness_space

    def mask_space(self):
        a = self.scheme.shape.a
        return itertools.product(range(1 << a), repeat=self.k)

    def mask_subset_size(self, limit: int = 512) -> int:
        total = 1 << (self.scheme.shape.a * self.k)
        return min(total, limit)

    def mask_combo(self, slot: int, limit: int = 512) -> tuple[int, ...]:
        """Deterministic mask tuple for a sweep slot.

        Walks the full product space when it fits the limit, otherwise a
        fixed odd multiplier scatters the slots across it (multiplication
        by an odd constant is a bijection mod a power of two, so distinct
        slots give distinct combinations).
        """
        a = self.scheme.shape.a
        total = 1 << (a * self.k)
        count = min(total, limit)
        idx = slot % count
        value = (idx * 2654435761) & (total - 1) if count < total else idx
        mask_bits = (1 << a) - 1
        return tuple((value >> (a * j)) & mask_bits for j in range(self.k))

    def _knowledge(self, plan: QueryPlan, masks: Sequence[int]) -> dict:
        s = self.scheme.shape
        return {
            "scheme": self.scheme.name,
            "k": s.k, "t": s.t, "a": s.a,
            "i": plan.i,
            "r": bits(plan.r, s.t),
            "masks": [bits(m, s.a) for m in masks],
            "queries": [bits(q, s.t) for q in plan.queries],
            "selects": [bits(b, s.a) for b in plan.selects],
            "countermeasure": self.dephase_servers,
        }

    def run(self, x: Database, i: int, r: int, masks: Sequence[int]) -> Transcript:
        plan = self.scheme.gen_plan(i, r)
        masks = tuple(masks)
        layout = self.layout()
        s = self.scheme.shape
        parties = [USER] + [server_party(j) for j in range(1, s.k + 1)]
        b = TranscriptBuilder(self.name, self.n, x, i, self._knowledge(plan, masks), layout, parties)

        b.assign(layout.names, USER)
        b.record("plan", USER)

        b.set_state(build_query_state(plan, masks))
        b.record("build", USER)

        for j in range(1, s.k + 1):
            reg = server_register(j)
            b.move([reg], server_party(j))
            b.record(f"send:server{j}", USER, moved=[reg], qubits=s.t + s.a)

        for j in range(1, s.k + 1):
            reg = server_register(j)
            if self.dephase_servers:
                b.split_branches(lambda st, _reg=reg: (
                    (p, post) for p, _, post in measurement_branches(st, _reg)
                ))
                b.record(f"measure:server{j}", server_party(j))
            b.map_branches(lambda st, _j=j: server_phase(st, self.scheme, _j, x))
            b.record(f"phase:server{j}", server_party(j))

        for j in range(1, s.k + 1):
            reg = server_register(j)
            b.move([reg], USER)
            b.record(f"return:server{j}", server_party(j), moved=[reg], qubits=s.t + s.a)

        output: dict[int, float] = {}
        final = []
        for p, st in b.branches:
            for q, bit, post in recovery_branches(st, plan, masks):
                output[bit] = output.get(bit, 0.0) + p * q
                final.append((p * q, post))
        b.branches = final
        b.set_output(output)
        b.record("recover", USER)
        return b.done()

    def run_output(self, x: Database, i: int, r: int, masks: Sequence[int]) -> dict[int, float]:
        """Output distribution only; skips transcript bookkeeping."""
        plan = self.scheme.gen_plan(i, r)
        state = build_query_state(plan, masks)
        branches = [(1.0, state)]
        for j in range(1, self.k + 1):
            if self.dephase_servers:
                branches = [
                    (p * q, post)
                    for p, st in branches
                    for q, _, post in measurement_branches(st, server_register(j))
                ]
            branches = [(p, server_phase(st, self.scheme, j, x)) for p, st in branches]
        output: dict[int, float] = {}
        for p, st in branches:
            for q, bit, _ in recovery_branches(st, plan, masks):
                output[bit] = output.get(bit, 0.0) + p * q
        return output


def run_protocol(scheme: LinearPirScheme, x: Database, i: int, r: int,
                 masks: Sequence[int]) -> Transcript:
    """One full compiled run as a transcript."""
    return CompiledProtocol(scheme).run(x, i, r, masks)
