"""The PIR-to-quantum compiler: query states, phases, recovery, transcripts."""

import itertools
import math

import pytest

from qspirlab.compiler import (
    CompiledProtocol,
    RecoveryError,
    build_query_state,
    compiled_layout,
    server_phase,
    user_recover,
)
from qspirlab.density import DensityAccumulator
from qspirlab.schemes import Database, all_databases, make_scheme
from qspirlab.states import SparseState, equal_up_to_global_phase

from helpers import CorruptedSubsetScheme

S = math.sqrt(0.5)


class TestBuildQueryState:
    def test_trivial_n1(self):
        s = make_scheme("trivial1", 1)
        state = build_query_state(s.gen_plan(1, 0), (0,))
        assert state.bits_terms() == pytest.approx({"00": S, "11": S})

    def test_subset_worked_example(self):
        s = make_scheme("subset2", 2)
        state = build_query_state(s.gen_plan(1, 0b01), (0, 1))
        assert state.bits_terms() == pytest.approx({"0010111": S, "1011110": S})

    def test_two_terms_always(self):
        s = make_scheme("cube2", 8)
        state = build_query_state(s.gen_plan(5, 42), (0b1010101, 0b0011111))
        assert len(state.terms) == 2

    def test_degenerate_selects_rejected(self):
        plan = CorruptedSubsetScheme(2).gen_plan(1, 0)
        from dataclasses import replace

        broken = replace(plan, selects=(0, 0))
        with pytest.raises(ValueError):
            build_query_state(broken, (0, 0))

    def test_mask_length_checked(self):
        s = make_scheme("subset2", 2)
        with pytest.raises(ValueError):
            build_query_state(s.gen_plan(1, 0), (0,))
        with pytest.raises(ValueError):
            build_query_state(s.gen_plan(1, 0), (0, 2))


class TestServerPhase:
    def test_all_zero_database_fixes_subset_state(self):
        s = make_scheme("subset2", 2)
        x = Database.from_string("00")
        state = build_query_state(s.gen_plan(1, 1), (0, 1))
        for j in (1, 2):
            state2 = server_phase(state, s, j, x)
            assert state2.bits_terms() == state.bits_terms()

    def test_trivial_single_bit_phase(self):
        s = make_scheme("trivial1", 1)
        state = build_query_state(s.gen_plan(1, 0), (0,))
        out = server_phase(state, s, 1, Database.from_string("1"))
        assert out.bits_terms() == pytest.approx({"00": S, "11": -S})

    def test_support_never_changes(self):
        s = make_scheme("cube2", 8)
        x = Database.from_string("11010010")
        state = build_query_state(s.gen_plan(2, 9), (3, 77))
        for j in (1, 2):
            state = server_phase(state, s, j, x)
        assert state.support() == build_query_state(s.gen_plan(2, 9), (3, 77)).support()

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_relative_phase_equals_requested_bit(self, n):
        # after both servers act the two branches differ by (-1)**x_i
        s = make_scheme("subset2", n)
        masks = (1, 0)
        for x in all_databases(n):
            for i in range(1, n + 1):
                for r in s.randomness_space:
                    plan = s.gen_plan(i, r)
                    state = build_query_state(plan, masks)
                    for j in (1, 2):
                        state = server_phase(state, s, j, x)
                    k0, k1 = sorted(state.terms)
                    ratio = state.terms[k1] / state.terms[k0]
                    assert ratio.real == pytest.approx(1.0 - 2.0 * x.bit(i), abs=1e-12)

    def test_global_phase_lemma(self):
        # the post-answer state equals the ideal two-branch state with the
        # requested bit in the exponent, up to a global phase
        s = make_scheme("subset2", 3)
        for x in [Database.from_string("101"), Database.from_string("110")]:
            for i in (1, 2, 3):
                plan = s.gen_plan(i, 5)
                masks = (1, 1)
                state = build_query_state(plan, masks)
                for j in (1, 2):
                    state = server_phase(state, s, j, x)
                k0, k1 = sorted(state.terms)
                ideal = SparseState(state.layout, {
                    k0: S, k1: S * (1.0 - 2.0 * x.bit(i)),
                })
                assert equal_up_to_global_phase(state, ideal)


class TestRecovery:
    def test_trivial_n1(self):
        s = make_scheme("trivial1", 1)
        x = Database.from_string("1")
        plan = s.gen_plan(1, 0)
        state = server_phase(build_query_state(plan, (1,)), s, 1, x)
        bit, post = user_recover(state, plan, (1,))
        assert bit == 1
        # the answer-mask phase survives only as a global sign
        ideal = SparseState(post.layout, {0b10: 1.0})
        assert equal_up_to_global_phase(post, ideal)

    def test_subset_exhaustive_n2(self):
        s = make_scheme("subset2", 2)
        protocol = CompiledProtocol(s)
        count = 0
        for x in all_databases(2):
            for i in (1, 2):
                for r in s.randomness_space:
                    for masks in itertools.product(range(2), repeat=2):
                        assert protocol.run_output(x, i, r, masks) == {x.bit(i): pytest.approx(1.0)}
                        count += 1
        assert count == 128

    def test_cube_spot_run(self):
        s = make_scheme("cube2", 8)
        x = Database.from_string("10110100")
        out = CompiledProtocol(s).run(x, 3, 21, (0b0000111, 0b1110000))
        assert out.output_bit() == x.bit(3) == 1

    def test_corrupted_scheme_outputs_wrong_bit(self):
        # zeroing a selection vector leaves recovery deterministic but
        # decoupled from the requested bit (the audit sees probability 1/2)
        s = CorruptedSubsetScheme(2)
        x = Database.from_string("01")
        plan = s.gen_plan(1, 0b01)
        state = build_query_state(plan, (0, 0))
        for j in (1, 2):
            state = server_phase(state, s, j, x)
        bit, _ = user_recover(state, plan, (0, 0))
        assert bit == 1 != x.bit(1)

    def test_inconsistent_selects_raise(self):
        # recovering with selection vectors that disagree with the state's
        # branch structure cannot merge the branches: non-unit probability
        s = make_scheme("subset2", 2)
        plan = s.gen_plan(1, 0b01)
        state = build_query_state(plan, (0, 0))
        for j in (1, 2):
            state = server_phase(state, s, j, Database.from_string("01"))
        broken_plan = CorruptedSubsetScheme(2).gen_plan(1, 0b01)
        with pytest.raises(RecoveryError):
            user_recover(state, broken_plan, (0, 0))


class TestTranscript:
    def test_step_sequence_and_counters(self):
        s = make_scheme("subset2", 2)
        t = CompiledProtocol(s).run(Database.from_string("10"), 2, 3, (1, 0))
        labels = [step.label for step in t.steps]
        assert labels == [
            "plan", "build", "send:server1", "send:server2",
            "phase:server1", "phase:server2", "return:server1",
            "return:server2", "recover",
        ]
        assert t.qubits_total == 12
        assert t.bits_total == 0
        assert t.output == {0: pytest.approx(1.0)}  # x_2 of "10"

    def test_custody_changes_on_send_and_return(self):
        s = make_scheme("subset2", 2)
        t = CompiledProtocol(s).run(Database.from_string("01"), 1, 0, (0, 0))
        by_label = {step.label: step for step in t.steps}
        assert by_label["send:server1"].custody["srv1"] == "server1"
        assert by_label["send:server1"].custody["srv2"] == "user"
        assert by_label["return:server2"].custody["srv2"] == "user"

    def test_server_reduced_state_is_mask_mixture(self):
        # right after receipt, server j holds an even mixture of its query
        # with the mask and with the mask xor its selection vector
        s = make_scheme("subset2", 2)
        plan = s.gen_plan(1, 0b10)
        t = CompiledProtocol(s).run(Database.from_string("11"), 1, 0b10, (1, 0))
        idx = [step.label for step in t.steps].index("send:server1")
        rho = t.reduced_density(idx, "server1")
        assert rho.is_diagonal
        assert rho.entry((plan.queries[0] << 1) | 1, (plan.queries[0] << 1) | 1) == pytest.approx(0.5)
        assert rho.entry((plan.queries[0] << 1) | 0, (plan.queries[0] << 1) | 0) == pytest.approx(0.5)

    def test_comm_examples(self):
        assert CompiledProtocol(make_scheme("trivial1", 5)).comm_qubits() == 10
        assert CompiledProtocol(make_scheme("subset2", 8)).comm_qubits() == 36
        assert CompiledProtocol(make_scheme("cube2", 8)).comm_qubits() == 52


class TestServerIgnoranceOfMasks:
    def test_receipt_mixture_over_masks_is_query_times_mixed(self):
        # mixing the receipt state over this server's own mask space gives
        # |query><query| tensored with the maximally mixed mask register
        s = make_scheme("subset2", 2)
        plan = s.gen_plan(2, 0b01)
        layout = compiled_layout(2, 2, 1)
        acc = DensityAccumulator(layout, ["srv1"])
        for m1 in range(2):
            acc.add(build_query_state(plan, (m1, 0)), 1.0)
        rho = acc.finalize()
        q = plan.queries[0]
        for mask_bit in (0, 1):
            assert rho.entry((q << 1) | mask_bit, (q << 1) | mask_bit) == pytest.approx(0.5)
        assert rho.is_diagonal


def test_mask_cycle_distinctness():
    protocol = CompiledProtocol(make_scheme("cube2", 8))
    combos = {protocol.mask_combo(slot, 512) for slot in range(512)}
    assert len(combos) == 512
    assert protocol.mask_subset_size(512) == 512
    small = CompiledProtocol(make_scheme("subset2", 2))
    assert {small.mask_combo(s, 512) for s in range(small.mask_subset_size(512))} == set(
        itertools.product(range(2), repeat=2))
