import pytest
from hypothesis import given, settings, strategies as st

from pglblab.analyzer import StateNode, Unbounded
from pglblab.family import gen_random
from pglblab.isa import (
    AuxSpec,
    BwdJump,
    FwdJump,
    ToolParams,
    is_pglb,
    parse_program,
    render_program,
)
from pglblab.projector import (
    OracleSuite,
    check_equivalence,
    dispatch_project,
    specialize,
    thread_jumps,
)
from pglblab.vm import Status

P11 = ToolParams(maxr=1, maxn=1)
P12 = ToolParams(maxr=1, maxn=2)
P23 = ToolParams(maxr=2, maxn=3)

#: PGLB-only draw weights for gen_random.
PGLB_WEIGHTS = {
    "plain": 4,
    "pos_test": 3,
    "neg_test": 2,
    "fwd_jump": 3,
    "bwd_jump": 2,
    "halt": 2,
}


def equivalent(p, q, params, depth=10):
    return check_equivalence(p, q, params, OracleSuite(exhaustive_depth=depth))


# --- specialize ---


def test_specialize_resolves_register_use_to_direct_jumps():
    report = specialize(parse_program("set:1:1 ; i#1 ; !"), P11)
    assert render_program(report.output) == "#1 ; #1 ; !"
    assert report.mode == "specialize"
    assert report.length_before == 3
    assert report.length_after == 3
    assert report.aux_introduced == frozenset()


def test_specialize_emits_reachable_states_only():
    # The halt is unreachable behind the never-set register.
    report = specialize(parse_program("i#1 ; !"), P11)
    assert render_program(report.output) == "#0"


def test_specialize_pos_test_block():
    report = specialize(parse_program("+f.m ; ! ; #0"), P11)
    assert render_program(report.output) == "+f.m ; #2 ; #2 ; ! ; #0"
    assert report.relocation.entries == {
        StateNode(1, (0,)): (1, 3),
        StateNode(2, (0,)): (4, 1),
        StateNode(3, (0,)): (5, 1),
    }


def test_specialize_neg_test_block_slots_follow_reply_routing():
    # Blocks are laid out in discovery order (the True branch of a negative
    # test first); the slots still route False to the old pc+1.
    report = specialize(parse_program("-f.m ; ! ; #0"), P11)
    assert render_program(report.output) == "-f.m ; #3 ; #1 ; #0 ; !"
    p = parse_program("-f.m ; ! ; #0")
    assert equivalent(p, report.output, P11).equivalent


def test_specialize_deadlock_branches_become_distance_zero_jumps():
    report = specialize(parse_program("+f.m ; !"), P11)
    # False lands past the end: slot 2 deadlocks just like the original.
    assert render_program(report.output) == "+f.m ; #2 ; #0 ; !"


def test_specialize_output_is_register_free():
    p = parse_program("set:2:3 ; i#1 ; set:1:2 ; i\\#2 ; f.m ; !")
    report = specialize(p, P23)
    assert is_pglb(report.output)


def test_specialize_relocation_partitions_output():
    p = parse_program("set:1:2 ; +f.m ; i#1 ; g.n ; !")
    report = specialize(p, P12)
    entries = sorted(report.relocation.entries.values())
    at = 1
    for start, size in entries:
        assert start == at
        at += size
    assert at == report.length_after + 1


def test_specialize_unfolds_register_states():
    # Same position reached with two register values becomes two blocks.
    p = parse_program("+f.m ; #3 ; set:1:1 ; set:1:2 ; i#1 ; ! ; !")
    report = specialize(p, P12)
    pcs = [node.pc for node in report.relocation.entries]
    assert pcs.count(5) == 2
    assert equivalent(p, report.output, P12).equivalent


def test_specialize_keeps_mid_flat_without_aux():
    for seed in range(60):
        p = gen_random(seed, 3 + seed % 10, P23)
        report = specialize(p, P23)
        before = report.mid_before.finite_value
        after = report.mid_after.finite_value
        if before is None:
            assert after is None, (seed, str(p))
        else:
            assert after is not None and after <= before + 1, (seed, str(p))


def test_specialize_relocation_csv_uses_state_keys():
    report = specialize(parse_program("+f.m ; ! ; #0"), P11)
    assert report.relocation.to_csv() == (
        "old_key,new_start,new_len\n1:0,1,3\n2:0,4,1\n3:0,5,1\n"
    )


# --- dispatch ---


def test_dispatch_single_bit_golden():
    report = dispatch_project(parse_program("set:1:1 ; i#1 ; ! ; !"), P11)
    assert render_program(report.output) == "r1b0.set:T ; -r1b0.get ; #0 ; #1 ; ! ; !"
    assert report.mode == "dispatch"
    assert report.aux_foci == {"r1b0"}


def test_dispatch_two_bit_tree_golden():
    report = dispatch_project(parse_program("set:1:2 ; i#1 ; ! ; !"), P12)
    assert render_program(report.output) == (
        "r1b1.set:T ; r1b0.set:F ; "
        "+r1b1.get ; #4 ; -r1b0.get ; #0 ; #4 ; -r1b0.get ; #3 ; #0 ; "
        "! ; !"
    )


def test_dispatch_relocation_uses_positions():
    report = dispatch_project(parse_program("set:1:2 ; i#1 ; ! ; !"), P12)
    assert report.relocation.entries == {1: (1, 2), 2: (3, 8), 3: (11, 1), 4: (12, 1)}
    assert report.relocation.to_csv().splitlines()[1] == "1,1,2"


def test_dispatch_test_copied_bare_before_unit_block():
    report = dispatch_project(parse_program("+f.m ; ! ; !"), P11)
    assert render_program(report.output) == "+f.m ; ! ; !"


def test_dispatch_test_expanded_before_wide_block():
    report = dispatch_project(parse_program("+f.m ; set:1:1 ; !"), P12)
    assert render_program(report.output) == "+f.m ; #2 ; #3 ; r1b1.set:F ; r1b0.set:T ; !"
    p = parse_program("+f.m ; set:1:1 ; !")
    assert equivalent(p, report.output, report.output_params(P12)).equivalent


def test_dispatch_out_of_range_jumps_normalize_to_deadlock():
    report = dispatch_project(parse_program("#7 ; set:1:1 ; !"), P11)
    assert render_program(report.output) == "#0 ; r1b0.set:T ; !"


def test_dispatch_is_identity_on_register_free_in_range_programs():
    for seed in range(40):
        p = gen_random(seed, 2 + seed % 9, P23, weights=PGLB_WEIGHTS)
        length = len(p)
        clamped = []
        for pos, u in enumerate(p.instructions, start=1):
            if isinstance(u, FwdJump) and pos + u.distance > length:
                u = FwdJump(0)
            elif isinstance(u, BwdJump) and pos - u.distance < 1:
                u = BwdJump(0)
            clamped.append(u)
        q = parse_program(render_program(type(p)(tuple(clamped))))
        report = dispatch_project(q, P23)
        assert report.output == q, (seed, str(q))


def test_dispatch_fresh_cell_prefix_avoids_collisions():
    p = parse_program("r1b0.get ; set:1:1 ; i#1 ; !")
    report = dispatch_project(p, P11)
    assert report.aux_foci == {"rr1b0"}
    assert equivalent(p, report.output, report.output_params(P11)).equivalent


def test_dispatch_length_bound():
    # Worst per-block expansion: the b-bit decision tree (5·2^(b-1) - 2),
    # never below the 3-instruction test block.  The coarser closed form
    # 2^(b+1)+b+1 over-approximates it for b <= 3 only.
    for maxn, seeds in ((1, 40), (3, 40), (7, 30), (15, 20), (31, 20)):
        params = ToolParams(maxr=2, maxn=maxn)
        b = maxn.bit_length()
        worst = max(3, b, 5 * 2 ** (b - 1) - 2)
        for seed in range(seeds):
            p = gen_random(seed, 2 + seed % 10, params)
            report = dispatch_project(p, params)
            assert report.length_after <= report.length_before * worst
            if b <= 3:
                assert report.length_after <= report.length_before * (2 ** (b + 1) + b + 1)


def test_dispatch_maxn_comes_from_params_not_program():
    # Same program, wider machine: more bits per register.
    p = parse_program("set:1:1 ; i#1 ; ! ; !")
    narrow = dispatch_project(p, P11)
    wide = dispatch_project(p, ToolParams(maxr=1, maxn=3))
    assert narrow.length_after < wide.length_after
    assert wide.aux_foci == {"r1b0", "r1b1"}


def test_dispatch_mid_grows_with_bit_width():
    p = parse_program("f.m ; set:1:1 ; i#1 ; f.m ; !")
    mids = []
    for maxn in (1, 3, 7, 15):
        report = dispatch_project(p, ToolParams(maxr=1, maxn=maxn))
        mids.append(report.mid_after.finite_value)
    assert mids == sorted(mids)
    assert mids[-1] > mids[0]


# --- both projections against the interpreter ---


def test_projections_preserve_observable_behavior_on_random_programs():
    for seed in range(80):
        p = gen_random(7000 + seed, 3 + seed % 10, P23)
        for proj in (specialize, dispatch_project):
            report = proj(p, P23)
            assert is_pglb(report.output)
            verdict = equivalent(p, report.output, report.output_params(P23))
            assert verdict.equivalent, (seed, proj.__name__, verdict.counterexample)


def test_projection_reports_record_lengths():
    p = parse_program("set:1:2 ; i#1 ; ! ; !")
    for proj in (specialize, dispatch_project):
        report = proj(p, P12)
        assert report.length_before == 4
        assert report.length_after == len(report.output)
        assert f"mode={report.mode}" in report.summary()
        assert f"lengthAfter={report.length_after}" in report.summary()


def test_projection_rejects_invalid_programs():
    p = parse_program("set:9:9 ; !")
    with pytest.raises(ValueError):
        specialize(p, P11)
    with pytest.raises(ValueError):
        dispatch_project(p, P11)


# --- jump threading ---


def test_thread_jumps_collapses_chains():
    assert render_program(thread_jumps(parse_program("#1 ; #1 ; !"))) == "#2 ; #1 ; !"


def test_thread_jumps_keeps_deadlocks_and_cycles():
    assert render_program(thread_jumps(parse_program("#0 ; !"))) == "#0 ; !"
    assert render_program(thread_jumps(parse_program("#1 ; \\#1"))) == "#1 ; \\#1"
    # A chain into a deadlocking jump stops at that jump.
    assert render_program(thread_jumps(parse_program("#1 ; #0 ; !"))) == "#1 ; #0 ; !"
    # A chain into an out-of-range jump also stops there.
    assert render_program(thread_jumps(parse_program("#1 ; #9 ; !"))) == "#1 ; #9 ; !"


def test_thread_jumps_handles_backward_chains():
    assert render_program(thread_jumps(parse_program("f.m ; \\#1 ; #0"))) == "f.m ; \\#1 ; #0"
    assert (
        render_program(thread_jumps(parse_program("#2 ; ! ; \\#2 ; g.n")))
        == "#2 ; ! ; \\#2 ; g.n"
    )
    assert render_program(thread_jumps(parse_program("g.n ; #2 ; ! ; \\#2"))) == (
        "g.n ; #2 ; ! ; \\#2"
    )


def test_thread_jumps_requires_register_free_input():
    with pytest.raises(ValueError):
        thread_jumps(parse_program("set:1:1 ; !"))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_thread_jumps_is_idempotent_and_behavior_preserving(seed, length):
    p = gen_random(seed, length, P23, weights=PGLB_WEIGHTS)
    threaded = thread_jumps(p)
    assert len(threaded) == len(p)
    assert thread_jumps(threaded) == threaded
    params = ToolParams(maxr=2, maxn=3, step_limit=200)
    verdict = equivalent(p, threaded, params, depth=6)
    assert verdict.equivalent, (str(p), verdict.counterexample)


def test_threading_a_specialized_program_shortens_hops():
    p = parse_program("set:1:1 ; i#1 ; !")
    report = specialize(p, P11)
    threaded = thread_jumps(report.output)
    assert render_program(threaded) == "#2 ; #1 ; !"


# --- equivalence checking ---


def test_check_equivalence_accepts_identical_programs():
    p = parse_program("+f.m ; ! ; g.n ; !")
    verdict = equivalent(p, p, ToolParams())
    assert verdict.equivalent
    assert verdict.counterexample is None
    assert verdict.checked >= 2


def test_check_equivalence_distinguishes_final_status():
    verdict = equivalent(parse_program("f.m ; !"), parse_program("f.m ; #0"), ToolParams())
    assert not verdict.equivalent
    cex = verdict.counterexample
    assert cex.oracle == "exhaustive:"
    assert cex.p_final is Status.TERMINATED
    assert cex.q_final is Status.DEADLOCKED
    assert cex.p_events == cex.q_events


def test_check_equivalence_distinguishes_observable_events():
    verdict = equivalent(parse_program("f.m ; !"), parse_program("g.m ; !"), ToolParams())
    assert not verdict.equivalent
    assert verdict.counterexample.p_events[0].focus == "f"
    assert verdict.counterexample.q_events[0].focus == "g"


def test_check_equivalence_ignores_aux_differences():
    params = ToolParams(aux=AuxSpec.parse("aux1.*"))
    verdict = equivalent(parse_program("aux1.m ; f.m ; !"), parse_program("f.m ; !"), params)
    assert verdict.equivalent


def test_check_equivalence_reports_step_limited_runs_as_inconclusive():
    p = parse_program("+f.m ; \\#1 ; !")
    params = ToolParams(step_limit=50)
    verdict = equivalent(p, p, params, depth=4)
    assert verdict.equivalent
    assert verdict.inconclusive > 0


def test_check_equivalence_catches_mismatch_on_common_prefix_of_cut_runs():
    # Both loop forever, but emit different requests while doing so.
    p = parse_program("f.m ; \\#1")
    q = parse_program("g.m ; \\#1")
    verdict = equivalent(p, q, ToolParams(step_limit=50))
    assert not verdict.equivalent


def test_check_equivalence_seeded_oracles_cover_deep_branches():
    # Identical except at a branch deeper than the exhaustive depth; the
    # seeded streams still reach it.
    deep = 8 * "+f.m ; "
    p = parse_program(deep + "f.m ; !")
    q = parse_program(deep + "g.m ; !")
    verdict = equivalent(p, q, ToolParams(), depth=2)
    assert not verdict.equivalent
    assert verdict.counterexample.oracle.startswith("seeded:")
