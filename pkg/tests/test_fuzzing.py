"""Fuzz-target DSL, mutation, campaign, corpus, and replay tests."""

import random

import pytest

from sctest.bytecode.abi import AbiType, FunctionSig
from sctest.bytecode.asm import Asm, dispatcher
from sctest.coverage import PARTIALLY_COVERED, extract_uncovered_functions
from sctest.evm.bundle import ContractBundle, load_bundle
from sctest.evm.world import make_world
from sctest.fuzzing import (
    ASSERT_FAILURE,
    PROPERTY_VIOLATION,
    BugReport,
    Campaign,
    CompileError,
    Corpus,
    EmptyAbi,
    FuzzTarget,
    detect_bugs,
    initial_candidate,
    minimize_corpus,
    mutate,
    mutate_value,
    parse_target,
    render_target,
    replay,
    run_campaign,
    seed_initial_target,
)
from sctest.fuzzing import TestCase as FuzzCase

from conftest import FIXTURES

POOL_TARGET = """\
# exercise the deposit path
target pool
alias A = 0x0000000000000000000000000000000000001001

setup:
    call mintDyad(1, 100)
    call redeemable(1, 100) from A

fuzz:
    call deposit(A, 1, ?value:uint256=10) from A

order fixed
"""

TOY_ABI = [
    FunctionSig("f", ("uint8", "bool", "bytes", "uint256[]"), None, None,
                False, ("a", "b", "c", "d")),
    FunctionSig("g", ("address",), None, None, False, ("who",)),
]


def pool_abi():
    return load_bundle(FIXTURES / "pool").resolved_abi


def parse_pool(text: str):
    return parse_target(text, pool_abi())


def gate_bundle() -> ContractBundle:
    """One function, one guard: poke(x) hits INVALID when x > 10."""
    a = Asm()
    sig = ("uint256",)
    sel = FunctionSig("poke", sig).selector
    dispatcher(a, [(sel, "poke")], line=1)
    a.func("poke")
    a.op("JUMPDEST", 2)
    a.push(10, 3).push(4, 3).op("CALLDATALOAD", 3).op("GT", 3)
    a.jumpi("boom", 3)
    a.op("STOP", 4)
    a.label("boom")
    a.op("JUMPDEST", 3)
    a.op("INVALID", 3)
    a.end_func("poke")
    result = a.assemble()
    entry, body = result.functions["poke"]
    abi = [FunctionSig("poke", sig, entry, body, False, ("x",))]
    return ContractBundle("gate", result.bytecode, abi)


GATE_TARGET = """\
target gate
fuzz:
    call poke(?x:uint256=0)
order fixed
"""


# -- parsing ---------------------------------------------------------------


def test_parse_valid_pool_target():
    t = parse_pool(POOL_TARGET)
    assert isinstance(t, FuzzTarget)
    assert t.name == "pool"
    assert t.address_aliases == {"A": 0x1001}
    assert len(t.setup) == 2
    assert len(t.fuzz) == 1
    assert t.setup[0].function == "mintDyad"
    assert t.setup[0].args == (1, 100)
    assert t.setup[0].sender is None
    assert t.setup[1].sender == "A"
    fz = t.fuzz[0]
    assert fz.function == "deposit"
    assert fz.args == (0x1001, 1, 10)
    assert fz.mutable_params == ("value",)
    assert t.order_mode == "fixed"


def test_parse_unknown_function_is_e001():
    bad = POOL_TARGET.replace("call redeemable", "call reemable")
    errs = parse_pool(bad)
    assert isinstance(errs, list)
    assert [e.code for e in errs] == ["E001"]
    line = bad.splitlines().index("    call reemable(1, 100) from A") + 1
    assert errs[0].line == line
    assert "reemable" in errs[0].message


def test_parse_arity_mismatch_is_e002():
    bad = POOL_TARGET.replace(
        "call deposit(A, 1, ?value:uint256=10) from A", "call deposit(1, 2)"
    )
    errs = parse_pool(bad)
    assert [e.code for e in errs] == ["E002"]
    assert "deposit takes 3 args, got 2" in errs[0].message


def test_parse_type_mismatches_are_e003():
    doc = """\
target toy
fuzz:
    call f(true, true, 0xab, [1])
    call f(?a:uint16=1, true, 0xab, [1])
    call f(?b:uint8=1, true, 0xab, [1])
"""
    errs = parse_target(doc, TOY_ABI)
    assert [e.code for e in errs] == ["E003", "E003", "E003"]
    assert "not a uint8" in errs[0].message
    assert "marker says uint16" in errs[1].message
    assert "named 'a', marker says 'b'" in errs[2].message


def test_parse_unknown_alias_is_e004():
    doc = """\
target toy
fuzz:
    call g(bob)
    call g(0x0000000000000000000000000000000000001001) from carol
"""
    errs = parse_target(doc, TOY_ABI)
    assert [e.code for e in errs] == ["E004", "E004"]
    assert "bob" in errs[0].message and "carol" in errs[1].message


def test_parse_out_of_range_is_e005():
    doc = """\
target toy
fuzz:
    call f(256, true, 0x, [])
    call f(1, true, 0x, [1]) value 115792089237316195423570985008687907853269984665640564039457584007913129639936
"""
    errs = parse_target(doc, TOY_ABI)
    assert [e.code for e in errs] == ["E005", "E005"]
    assert "out of range for uint8" in errs[0].message


def test_parse_syntax_errors_are_e000():
    doc = """\
target toy
target again
setup:
    call f(?a:uint8=1, true, 0x, [])
order sideways
banana split
"""
    errs = parse_target(doc, TOY_ABI)
    codes = [e.code for e in errs]
    assert codes == ["E000"] * 4
    assert "duplicate target" in errs[0].message
    assert "mutable parameters only belong in fuzz" in errs[1].message
    assert "order must be fixed or shuffle" in errs[2].message
    assert "unknown directive" in errs[3].message


def test_parse_reports_every_error_sorted():
    doc = """\
target pool
fuzz:
    call reemable(1)
    call deposit(1, 2)
    call deposit(bob, 1, 2)
"""
    errs = parse_pool(doc)
    assert [(e.code, e.line) for e in errs] == [
        ("E001", 3),
        ("E002", 4),
        ("E004", 5),
    ]


def test_parse_missing_target_line():
    errs = parse_target("fuzz:\n    call g(0x01)\n", TOY_ABI)
    assert any(e.code == "E000" and "missing target" in e.message for e in errs)


def test_parse_literal_forms_and_call_options():
    doc = """\
target toy
alias who = 0xc0de

fuzz:
    call f(0xff, false, 0xdeadbeef, [1, 0x2, 3]) value 7 delay 3
    call g(who) from who
"""
    t = parse_target(doc, TOY_ABI)
    assert isinstance(t, FuzzTarget)
    c0, c1 = t.fuzz
    assert c0.args == (0xFF, False, bytes.fromhex("deadbeef"), (1, 2, 3))
    assert c0.value == 7 and c0.delay == 3
    assert c1.args == (0xC0DE,) and c1.sender == "who"


def test_compile_error_render():
    err = CompileError("E001", 4, 10, "unknown function reemable")
    assert err.render() == "E001 line 4 col 10: unknown function reemable"


def test_render_target_roundtrip():
    abi = pool_abi()
    t = parse_target(POOL_TARGET, abi)
    again = parse_target(render_target(t, abi), abi)
    assert again == t


# -- seed target -------------------------------------------------------------


def test_seed_initial_target_shape():
    abi = pool_abi()
    t = seed_initial_target(abi)
    assert t.order_mode == "shuffle"
    names = [c.function for c in t.fuzz]
    assert names == ["mintDyad", "redeemable", "deposit"]  # properties excluded
    for call, sig in zip(t.fuzz, [s for s in abi if not s.is_property]):
        assert call.mutable_params == sig.param_names
        assert call.args == tuple(
            tuple(p.default()) if p.kind == "array" else p.default()
            for p in sig.params
        )


def test_seed_initial_target_rejects_empty_abi():
    with pytest.raises(EmptyAbi):
        seed_initial_target([])
    props_only = [FunctionSig("prop_x", (), None, None, True)]
    with pytest.raises(EmptyAbi):
        seed_initial_target(props_only)


# -- mutation -----------------------------------------------------------------


def test_uint8_mutations_stay_in_domain_and_reach_boundaries():
    ty = AbiType.parse("uint8")
    rng = random.Random(7)
    seen = {mutate_value(5, ty, rng, ()) for _ in range(600)}
    assert all(0 <= v < 256 for v in seen)
    assert {0, 1, 255, 128, 4, 6} <= seen


def test_bool_address_bytes_array_mutations():
    rng = random.Random(11)
    assert mutate_value(True, AbiType.parse("bool"), rng, ()) is False
    pool = (0x1001, 0x1002, 0xC0DE)
    for _ in range(20):
        v = mutate_value(0x1001, AbiType.parse("address"), rng, pool)
        assert v in (0x1002, 0xC0DE)
    for _ in range(50):
        b = mutate_value(b"\x01\x02", AbiType.parse("bytes"), rng, ())
        assert isinstance(b, bytes) and len(b) in (1, 2, 3)
    for _ in range(50):
        arr = mutate_value((1, 2, 3), AbiType.parse("uint256[]"), rng, ())
        assert isinstance(arr, tuple) and len(arr) in (2, 3, 4)
        assert all(0 <= x < (1 << 256) for x in arr)


def test_mutation_only_touches_mutable_params():
    abi = pool_abi()
    t = parse_target(POOL_TARGET, abi)
    rng = random.Random(3)
    cand = initial_candidate(t)
    for _ in range(10_000):
        cand = mutate(cand, t, abi, rng, (0x1001, 0x1002))
        assert cand.args[0][0] == 0x1001  # from: not mutable
        assert cand.args[0][1] == 1  # id: not mutable
        assert cand.order == (0,)


def test_mutation_is_deterministic():
    abi = pool_abi()
    t = parse_target(POOL_TARGET, abi)

    def run(seed):
        rng = random.Random(seed)
        cand = initial_candidate(t)
        return [
            (cand := mutate(cand, t, abi, rng, (0x1001,))).args
            for _ in range(200)
        ]

    assert run(9) == run(9)
    assert run(9) != run(10)


def test_splice_swaps_whole_call_rows():
    abi = [
        FunctionSig("f", ("uint256",), None, None, False, ("x",)),
        FunctionSig("h", ("uint256",), None, None, False, ("y",)),
    ]
    t = FuzzTarget(
        "t",
        {},
        (),
        tuple(
            parse_target(
                "target t\nfuzz:\n    call f(1)\n    call h(2)\n", abi
            ).fuzz
        ),
        "fixed",
    )
    a = initial_candidate(t)
    b = a.__class__(((7,), (8,)), a.order)
    rng = random.Random(0)
    child = mutate(a, t, abi, rng, (), other=b)
    assert child.args in (((1,), (8,)),)  # cut can only be 1
    assert child.order == a.order


def test_adjacent_swap_only_in_shuffle_mode():
    abi = [
        FunctionSig("f", ("uint256",), None, None, False, ("x",)),
        FunctionSig("h", ("uint256",), None, None, False, ("y",)),
    ]
    doc = "target t\nfuzz:\n    call f(1)\n    call h(2)\norder shuffle\n"
    t = parse_target(doc, abi)
    cand = initial_candidate(t)
    swapped = mutate(cand, t, abi, random.Random(1), ())
    assert swapped.order == (1, 0) and swapped.args == cand.args

    fixed = parse_target(doc.replace("shuffle", "fixed"), abi)
    same = mutate(initial_candidate(fixed), fixed, abi, random.Random(1), ())
    assert same.order == (0, 1)  # nothing to do: no mutables, no shuffle


# -- test cases and corpus ----------------------------------------------------


def test_testcase_id_is_canonical():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    camp = Campaign(world, t, rng_seed=0)
    tc = FuzzCase(tuple(camp._setup_txs))
    assert tc.id == FuzzCase(tuple(camp._setup_txs)).id
    assert len(tc.id) == 32 and int(tc.id, 16) >= 0
    other = FuzzCase(tuple(camp._setup_txs[:1]))
    assert other.id != tc.id


def test_corpus_save_load_roundtrip(tmp_path):
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    _, corpus, _ = run_campaign(world, t, {"execs": 300}, rng_seed=42)
    assert len(corpus) >= 1
    corpus.save(tmp_path / "corpus")
    files = sorted((tmp_path / "corpus").glob("*.json"))
    assert len(files) == len(corpus)
    for i, (f, tc) in enumerate(zip(files, corpus.entries)):
        assert f.name == f"{i:04d}_{tc.id}.json"
    loaded = Corpus.load(tmp_path / "corpus", destination=at)
    assert [e.id for e in loaded.entries] == [e.id for e in corpus.entries]
    assert loaded.deltas == corpus.deltas


# -- campaign -----------------------------------------------------------------


def test_gate_campaign_finds_assert_failure():
    bundle = gate_bundle()
    world, at = make_world(bundle)
    t = parse_target(GATE_TARGET, bundle.resolved_abi)
    cov, corpus, report = run_campaign(world, t, {"execs": 1000}, rng_seed=42)
    kinds = {f.kind for f in report.findings}
    assert kinds == {ASSERT_FAILURE}
    f = report.findings[0]
    assert f.function == "poke"
    assert cov.covered(at, f.pc)
    assert any(tc.id == f.testcase_id for tc in corpus.entries)


def test_campaign_is_deterministic():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)

    def run():
        cov, corpus, report = run_campaign(world, t, {"execs": 500}, rng_seed=7)
        return (
            cov.to_json(),
            [e.id for e in corpus.entries],
            corpus.deltas,
            report.to_json(),
        )

    assert run() == run()


def test_campaign_seeds_differ():
    bundle = load_bundle(FIXTURES / "ballot")
    world, at = make_world(bundle)
    t = seed_initial_target(bundle.resolved_abi)
    cov1, _, _ = run_campaign(world, t, {"execs": 300}, rng_seed=1)
    cov2, _, _ = run_campaign(world, t, {"execs": 300}, rng_seed=2)
    # same plateau either way, but the paths explored may differ
    assert cov1.bits.keys() == cov2.bits.keys()


def test_ballot_guard_resists_random_fuzzing():
    bundle = load_bundle(FIXTURES / "ballot")
    world, at = make_world(bundle)
    t = seed_initial_target(bundle.resolved_abi)
    cov, corpus, report = run_campaign(world, t, {"execs": 2000}, rng_seed=42)
    assert report.findings == []
    gaps = extract_uncovered_functions(bundle, cov)
    assert [g.status for g in gaps if g.sig.startswith("castVote(")] == [
        PARTIALLY_COVERED
    ]


def test_pool_campaign_reports_property_violation():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    _, corpus, report = run_campaign(world, t, {"execs": 200}, rng_seed=42)
    assert [f.kind for f in report.findings] == [PROPERTY_VIOLATION]
    assert report.findings[0].function == "prop_balanced"
    assert "zero word" in report.findings[0].message


def test_property_holds_without_deposit():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    doc = """\
target pool
fuzz:
    call mintDyad(1, ?amount:uint256=5)
order fixed
"""
    t = parse_target(doc, bundle.resolved_abi)
    _, _, report = run_campaign(world, t, {"execs": 200}, rng_seed=42)
    assert report.findings == []


def test_chunked_run_matches_single_run():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    one = Campaign(world, t, rng_seed=5)
    one.run(400)
    two = Campaign(world, t, rng_seed=5)
    for _ in range(4):
        two.run(100)
    assert one.coverage.to_json() == two.coverage.to_json()
    assert [e.id for e in one.corpus.entries] == [
        e.id for e in two.corpus.entries
    ]


def test_campaign_seconds_budget_stops_early():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    _, corpus, _ = run_campaign(
        world, t, {"execs": 10_000_000, "seconds": 0.2}, rng_seed=3
    )
    assert len(corpus) >= 1  # stopped on time, still produced output


# -- bug detection -----------------------------------------------------------


def test_detect_bugs_rules():
    bundle = gate_bundle()
    world, at = make_world(bundle)
    from sctest.evm.engine import execute_sequence
    from sctest.evm.types import Transaction

    txs = [
        Transaction(function_call="poke", args=(11,), source=0x1001, destination=at)
    ]
    world_after, results = execute_sequence(world, txs)
    found = detect_bugs(results, world_after, bundle.resolved_abi, txs=txs)
    assert len(found) == 1
    kind, pc, fn, msg = found[0]
    assert kind == ASSERT_FAILURE and fn == "poke"
    assert f"0x{pc:x}" in msg

    txs_ok = [
        Transaction(function_call="poke", args=(10,), source=0x1001, destination=at)
    ]
    world_after, results = execute_sequence(world, txs_ok)
    assert detect_bugs(results, world_after, bundle.resolved_abi, txs=txs_ok) == []


def test_detect_bugs_property_probe():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    from sctest.evm.engine import execute_sequence
    from sctest.evm.types import Transaction

    txs = [
        Transaction(function_call="mintDyad", args=(1, 50), source=0x1001, destination=at),
        Transaction(function_call="redeemable", args=(1, 50), source=0x1001, destination=at),
        Transaction(function_call="deposit", args=(0x1001, 1, 50), source=0x1001, destination=at),
    ]
    world_after, results = execute_sequence(world, txs)
    found = detect_bugs(results, world_after, bundle.resolved_abi, txs=txs)
    assert [(k, fn) for k, _, fn, _ in found] == [
        (PROPERTY_VIOLATION, "prop_balanced")
    ]


# -- replay and minimization ---------------------------------------------------


def test_replay_reproduces_campaign():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    cov, corpus, report = run_campaign(world, t, {"execs": 500}, rng_seed=42)
    cov2, report2 = replay(world, corpus)
    assert cov2.bits == cov.bits
    assert {(f.kind, f.pc, f.function) for f in report2.findings} == {
        (f.kind, f.pc, f.function) for f in report.findings
    }


def test_replay_marks_stale_entries_nonfatally():
    pool = load_bundle(FIXTURES / "pool")
    world, at = make_world(pool)
    t = parse_target(POOL_TARGET, pool.resolved_abi)
    _, corpus, _ = run_campaign(world, t, {"execs": 100}, rng_seed=1)

    gate = gate_bundle()
    gate_world, _ = make_world(gate)
    cov, report = replay(gate_world, corpus)
    assert cov.bits == {} and report.findings == []
    assert all(d.get("stale") for d in corpus.deltas)


def test_minimize_drops_duplicate_entries():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    camp = Campaign(world, t, rng_seed=0)
    camp.run(50)
    doubled = Corpus()
    for e, d in zip(camp.corpus.entries, camp.corpus.deltas):
        doubled.add(e, dict(d))
        doubled.add(e, dict(d))
    slim = minimize_corpus(world, doubled, BugReport())
    assert len(slim) < len(doubled)
    full_bits = replay(world, doubled)[0].bits
    assert replay(world, slim)[0].bits == full_bits


def test_minimized_corpus_entries_are_essential():
    bundle = load_bundle(FIXTURES / "pool")
    world, at = make_world(bundle)
    t = parse_target(POOL_TARGET, bundle.resolved_abi)
    cov, corpus, report = run_campaign(world, t, {"execs": 500}, rng_seed=42)
    protected = {f.testcase_id for f in report.findings}
    base_cov, base_rep = replay(world, corpus)
    base = (
        base_cov.bits,
        {(f.kind, f.pc, f.function) for f in base_rep.findings},
    )
    for i, entry in enumerate(corpus.entries):
        if entry.id in protected:
            continue
        trial = Corpus(
            [e for j, e in enumerate(corpus.entries) if j != i],
            [d for j, d in enumerate(corpus.deltas) if j != i],
        )
        cov_i, rep_i = replay(world, trial)
        got = (
            cov_i.bits,
            {(f.kind, f.pc, f.function) for f in rep_i.findings},
        )
        assert got != base, f"entry {i} is redundant"


# -- validator soundness --------------------------------------------------------


@pytest.mark.parametrize(
    "name", ["ballot", "bytekey", "pool", "feeswap", "cubic", "lottery"]
)
def test_seed_target_executes_cleanly(name):
    bundle = load_bundle(FIXTURES / name)
    world, _ = make_world(bundle)
    t = seed_initial_target(bundle.resolved_abi)
    camp = Campaign(world, t, rng_seed=13)
    camp.run(50)  # raising ArityMismatch/TypeMismatch here would fail the test
    assert camp.executions == 50
