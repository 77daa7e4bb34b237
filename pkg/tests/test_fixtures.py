"""Behavioral oracles for the bundled fixture contracts.

Each fixture exists to exercise one engine capability, and these tests
freeze the behaviors the rest of the suite depends on: which inputs
reach which halts, what storage each flow leaves behind, and that the
checked-in bytes match what scripts/build_fixtures.py generates.
"""

import filecmp
import importlib.util
from pathlib import Path

import pytest

from sctest.evm import Transaction, execute_sequence, execute_tx, make_world

ACCT_A = 0x1001
ACCT_B = 0x1002
BALLOT_SALT = 0x0BADBEEF

REPO = Path(__file__).resolve().parent.parent


def run_seq(bundle, txs):
    """Execute txs from genesis; return (world, last ExecResult)."""
    world, at = make_world(bundle)
    world, results = execute_sequence(
        world,
        [
            Transaction(
                function_call=fn,
                args=args,
                source=kw.get("source", ACCT_A),
                destination=at,
                delay=kw.get("delay", 0),
                value=kw.get("value", 0),
            )
            for fn, args, kw in txs
        ],
    )
    return world, results[-1], at


def call(fn, args, **kw):
    return (fn, args, kw)


# -- regeneration ------------------------------------------------------------


def test_fixtures_match_builder_output(tmp_path, fixtures_dir):
    spec = importlib.util.spec_from_file_location(
        "build_fixtures", REPO / "scripts" / "build_fixtures.py"
    )
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--out", str(tmp_path)])

    files = ("contract.hex", "abi.json", "source.sol", "linemap.json", "world.json")
    for name in mod.BUILDERS:
        for fname in files:
            built = tmp_path / name / fname
            checked_in = fixtures_dir / name / fname
            assert filecmp.cmp(built, checked_in, shallow=False), (
                f"{name}/{fname} differs from the checked-in fixture; "
                "rerun scripts/build_fixtures.py"
            )


def test_bundles_load_with_resolved_entries(bundles):
    for name, bundle in bundles.items():
        assert bundle.by_name, name
        for sig in bundle.resolved_abi:
            assert sig.entry_offset is not None, (name, sig.name)
            lo, hi = sig.body_range
            assert lo <= sig.entry_offset < hi, (name, sig.name)
        # every fixture routes unknown selectors to an empty success
        world, at = make_world(bundle)
        tx = Transaction(
            function_call="", call_data=b"\xde\xad\xbe\xef", source=ACCT_A, destination=at
        )
        _, res = execute_tx(world, tx)
        assert res.halt == "STOP" and res.return_data == b""


# -- ballot: keccak-guarded assert -------------------------------------------


def test_ballot_guard_rejects_type_default_args(ballot):
    _, res, _ = run_seq(ballot, [call("castVote", (0, 0, 0, 0, 0))])
    assert res.halt == "REVERT"
    # the guard hashed both buffers; their preimages are captured for
    # the concolic preimage table
    preimages = {data for data, _ in res.sha_preimages}
    assert (0).to_bytes(32, "big") + BALLOT_SALT.to_bytes(32, "big") in preimages


def test_ballot_guard_accepts_matching_preimages(ballot):
    # keccak(voter ++ id) == keccak(reason ++ sig+salt) whenever
    # voter == reason and id == sig + salt
    world, res, at = run_seq(ballot, [call("castVote", (BALLOT_SALT, 5, 5, 0, 0))])
    assert res.halt == "STOP"
    assert world.storage[at] == {0: 5}


def test_ballot_assert_fires_behind_guard(ballot):
    world, res, at = run_seq(ballot, [call("castVote", (BALLOT_SALT, 5, 5, 7, 0))])
    assert res.halt == "INVALID"
    assert res.failed
    # the faulting instruction is the INVALID inside castVote's body
    addr, off = res.last_offset
    assert addr == at
    assert ballot.image.code[off] == 0xFE
    lo, hi = ballot.by_name["castVote"].body_range
    assert lo <= off < hi


def test_ballot_salt_mismatch_reverts(ballot):
    _, res, _ = run_seq(ballot, [call("castVote", (5, 5, 5, 0, 0))])
    assert res.halt == "REVERT"


# -- bytekey: byte-loop window ------------------------------------------------


def test_bytekey_magic_byte_faults(bytekey):
    _, res, _ = run_seq(bytekey, [call("validate", (0, b"\x03"))])
    assert res.halt == "INVALID"


@pytest.mark.parametrize("key", [b"", b"\x00", b"\x00\x01\x02\x04", b"\xff" * 8])
def test_bytekey_other_bytes_pass(bytekey, key):
    _, res, _ = run_seq(bytekey, [call("validate", (0, key))])
    assert res.halt == "STOP"


def test_bytekey_magic_byte_is_unique_over_domain(bytekey):
    # brute-force oracle: x == 3 is the only byte where x*x*x - 12 mod 2^256
    # lands in (0, 16)
    hits = [
        x
        for x in range(256)
        if 0 < (x * x * x - 12) % (1 << 256) < 16
    ]
    assert hits == [3]
    for x in hits:
        _, res, _ = run_seq(bytekey, [call("validate", (0, bytes([x])))])
        assert res.halt == "INVALID"


def test_bytekey_later_byte_also_reachable(bytekey):
    _, res, _ = run_seq(bytekey, [call("validate", (0, b"\x00\x00\x03"))])
    assert res.halt == "INVALID"


# -- pool: invocation-order bug ----------------------------------------------

POOL_SETUP = [
    call("mintDyad", (1, 100)),
    call("redeemable", (1, 100), source=ACCT_A),
]


def prop_balanced_holds(world, at):
    _, res = execute_tx(
        world,
        Transaction(function_call="prop_balanced", source=ACCT_A, destination=at),
    )
    assert res.halt == "RETURN"
    return int.from_bytes(res.return_data, "big") == 1


def test_pool_setup_keeps_invariant(pool):
    world, res, at = run_seq(pool, POOL_SETUP)
    assert res.halt == "STOP"
    assert prop_balanced_holds(world, at)


def test_pool_aligned_deposit_breaks_invariant(pool):
    world, res, at = run_seq(
        pool, POOL_SETUP + [call("deposit", (ACCT_A, 1, 10), source=ACCT_B)]
    )
    assert res.halt == "STOP"
    assert world.storage[at][0] == 110  # pool balance moved the wrong way
    assert world.storage[at][1] == 100
    assert not prop_balanced_holds(world, at)


@pytest.mark.parametrize(
    "dep_args",
    [
        (ACCT_A, 1, 0),  # zero value
        (ACCT_A, 2, 10),  # id never minted or granted
        (ACCT_B, 1, 10),  # grant was made by A, not B
        (ACCT_A, 1, 101),  # value above the minted amount
    ],
)
def test_pool_misaligned_deposits_revert(pool, dep_args):
    world, res, at = run_seq(
        pool, POOL_SETUP + [call("deposit", dep_args, source=ACCT_B)]
    )
    assert res.halt == "REVERT"
    assert world.storage[at][0] == 100
    assert prop_balanced_holds(world, at)


def test_pool_deposit_without_setup_reverts(pool):
    _, res, _ = run_seq(pool, [call("deposit", (ACCT_A, 1, 10))])
    assert res.halt == "REVERT"


# -- feeswap: same-second fee collapse ----------------------------------------

ATTACK = [
    call("set_fee1e9", (1000,)),
    call("notifyWithdraw", (1000,)),
    call("velocore_execute", ([123],), delay=0),
]


def test_feeswap_same_second_swap_faults(feeswap):
    _, res, _ = run_seq(feeswap, ATTACK)
    assert res.halt == "INVALID"
    assert res.failed


def test_feeswap_attack_arithmetic(feeswap):
    # the multiplier path computes 1000 * 1000 // 10^9 == 0, which falls
    # out of the (10, 1000) fee band
    assert 1000 * 1000 // 10**9 == 0


def test_feeswap_delayed_swap_passes(feeswap):
    # a delayed swap skips the multiplier, so an in-band fee passes the check
    txs = [
        call("set_fee1e9", (500,)),
        call("notifyWithdraw", (1000,)),
        call("velocore_execute", ([5, 123],), delay=7),
    ]
    world, res, at = run_seq(feeswap, txs)
    assert res.halt == "STOP"
    assert world.storage[at][0] == 500  # fee untouched


def test_feeswap_without_matching_token_passes(feeswap):
    txs = ATTACK[:2] + [call("velocore_execute", ([5, 9],), delay=0)]
    _, res, _ = run_seq(feeswap, txs)
    assert res.halt == "STOP"


# -- cubic: nested equality branches ------------------------------------------


@pytest.mark.parametrize(
    "xyz,store",
    [
        ((1, 3, 10), {}),  # h=4, 9 != 4: outer branch falls through
        ((1, 2, 10), {}),  # h == y*y but z != h
        ((1, 2, 4), {0: 1}),  # both equalities hold
    ],
)
def test_cubic_paths(cubic, xyz, store):
    world, res, at = run_seq(cubic, [call("example", xyz)])
    assert res.halt == "STOP"
    assert dict(world.storage[at]) == store


# -- lottery: loop-guarded cubic match -----------------------------------------


@pytest.mark.parametrize(
    "args,store",
    [
        (([8, 1, 1], 2), {0: 1}),  # 8 == 2**3 on the first element
        (([9, 7], 2), {}),
        (([], 5), {}),
        (([0], 0), {0: 1}),  # 0 == 0**3
    ],
)
def test_lottery_paths(lottery, args, store):
    world, res, at = run_seq(lottery, [call("checkBalance", args)])
    assert res.halt == "STOP"
    assert dict(world.storage[at]) == store


# -- shared sanity -------------------------------------------------------------


def test_fixture_runs_are_deterministic(bundles):
    for name, bundle in bundles.items():
        fn = bundle.resolved_abi[0]
        args = tuple(p.default() for p in fn.params)
        a = run_seq(bundle, [call(fn.name, args)])[1]
        b = run_seq(bundle, [call(fn.name, args)])[1]
        assert a == b, name
