#!/usr/bin/env python3
"""Build the bundled test-contract fixtures.

Each builder hand-assembles one contract with the sctest assembler and
emits a bundle directory: contract.hex, abi.json (entry offsets and body
ranges taken from the assembler, not guessed), source.sol, linemap.json,
and world.json.  Regenerating into a scratch directory and diffing
against the checked-in fixtures is covered by a test, so edits here that
change bytes are caught immediately.

Usage: python3 scripts/build_fixtures.py [--out DIR]
"""

import argparse
import json
import sys
import textwrap
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sctest.bytecode.abi import FunctionSig
from sctest.bytecode.asm import Asm, dispatcher

DEFAULT_ACCOUNTS = [
    {"address": "0x0000000000000000000000000000000000001001", "balance": 10**18},
    {"address": "0x0000000000000000000000000000000000001002", "balance": 10**18},
]
WORLD = {"accounts": DEFAULT_ACCOUNTS, "deploy_at": "0xC0DE"}


def _sel(name: str, params: tuple[str, ...]) -> bytes:
    return FunctionSig(name, params).selector


def _mstore_word(a: Asm, offset: int, line: int) -> None:
    """MSTORE(offset, <stack top>)."""
    a.push(offset, line).op("MSTORE", line)


def _sha3_64(a: Asm, line: int) -> None:
    """SHA3 over mem[0:64]; pushes the digest."""
    a.push(64, line).push(0, line).op("SHA3", line)


# ---------------------------------------------------------------------------
# ballot: a keccak-equality guard in front of a buggy internal call.
# The guard compares keccak(voter ++ id) against keccak(reason ++ sig+salt),
# so random mutation never satisfies it, while a concolic preimage rewrite
# solves it in one round.  Behind the guard, params == 7 trips an assert.
# ---------------------------------------------------------------------------

BALLOT_SALT = 0x0BADBEEF

BALLOT_SOURCE = """\
contract Ballot {
    uint256 lastVoter;

    function castVote(uint256 id, uint256 voter, uint256 reason, uint256 params, uint256 sig) external {
        if (keccak256(abi.encode(voter, id)) == keccak256(abi.encode(reason, sig + 0x0BADBEEF))) {
            _castVoteInternal(voter, params);
        } else {
            revert();
        }
    }

    function _castVoteInternal(uint256 voter, uint256 params) internal {
        assert(params != 7);
        lastVoter = voter;
    }
}
"""


def build_ballot():
    a = Asm()
    sig = ("uint256", "uint256", "uint256", "uint256", "uint256")
    dispatcher(a, [(_sel("castVote", sig), "castVote")], line=1)

    a.func("castVote")
    a.op("JUMPDEST", 4)
    # left digest: keccak(voter ++ id)
    a.push(36, 5).op("CALLDATALOAD", 5)
    _mstore_word(a, 0, 5)
    a.push(4, 5).op("CALLDATALOAD", 5)
    _mstore_word(a, 32, 5)
    _sha3_64(a, 5)
    # right digest: keccak(reason ++ sig+salt)
    a.push(68, 5).op("CALLDATALOAD", 5)
    _mstore_word(a, 0, 5)
    a.push(132, 5).op("CALLDATALOAD", 5)
    a.push(BALLOT_SALT, 5).op("ADD", 5)
    _mstore_word(a, 32, 5)
    _sha3_64(a, 5)
    a.op("EQ", 5)
    a.jumpi("granted", 5)
    a.push(0, 8).push(0, 8).op("REVERT", 8)

    a.label("granted")
    a.op("JUMPDEST", 6)
    a.push(100, 13).op("CALLDATALOAD", 13)
    a.push(7, 13).op("EQ", 13)
    a.jumpi("vote_assert", 13)
    a.push(36, 14).op("CALLDATALOAD", 14)
    a.push(0, 14).op("SSTORE", 14)
    a.op("STOP", 15)
    a.label("vote_assert")
    a.op("JUMPDEST", 13)
    a.op("INVALID", 13)
    a.end_func("castVote")

    return (
        a,
        BALLOT_SOURCE,
        [("castVote", sig, ("id", "voter", "reason", "params", "sig"), False)],
        "Ballot",
    )


# ---------------------------------------------------------------------------
# bytekey: a byte-wise loop over a dynamic bytes argument.  Each byte x
# feeds c = x*x*x - 12, and 0 < c < 16 trips an assert; x == 3 is the only
# byte value that lands in the window (c = 15).
# ---------------------------------------------------------------------------

BYTEKEY_SOURCE = """\
contract ByteKey {
    function validate(address proposer, bytes calldata key) external pure {
        for (uint256 i = 0; i < key.length; i++) {
            uint8 x = uint8(key[i]);
            uint256 c = uint256(x) * x * x - 12;
            if (0 < c && c < 16) {
                assert(false);
            }
        }
    }
}
"""


def build_bytekey():
    a = Asm()
    sig = ("address", "bytes")
    dispatcher(a, [(_sel("validate", sig), "validate")], line=1)

    a.func("validate")
    a.op("JUMPDEST", 2)
    # key length via its head-relative offset; element bytes start at 4+off+32
    a.push(36, 3).op("CALLDATALOAD", 3)
    a.push(4, 3).op("ADD", 3).op("CALLDATALOAD", 3)  # [len]
    a.push(0, 3)  # [len, i]

    a.label("key_loop")
    a.op("JUMPDEST", 3)
    a.op("DUP2", 3).op("DUP2", 3).op("LT", 3).op("ISZERO", 3)
    a.jumpi("key_done", 3)
    # x = key[i] (top byte of the word at 4+off+32+i)
    a.op("DUP1", 4)
    a.push(36, 4).op("CALLDATALOAD", 4).op("ADD", 4)
    a.push(36, 4).op("ADD", 4).op("CALLDATALOAD", 4)
    a.push(248, 4).op("SHR", 4)  # [len, i, x]
    # c = x*x*x - 12
    a.op("DUP1", 5).op("DUP1", 5).op("MUL", 5).op("MUL", 5)
    a.push(12, 5).op("SWAP1", 5).op("SUB", 5)  # [len, i, c]
    # 0 < c && c < 16
    a.op("DUP1", 6).push(0, 6).op("LT", 6)  # [len, i, c, 0<c]
    a.op("SWAP1", 6).push(16, 6).op("SWAP1", 6).op("LT", 6)  # [len, i, 0<c, c<16]
    a.op("AND", 6)
    a.jumpi("key_assert", 6)
    a.push(1, 3).op("ADD", 3)
    a.jump("key_loop", 3)

    a.label("key_done")
    a.op("JUMPDEST", 10)
    a.op("POP", 10).op("POP", 10).op("STOP", 10)
    a.label("key_assert")
    a.op("JUMPDEST", 7)
    a.op("INVALID", 7)
    a.end_func("validate")

    return (
        a,
        BYTEKEY_SOURCE,
        [("validate", sig, ("proposer", "key"), False)],
        "ByteKey",
    )


# ---------------------------------------------------------------------------
# pool: an invocation-order bug.  deposit is gated by one combined guard over
# value, id2asset[id], and allowed[from][id], so it only executes after
# mintDyad and redeemable have set up matching state; its body then moves the
# pool balance the wrong way, which prop_balanced exposes.
# ---------------------------------------------------------------------------

POOL_SOURCE = """\
contract Pool {
    uint256 poolBal;
    uint256 totalMinted;
    mapping(uint256 => uint256) id2asset;
    mapping(address => mapping(uint256 => uint256)) allowed;

    function mintDyad(uint256 id, uint256 amount) external {
        id2asset[id] += amount;
        poolBal += amount;
        totalMinted += amount;
    }

    function redeemable(uint256 id, uint256 value) external {
        allowed[msg.sender][id] = value;
    }

    function deposit(address from, uint256 id, uint256 value) external {
        require(value > 0);
        require(id2asset[id] >= value);
        require(allowed[from][id] >= value);
        poolBal += value;
    }

    function prop_balanced() external view returns (bool) {
        return poolBal <= totalMinted;
    }
}
"""

ID2ASSET_BASE = 2
ALLOWED_BASE = 3


def _map_slot(a: Asm, key_push, base_push, line: int) -> None:
    """Push keccak(key ++ base); key_push/base_push emit the two words."""
    key_push()
    _mstore_word(a, 0, line)
    base_push()
    _mstore_word(a, 32, line)
    _sha3_64(a, line)


def build_pool():
    a = Asm()
    mint_sig = ("uint256", "uint256")
    red_sig = ("uint256", "uint256")
    dep_sig = ("address", "uint256", "uint256")
    dispatcher(
        a,
        [
            (_sel("mintDyad", mint_sig), "mintDyad"),
            (_sel("redeemable", red_sig), "redeemable"),
            (_sel("deposit", dep_sig), "deposit"),
            (_sel("prop_balanced", ()), "prop_balanced"),
        ],
        line=1,
    )

    a.func("mintDyad")
    a.op("JUMPDEST", 7)
    _map_slot(
        a,
        lambda: a.push(4, 8).op("CALLDATALOAD", 8),
        lambda: a.push(ID2ASSET_BASE, 8),
        8,
    )
    a.op("DUP1", 8).op("SLOAD", 8)
    a.push(36, 8).op("CALLDATALOAD", 8).op("ADD", 8)
    a.op("SWAP1", 8).op("SSTORE", 8)
    a.push(0, 9).op("SLOAD", 9)
    a.push(36, 9).op("CALLDATALOAD", 9).op("ADD", 9)
    a.push(0, 9).op("SSTORE", 9)
    a.push(1, 10).op("SLOAD", 10)
    a.push(36, 10).op("CALLDATALOAD", 10).op("ADD", 10)
    a.push(1, 10).op("SSTORE", 10)
    a.op("STOP", 11)
    a.end_func("mintDyad")

    a.func("redeemable")
    a.op("JUMPDEST", 13)
    # allowed[msg.sender][id] = value, nested slot keccak(id ++ keccak(sender ++ base))
    _map_slot(
        a,
        lambda: a.op("CALLER", 14),
        lambda: a.push(ALLOWED_BASE, 14),
        14,
    )
    _mstore_word(a, 32, 14)
    a.push(4, 14).op("CALLDATALOAD", 14)
    _mstore_word(a, 0, 14)
    _sha3_64(a, 14)
    a.push(36, 14).op("CALLDATALOAD", 14).op("SWAP1", 14).op("SSTORE", 14)
    a.op("STOP", 15)
    a.end_func("redeemable")

    a.func("deposit")
    a.op("JUMPDEST", 17)
    # value > 0
    a.push(68, 18).op("CALLDATALOAD", 18)
    a.push(0, 18).op("LT", 18)
    # id2asset[id] >= value
    _map_slot(
        a,
        lambda: a.push(36, 19).op("CALLDATALOAD", 19),
        lambda: a.push(ID2ASSET_BASE, 19),
        19,
    )
    a.op("SLOAD", 19)
    a.push(68, 19).op("CALLDATALOAD", 19)
    a.op("SWAP1", 19).op("LT", 19).op("ISZERO", 19)
    a.op("AND", 19)
    # allowed[from][id] >= value
    _map_slot(
        a,
        lambda: a.push(4, 20).op("CALLDATALOAD", 20),
        lambda: a.push(ALLOWED_BASE, 20),
        20,
    )
    _mstore_word(a, 32, 20)
    a.push(36, 20).op("CALLDATALOAD", 20)
    _mstore_word(a, 0, 20)
    _sha3_64(a, 20)
    a.op("SLOAD", 20)
    a.push(68, 20).op("CALLDATALOAD", 20)
    a.op("SWAP1", 20).op("LT", 20).op("ISZERO", 20)
    a.op("AND", 20)
    a.jumpi("dep_body", 20)
    a.push(0, 18).push(0, 18).op("REVERT", 18)
    a.label("dep_body")
    a.op("JUMPDEST", 21)
    a.push(0, 21).op("SLOAD", 21)
    a.push(68, 21).op("CALLDATALOAD", 21).op("ADD", 21)
    a.push(0, 21).op("SSTORE", 21)
    a.op("STOP", 22)
    a.end_func("deposit")

    a.func("prop_balanced")
    a.op("JUMPDEST", 24)
    a.push(0, 25).op("SLOAD", 25)
    a.push(1, 25).op("SLOAD", 25)
    a.op("LT", 25).op("ISZERO", 25)
    _mstore_word(a, 0, 25)
    a.push(32, 25).push(0, 25).op("RETURN", 25)
    a.end_func("prop_balanced")

    return (
        a,
        POOL_SOURCE,
        [
            ("mintDyad", mint_sig, ("id", "amount"), False),
            ("redeemable", red_sig, ("id", "value"), False),
            ("deposit", dep_sig, ("from", "id", "value"), False),
            ("prop_balanced", (), (), True),
        ],
        "Pool",
    )


# ---------------------------------------------------------------------------
# feeswap: a time-dependent fee multiplier.  notifyWithdraw records a
# truncated timestamp; when a swap lands in the same second the effective fee
# collapses to zero under integer division and the fee-band assert fires.
# ---------------------------------------------------------------------------

FEESWAP_SOURCE = """\
contract FeeSwap {
    uint256 fee1e9;
    uint256 feeMultiplier;
    uint256 lastWithdrawTimestamp;

    function set_fee1e9(uint256 fee) external {
        fee1e9 = fee;
    }

    function notifyWithdraw(uint128 m) external {
        feeMultiplier = m;
        lastWithdrawTimestamp = uint32(block.timestamp);
    }

    function velocore_execute(uint256[] calldata tokens) external {
        uint256 effectiveFee1e9 = fee1e9;
        if (lastWithdrawTimestamp == uint32(block.timestamp)) {
            effectiveFee1e9 = effectiveFee1e9 * feeMultiplier / 1e9;
        }
        for (uint256 i = 0; i < tokens.length; i++) {
            if (tokens[i] == uint256(123)) {
                assert(10 < effectiveFee1e9 && effectiveFee1e9 < 1000);
            }
        }
    }
}
"""


def build_feeswap():
    a = Asm()
    exe_sig = ("uint256[]",)
    dispatcher(
        a,
        [
            (_sel("set_fee1e9", ("uint256",)), "set_fee1e9"),
            (_sel("notifyWithdraw", ("uint128",)), "notifyWithdraw"),
            (_sel("velocore_execute", exe_sig), "velocore_execute"),
        ],
        line=1,
    )

    a.func("set_fee1e9")
    a.op("JUMPDEST", 6)
    a.push(4, 7).op("CALLDATALOAD", 7)
    a.push(0, 7).op("SSTORE", 7)
    a.op("STOP", 8)
    a.end_func("set_fee1e9")

    a.func("notifyWithdraw")
    a.op("JUMPDEST", 10)
    a.push(4, 11).op("CALLDATALOAD", 11)
    a.push(1, 11).op("SSTORE", 11)
    a.op("TIMESTAMP", 12)
    a.push(0xFFFFFFFF, 12).op("AND", 12)
    a.push(2, 12).op("SSTORE", 12)
    a.op("STOP", 13)
    a.end_func("notifyWithdraw")

    a.func("velocore_execute")
    a.op("JUMPDEST", 15)
    a.push(0, 16).op("SLOAD", 16)  # [eff]
    a.push(2, 17).op("SLOAD", 17)
    a.op("TIMESTAMP", 17)
    a.push(0xFFFFFFFF, 17).op("AND", 17)
    a.op("EQ", 17).op("ISZERO", 17)
    a.jumpi("fee_plain", 17)
    a.push(1, 18).op("SLOAD", 18).op("MUL", 18)
    a.push(10**9, 18).op("SWAP1", 18).op("DIV", 18)
    a.label("fee_plain")
    a.op("JUMPDEST", 20)
    a.push(4, 20).op("CALLDATALOAD", 20)
    a.push(4, 20).op("ADD", 20).op("CALLDATALOAD", 20)  # [eff, len]
    a.push(0, 20)  # [eff, len, i]

    a.label("tok_loop")
    a.op("JUMPDEST", 20)
    a.op("DUP2", 20).op("DUP2", 20).op("LT", 20).op("ISZERO", 20)
    a.jumpi("tok_done", 20)
    a.op("DUP1", 21)
    a.push(32, 21).op("MUL", 21)
    a.push(4, 21).op("CALLDATALOAD", 21).op("ADD", 21)
    a.push(36, 21).op("ADD", 21).op("CALLDATALOAD", 21)
    a.push(123, 21).op("EQ", 21)
    a.jumpi("tok_check", 21)
    a.label("tok_next")
    a.op("JUMPDEST", 20)
    a.push(1, 20).op("ADD", 20)
    a.jump("tok_loop", 20)

    a.label("tok_done")
    a.op("JUMPDEST", 25)
    a.op("POP", 25).op("POP", 25).op("POP", 25).op("STOP", 25)

    a.label("tok_check")
    a.op("JUMPDEST", 22)
    a.op("DUP3", 22)
    a.push(10, 22).op("LT", 22)  # [.., 10<eff]
    a.push(1000, 22)
    a.op("DUP5", 22).op("LT", 22)  # [.., 10<eff, eff<1000]
    a.op("AND", 22)
    a.jumpi("tok_next", 22)
    a.op("INVALID", 22)
    a.end_func("velocore_execute")

    return (
        a,
        FEESWAP_SOURCE,
        [
            ("set_fee1e9", ("uint256",), ("fee",), False),
            ("notifyWithdraw", ("uint128",), ("m",), False),
            ("velocore_execute", exe_sig, ("tokens",), False),
        ],
        "FeeSwap",
    )


# ---------------------------------------------------------------------------
# cubic: nested equality branches over a cubic polynomial, the standard
# shape for exercising all-but-one concretization (h pinned, y solved).
# ---------------------------------------------------------------------------

CUBIC_SOURCE = """\
contract Cubic {
    uint256 hit;

    function example(uint8 x, uint8 y, uint8 z) external {
        uint256 h = uint256(x)*x*x + uint256(x)*x + 2;
        if (h == uint256(y)*y) {
            if (uint256(z) == h) {
                hit = 1;
            }
        }
    }
}
"""


def build_cubic():
    a = Asm()
    sig = ("uint8", "uint8", "uint8")
    dispatcher(a, [(_sel("example", sig), "example")], line=1)

    a.func("example")
    a.op("JUMPDEST", 4)
    # h = x*x*x + x*x + 2
    a.push(4, 5).op("CALLDATALOAD", 5)
    a.op("DUP1", 5).op("DUP1", 5).op("MUL", 5)  # [x, x*x]
    a.op("DUP1", 5).op("SWAP2", 5).op("MUL", 5)  # [x*x, x*x*x]
    a.op("ADD", 5)
    a.push(2, 5).op("ADD", 5)  # [h]
    # h == y*y
    a.push(36, 6).op("CALLDATALOAD", 6)
    a.op("DUP1", 6).op("MUL", 6)
    a.op("DUP2", 6).op("EQ", 6)
    a.jumpi("sq_match", 6)
    a.op("POP", 11).op("STOP", 11)
    a.label("sq_match")
    a.op("JUMPDEST", 7)
    # z == h
    a.push(68, 7).op("CALLDATALOAD", 7)
    a.op("EQ", 7)
    a.jumpi("full_match", 7)
    a.op("STOP", 10)
    a.label("full_match")
    a.op("JUMPDEST", 8)
    a.push(1, 8)
    a.push(0, 8).op("SSTORE", 8)
    a.op("STOP", 9)
    a.end_func("example")

    return a, CUBIC_SOURCE, [("example", sig, ("x", "y", "z"), False)], "Cubic"


# ---------------------------------------------------------------------------
# lottery: a loop-guarded nonlinear equality against an array element,
# the canonical shape for the generator's value prompt.
# ---------------------------------------------------------------------------

LOTTERY_SOURCE = """\
contract Lottery {
    uint256 winner;

    function checkBalance(uint256[] calldata tickets, uint256 amount) external {
        for (uint256 i = 0; i < tickets.length; i++) {
            if (tickets[i] == amount*amount*amount) {
                winner = 1;
            }
        }
    }
}
"""


def build_lottery():
    a = Asm()
    sig = ("uint256[]", "uint256")
    dispatcher(a, [(_sel("checkBalance", sig), "checkBalance")], line=1)

    a.func("checkBalance")
    a.op("JUMPDEST", 4)
    a.push(36, 6).op("CALLDATALOAD", 6)
    a.op("DUP1", 6).op("DUP1", 6).op("MUL", 6).op("MUL", 6)  # [amount^3]
    a.push(4, 5).op("CALLDATALOAD", 5)
    a.push(4, 5).op("ADD", 5).op("CALLDATALOAD", 5)  # [a3, len]
    a.push(0, 5)  # [a3, len, i]

    a.label("tix_loop")
    a.op("JUMPDEST", 5)
    a.op("DUP2", 5).op("DUP2", 5).op("LT", 5).op("ISZERO", 5)
    a.jumpi("tix_done", 5)
    a.op("DUP1", 6)
    a.push(32, 6).op("MUL", 6)
    a.push(4, 6).op("CALLDATALOAD", 6).op("ADD", 6)
    a.push(36, 6).op("ADD", 6).op("CALLDATALOAD", 6)  # [a3, len, i, tickets[i]]
    a.op("DUP4", 6).op("EQ", 6)
    a.jumpi("tix_hit", 6)
    a.label("tix_next")
    a.op("JUMPDEST", 5)
    a.push(1, 5).op("ADD", 5)
    a.jump("tix_loop", 5)

    a.label("tix_done")
    a.op("JUMPDEST", 10)
    a.op("POP", 10).op("POP", 10).op("POP", 10).op("STOP", 10)

    a.label("tix_hit")
    a.op("JUMPDEST", 7)
    a.push(1, 7)
    a.push(0, 7).op("SSTORE", 7)
    a.jump("tix_next", 7)
    a.end_func("checkBalance")

    return (
        a,
        LOTTERY_SOURCE,
        [("checkBalance", sig, ("tickets", "amount"), False)],
        "Lottery",
    )


BUILDERS = {
    "ballot": build_ballot,
    "bytekey": build_bytekey,
    "pool": build_pool,
    "feeswap": build_feeswap,
    "cubic": build_cubic,
    "lottery": build_lottery,
}


def write_bundle(out_dir: Path, name: str) -> None:
    asm, source, fns, contract = BUILDERS[name]()
    result = asm.assemble()
    d = out_dir / name
    d.mkdir(parents=True, exist_ok=True)

    (d / "contract.hex").write_text("0x" + result.bytecode.hex() + "\n")

    functions = []
    for fn_name, params, names, is_prop in fns:
        entry, (lo, hi) = result.functions[fn_name]
        functions.append(
            {
                "name": fn_name,
                "params": list(params),
                "param_names": list(names),
                "entry_offset": entry,
                "body_range": [lo, hi],
                "is_property": is_prop,
            }
        )
    manifest = {"contract": contract, "functions": functions}
    (d / "abi.json").write_text(json.dumps(manifest, indent=2) + "\n")

    (d / "source.sol").write_text(source)
    linemap = {str(k): v for k, v in sorted(result.linemap.items())}
    (d / "linemap.json").write_text(json.dumps(linemap, indent=2) + "\n")
    (d / "world.json").write_text(json.dumps(WORLD, indent=2) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "fixtures"),
        help="output directory (default: <repo>/fixtures)",
    )
    args = ap.parse_args(argv)
    out = Path(args.out)
    for name in BUILDERS:
        write_bundle(out, name)
        size = len((out / name / "contract.hex").read_text().strip()) // 2 - 1
        print(f"{name}: {size} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
