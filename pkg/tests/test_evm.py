"""Transaction execution: halts, state commits, tracing, inner calls."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sctest._kernels import keccak256
from sctest.bytecode.abi import FunctionSig, parse_abi
from sctest.bytecode.asm import Asm, dispatcher
from sctest.errors import (
    AddressInUse,
    DuplicateAddress,
    InsufficientBalance,
    MalformedCalldata,
    SctestError,
    UnknownDestination,
)
from sctest.evm import (
    ContractBundle,
    Transaction,
    deploy,
    execute_sequence,
    execute_tx,
    new_world,
)

ACCT = 0x1001
AT = 0xC0DE
RAW4 = bytes(4)


def bundle_from_hex(hx: str, name: str = "t") -> ContractBundle:
    return ContractBundle(name, bytes.fromhex(hx), [])


def world_with(bundle: ContractBundle, at: int = AT, accounts=None):
    w = new_world(accounts or [(ACCT, 10**18)])
    return deploy(w, bundle, at)


def run_raw(hx: str, calldata: bytes = RAW4, gas: int = 10_000_000, value: int = 0,
            accounts=None):
    w = world_with(bundle_from_hex(hx), accounts=accounts)
    tx = Transaction(function_call="raw", call_data=calldata, gas=gas,
                     source=ACCT, destination=AT, value=value)
    return execute_tx(w, tx)


def returned_word(res) -> int:
    assert res.halt == "RETURN", res.halt
    return int.from_bytes(res.return_data, "big")


# -- basic halts and tracing -------------------------------------------------


def test_trace_covers_every_instruction():
    # PUSH1 2, PUSH1 3, ADD, STOP
    _, res = run_raw("6002600301" + "00")
    assert res.halt == "STOP"
    assert res.offsets() == [0, 2, 4, 5]
    assert res.gas_used == 12


def test_trace_nonempty_for_any_executed_code():
    _, res = run_raw("00")
    assert res.offsets() == [0]


def test_implicit_stop_off_code_end():
    _, res = run_raw("6001")  # PUSH1 1, then falls off
    assert res.halt == "STOP"


def test_invalid_halts_at_faulting_offset():
    _, res = run_raw("fe")
    assert res.halt == "INVALID"
    assert res.last_offset == (AT, 0)


def test_unknown_byte_executes_as_invalid():
    _, res = run_raw("0c")  # not in the instruction set
    assert res.halt == "INVALID"


def test_stack_underflow_is_invalid():
    _, res = run_raw("01")  # ADD on empty stack
    assert res.halt == "INVALID"


def test_jump_to_non_jumpdest_is_invalid():
    _, res = run_raw("600456")  # JUMP 4 -> offset 4 is not a JUMPDEST
    assert res.halt == "INVALID"


def test_revert_returns_data():
    # MSTORE8(0, 0x55); REVERT(0, 1)
    _, res = run_raw("60556000" + "53" + "60016000" + "fd")
    assert res.halt == "REVERT"
    assert res.return_data == b"\x55"
    assert res.failed


# -- arithmetic semantics ----------------------------------------------------


def test_div_and_mod_by_zero_yield_zero():
    # DIV: PUSH1 0, PUSH1 5, DIV -> 5 // 0 = 0
    _, res = run_raw("6000600504" + "600052" + "60206000f3")
    assert returned_word(res) == 0
    _, res = run_raw("6000600506" + "600052" + "60206000f3")
    assert returned_word(res) == 0


def test_add_wraps_mod_2_256():
    # PUSH32 (2^256-1), PUSH1 1, ADD -> 0
    hx = "7f" + "ff" * 32 + "600101" + "600052" + "60206000f3"
    _, res = run_raw(hx)
    assert returned_word(res) == 0


def test_sub_wraps():
    # PUSH1 1, PUSH1 0, SUB computes 0 - 1
    _, res = run_raw("6001600003" + "600052" + "60206000f3")
    assert returned_word(res) == (1 << 256) - 1


def test_exp():
    # PUSH1 10, PUSH1 2, EXP computes 2**10
    _, res = run_raw("600a60020a" + "600052" + "60206000f3")
    assert returned_word(res) == 1024


def test_shift_by_256_clears():
    _, res = run_raw("6001" + "610100" + "1b" + "600052" + "60206000f3")
    assert returned_word(res) == 0


_BINOPS = {
    "01": lambda a, b: (a + b) % (1 << 256),
    "02": lambda a, b: (a * b) % (1 << 256),
    "03": lambda a, b: (a - b) % (1 << 256),
    "04": lambda a, b: a // b if b else 0,
    "06": lambda a, b: a % b if b else 0,
    "10": lambda a, b: int(a < b),
    "11": lambda a, b: int(a > b),
    "14": lambda a, b: int(a == b),
    "16": lambda a, b: a & b,
    "17": lambda a, b: a | b,
    "18": lambda a, b: a ^ b,
}


@settings(max_examples=60, deadline=None)
@given(
    a=st.integers(0, (1 << 256) - 1),
    b=st.integers(0, (1 << 256) - 1),
    op=st.sampled_from(sorted(_BINOPS)),
)
def test_binop_agrees_with_bigint_oracle(a, b, op):
    # stack [b, a] with a on top: op computes a OP b
    hx = (
        "7f" + b.to_bytes(32, "big").hex()
        + "7f" + a.to_bytes(32, "big").hex()
        + op + "600052" + "60206000f3"
    )
    _, res = run_raw(hx)
    assert returned_word(res) == _BINOPS[op](a, b)


# -- environment opcodes -----------------------------------------------------


def test_caller_address_callvalue():
    # CALLER ADDRESS CALLVALUE -> return all three
    hx = ("33600052" + "30602052" + "34604052" + "60606000f3")
    _, res = run_raw(hx, value=777)
    words = [int.from_bytes(res.return_data[i:i + 32], "big") for i in (0, 32, 64)]
    assert words == [ACCT, AT, 777]


def test_calldataload_zero_pads_past_end():
    # CALLDATALOAD(2) on 4-byte data
    _, res = run_raw("6002" + "35" + "600052" + "60206000f3",
                     calldata=bytes.fromhex("aabbccdd"))
    assert returned_word(res) == int.from_bytes(
        bytes.fromhex("ccdd") + bytes(30), "big"
    )


def test_calldatasize_and_copy():
    # CALLDATACOPY(mem 0, data 0, size CALLDATASIZE); RETURN(0, 32)
    _, res = run_raw("36600060003760206000f3", calldata=bytes.fromhex("deadbeef"))
    assert res.return_data[:4] == bytes.fromhex("deadbeef")


def test_balance_opcode():
    # BALANCE(ADDRESS)
    w = world_with(bundle_from_hex("3031" + "600052" + "60206000f3"),
                   accounts=[(ACCT, 10**18), (AT, 4321)])
    _, res = execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                       source=ACCT, destination=AT))
    assert returned_word(res) == 4321


def test_sha3_opcode_and_preimage_capture():
    # MSTORE(0, 7); SHA3(0, 32)
    _, res = run_raw("6007600052" + "60206000" + "20" + "600052" + "60206000f3")
    want = keccak256((7).to_bytes(32, "big"))
    assert res.return_data == want
    assert ((7).to_bytes(32, "big"), want) in res.sha_preimages


def test_log_records_address_pc_topics_data():
    # MSTORE8(0, 0xAB); LOG1(off 0, size 1, topic 0x77)
    _, res = run_raw("60ab600053" + "6077" + "6001" + "6000" + "a1" + "00")
    assert len(res.logs) == 1
    addr, pc, topics, data = res.logs[0]
    assert addr == AT and topics == (0x77,) and data == b"\xab"


# -- block context and delay -------------------------------------------------


def test_delay_advances_timestamp_before_execution():
    b = bundle_from_hex("42600052" + "60206000f3")
    w = deploy(new_world([(ACCT, 10**18)], timestamp=500), b, AT)
    w2, res = execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                        delay=7, source=ACCT, destination=AT))
    assert returned_word(res) == 507
    assert w2.block.timestamp == 507
    assert w.block.timestamp == 500  # input world untouched


def test_block_number_stays_one():
    b = bundle_from_hex("43600052" + "60206000f3")
    w = deploy(new_world([(ACCT, 10**18)]), b, AT)
    for _ in range(3):
        w, res = execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                           source=ACCT, destination=AT))
        assert returned_word(res) == 1


def test_delay_zero_shares_block_timestamp():
    b = bundle_from_hex("42600052" + "60206000f3")
    w = deploy(new_world([(ACCT, 10**18)], timestamp=900), b, AT)
    txs = [
        Transaction(function_call="raw", call_data=RAW4, source=ACCT, destination=AT),
        Transaction(function_call="raw", call_data=RAW4, source=ACCT, destination=AT),
    ]
    _, results = execute_sequence(w, txs)
    assert [returned_word(r) for r in results] == [900, 900]


# -- gas ----------------------------------------------------------------------


def test_gas_used_never_exceeds_budget():
    _, res = run_raw("6002600301" + "00", gas=50)
    assert res.gas_used <= 50


def test_out_of_gas_consumes_entire_budget():
    # SSTORE(0, 1), then loop forever
    hx = "6001600055" + "5b" + "610005" + "56"
    _, res = run_raw(hx, gas=3000)
    assert res.halt == "OUT_OF_GAS"
    assert res.gas_used == 3000


def test_gas_opcode_reports_remaining():
    _, res = run_raw("5a600052" + "60206000f3", gas=1000)
    # GAS itself cost 3 by the time the value is observed
    assert returned_word(res) == 997


def test_sstore_sload_costs():
    # PUSH1 1 (3) PUSH1 0 (3) SSTORE (200) PUSH1 0 (3) SLOAD (100) POP (3) STOP (3)
    _, res = run_raw("6001600055" + "600054" + "50" + "00")
    assert res.gas_used == 3 + 3 + 200 + 3 + 100 + 3 + 3


def test_sha3_gas_scales_with_words():
    # SHA3(0, 64) = 30 + 6*2; plus PUSH,PUSH (6), MSTORE path to size memory
    _, r64 = run_raw("60406000" + "20" + "00")
    _, r32 = run_raw("60206000" + "20" + "00")
    assert r64.gas_used - r32.gas_used == 6


# -- state commit rules --------------------------------------------------------


def test_sstore_persists_on_stop():
    w, res = run_raw("6005600055" + "00")
    assert res.halt == "STOP"
    assert w.storage[AT] == {0: 5}


def test_sstore_persists_on_revert():
    w, res = run_raw("6005600055" + "60006000fd")
    assert res.halt == "REVERT"
    assert w.storage[AT] == {0: 5}


def test_sstore_persists_on_invalid():
    w, res = run_raw("6005600055" + "fe")
    assert res.halt == "INVALID"
    assert w.storage[AT] == {0: 5}


def test_out_of_gas_rolls_back_storage():
    hx = "6001600055" + "5b" + "610005" + "56"
    w, res = run_raw(hx, gas=3000)
    assert res.halt == "OUT_OF_GAS"
    assert w.storage[AT] == {}


def test_out_of_gas_rolls_back_balances():
    # CALL(gas 0, to 0x2222, value 100, ...) then loop forever
    hx = ("6000" * 2 + "6000" * 2 + "6064" + "612222" + "6000" + "f1" + "50"
          + "5b" + "610011" + "56")
    w = world_with(bundle_from_hex(hx), accounts=[(ACCT, 10**18), (AT, 500)])
    w2, res = execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                        gas=4000, source=ACCT, destination=AT))
    assert res.halt == "OUT_OF_GAS"
    assert w2.balance(AT) == 500
    assert w2.balance(0x2222) == 0


def test_sstore_zero_clears_slot():
    w, res = run_raw("6005600055" + "6000600055" + "00")
    assert res.halt == "STOP"
    assert w.storage[AT] == {}


def test_value_transfer_moves_balance():
    w, res = run_raw("00", value=250, accounts=[(ACCT, 1000)])
    assert w.balance(ACCT) == 750
    assert w.balance(AT) == 250


def test_balance_is_conserved():
    w, _ = run_raw("00", value=250, accounts=[(ACCT, 1000), (0x1002, 77)])
    assert sum(a.balance for a in w.accounts.values()) == 1077


# -- errors --------------------------------------------------------------------


def test_unknown_destination():
    w = new_world([(ACCT, 10**18)])
    with pytest.raises(UnknownDestination):
        execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                  source=ACCT, destination=0xDEAD))


def test_malformed_calldata_under_four_bytes():
    w = world_with(bundle_from_hex("00"))
    with pytest.raises(MalformedCalldata):
        execute_tx(w, Transaction(function_call="raw", call_data=b"\x01\x02",
                                  source=ACCT, destination=AT))


def test_insufficient_balance():
    w = world_with(bundle_from_hex("00"), accounts=[(ACCT, 10)])
    with pytest.raises(InsufficientBalance):
        execute_tx(w, Transaction(function_call="raw", call_data=RAW4, value=11,
                                  source=ACCT, destination=AT))


def test_unknown_function_name():
    w = world_with(bundle_from_hex("00"))
    with pytest.raises(SctestError):
        execute_tx(w, Transaction(function_call="nope", args=(),
                                  source=ACCT, destination=AT))


def test_deploy_address_in_use():
    b = bundle_from_hex("00")
    w = world_with(b)
    with pytest.raises(AddressInUse):
        deploy(w, b, AT)


def test_duplicate_genesis_account():
    with pytest.raises(DuplicateAddress):
        new_world([(ACCT, 1), (ACCT, 2)])


def test_empty_genesis_rejected():
    with pytest.raises(ValueError):
        new_world([])


# -- dispatcher, ABI args, fallback -------------------------------------------


def _box_bundle() -> ContractBundle:
    a = Asm()
    store = FunctionSig("store", ("uint256",))
    load = FunctionSig("load", ())
    dispatcher(a, [(store.selector, "store"), (load.selector, "load")])
    a.func("store").op("JUMPDEST")
    a.push(4).op("CALLDATALOAD").push(0).op("SSTORE").op("STOP")
    a.end_func("store")
    a.func("load").op("JUMPDEST")
    a.push(0).op("SLOAD").push(0).op("MSTORE")
    a.push(32).push(0).op("RETURN")
    a.end_func("load")
    out = a.assemble()
    abi = parse_abi({"functions": [
        {"name": "store", "params": ["uint256"]},
        {"name": "load", "params": []},
    ]})
    return ContractBundle("box", out.bytecode, abi)


def test_dispatch_and_abi_encoding_round_trip():
    w = world_with(_box_bundle())
    w, res = execute_tx(w, Transaction(function_call="store", args=(1234,),
                                       source=ACCT, destination=AT))
    assert res.halt == "STOP"
    assert w.storage[AT] == {0: 1234}
    _, res = execute_tx(w, Transaction(function_call="load", args=(),
                                       source=ACCT, destination=AT))
    assert returned_word(res) == 1234


def test_unmatched_selector_without_fallback_is_empty_success():
    w = world_with(_box_bundle())
    _, res = execute_tx(w, Transaction(function_call="raw",
                                       call_data=bytes.fromhex("12345678"),
                                       source=ACCT, destination=AT))
    assert res.halt == "STOP"
    assert res.return_data == b""


def _fallback_bundle() -> ContractBundle:
    a = Asm()
    ping = FunctionSig("ping", ())
    dispatcher(a, [(ping.selector, "ping")])
    a.func("ping").op("JUMPDEST")
    a.push(1).push(0).op("SSTORE").op("STOP")
    a.end_func("ping")
    a.func("fallback").op("JUMPDEST")
    a.push(2).push(0).op("SSTORE").op("STOP")
    a.end_func("fallback")
    out = a.assemble()
    entry = out.functions["fallback"][0]
    abi = parse_abi({"functions": [
        {"name": "ping", "params": []},
        {"name": "fallback", "params": [], "entry_offset": entry},
    ]})
    return ContractBundle("fb", out.bytecode, abi)


def test_unmatched_selector_routes_to_fallback():
    w = world_with(_fallback_bundle())
    w2, res = execute_tx(w, Transaction(function_call="raw",
                                        call_data=bytes.fromhex("12345678"),
                                        source=ACCT, destination=AT))
    assert res.halt == "STOP"
    assert w2.storage[AT] == {0: 2}  # fallback body ran, not the dispatcher
    assert w2.runtime_stack == []


def test_matched_selector_skips_fallback():
    w = world_with(_fallback_bundle())
    w2, _ = execute_tx(w, Transaction(function_call="ping", args=(),
                                      source=ACCT, destination=AT))
    assert w2.storage[AT] == {0: 1}


# -- inner calls ---------------------------------------------------------------


CALLEE_AT = 0xCA11


def _callee_bundle() -> ContractBundle:
    # any call: SSTORE(1, CALLER); return CALLVALUE word
    hx = "336001" + "55" + "34600052" + "60206000f3"
    return bundle_from_hex(hx, "callee")


def _caller_hex(kind: str, value: int = 0) -> str:
    # kind CALL: f1 pops gas,to,value,in_off,in_size,out_off,out_size
    push_args = "6000" + "6020"  # out_size=32... pushed in reverse below
    if kind == "f1":
        body = ("6020" + "6000"            # out_size 32, out_off 0
                + "6000" + "6000"          # in_size 0, in_off 0
                + f"60{value:02x}"         # value
                + "61ca11" + "6000" + "f1")  # to, gas, CALL
    else:
        body = ("6020" + "6000" + "6000" + "6000"
                + "61ca11" + "6000" + kind)
    # return (success, returned word) as two words
    return body + "602052" + "60406000f3"


def _call_world(kind: str, value: int = 0, static_inner=False):
    caller = bundle_from_hex(_caller_hex(kind, value), "caller")
    w = new_world([(ACCT, 10**18), (AT, 1000)])
    w = deploy(w, caller, AT)
    w = deploy(w, _callee_bundle(), CALLEE_AT)
    return execute_tx(w, Transaction(function_call="raw", call_data=RAW4,
                                     source=ACCT, destination=AT))


def test_call_runs_callee_and_returns_success():
    w, res = _call_world("f1", value=9)
    assert res.halt == "RETURN"
    ret_word = int.from_bytes(res.return_data[0:32], "big")
    success = int.from_bytes(res.return_data[32:64], "big")
    assert success == 1
    assert ret_word == 9  # callee saw CALLVALUE 9
    assert w.storage[CALLEE_AT] == {1: AT}  # callee saw CALLER == caller contract
    assert w.balance(CALLEE_AT) == 9 and w.balance(AT) == 991


def test_call_trace_segments_interleave():
    _, res = _call_world("f1")
    addrs = [a for a, _ in res.trace]
    assert addrs == [AT, CALLEE_AT, AT]
    assert res.offsets(CALLEE_AT)[0] == 0


def test_delegatecall_keeps_storage_caller_value():
    w, res = _call_world("f4")
    ret_word = int.from_bytes(res.return_data[0:32], "big")
    success = int.from_bytes(res.return_data[32:64], "big")
    assert success == 1
    assert ret_word == 0  # outer callvalue propagated (0 here)
    # callee code wrote into the CALLER's storage, and saw the original sender
    assert w.storage[AT] == {1: ACCT}
    assert w.storage.get(CALLEE_AT, {}) == {}


def test_staticcall_forbids_writes():
    w, res = _call_world("fa")
    success = int.from_bytes(res.return_data[32:64], "big")
    assert success == 0  # callee SSTORE faulted under the static flag
    assert w.storage.get(CALLEE_AT, {}) == {}


def test_call_to_unknown_address_succeeds_empty():
    # CALL to 0xDEAD, no value
    hx = ("6000" + "6000" + "6000" + "6000" + "6000" + "61dead" + "6000" + "f1"
          + "600052" + "60206000f3")
    w, res = run_raw(hx)
    assert returned_word(res) == 1
    assert len(res.external_calls) == 1
    rec = res.external_calls[0]
    assert rec["kind"] == "call" and rec["to"] == 0xDEAD
    assert rec["resolved"] is False


def test_recursive_call_depth_capped():
    # contract calls itself; success word of the innermost frame is 0
    hx = ("6020" + "6000" + "6000" + "6000" + "6000" + "61c0de" + "6000" + "f1"
          + "600052" + "60206000f3")
    w, res = run_raw(hx)
    assert res.halt == "RETURN"
    # every frame records its attempt; the one past the cap stays unresolved
    assert len(res.external_calls) == 8
    assert all(r["to"] == AT for r in res.external_calls)
    assert res.external_calls[-1]["resolved"] is False
    assert all(r["resolved"] for r in res.external_calls[:-1])


def test_create_records_and_pushes_zero():
    # CREATE(value 0, off 0, size 0) -> push 0
    _, res = run_raw("600060006000f0" + "600052" + "60206000f3")
    assert returned_word(res) == 0
    assert res.external_calls[0]["kind"] == "create"


def test_selfdestruct_records_and_stops():
    w, res = run_raw("6005600055" + "61beef" + "ff")
    assert res.halt == "STOP"
    assert res.external_calls[-1] == {"kind": "selfdestruct", "from": AT,
                                      "to": 0xBEEF}
    assert w.storage[AT] == {0: 5}  # clean halt commits


# -- sequences and determinism -------------------------------------------------


def test_execute_sequence_folds_and_queue_drains():
    b = _box_bundle()
    w = world_with(b)
    w.tx_queue.extend([
        Transaction(function_call="store", args=(3,), source=ACCT, destination=AT),
        Transaction(function_call="store", args=(8,), source=ACCT, destination=AT),
    ])
    w2, results = execute_sequence(w)
    assert len(results) == 2
    assert w2.storage[AT] == {0: 8}
    assert w2.tx_queue == []
    assert len(w.tx_queue) == 2  # input world untouched


def test_sequence_error_propagates():
    w = world_with(_box_bundle())
    txs = [
        Transaction(function_call="store", args=(3,), source=ACCT, destination=AT),
        Transaction(function_call="raw", call_data=RAW4, source=ACCT,
                    destination=0xDEAD),
    ]
    with pytest.raises(UnknownDestination):
        execute_sequence(w, txs)


def test_execution_is_deterministic():
    txs = [
        Transaction(function_call="store", args=(41,), source=ACCT, destination=AT),
        Transaction(function_call="load", args=(), delay=5, source=ACCT,
                    destination=AT),
    ]
    outs = []
    for _ in range(2):
        w = world_with(_box_bundle())
        w2, results = execute_sequence(w, txs)
        outs.append((w2.storage_view(), w2.block.timestamp,
                     [(r.halt, r.return_data, r.gas_used, r.trace)
                      for r in results]))
    assert outs[0] == outs[1]


@settings(max_examples=25, deadline=None)
@given(vals=st.lists(st.integers(0, (1 << 256) - 1), min_size=1, max_size=5))
def test_last_store_wins(vals):
    w = world_with(_box_bundle())
    txs = [Transaction(function_call="store", args=(v,), source=ACCT,
                       destination=AT) for v in vals]
    w2, results = execute_sequence(w, txs)
    assert all(r.halt == "STOP" for r in results)
    expect = {0: vals[-1]} if vals[-1] else {}
    assert w2.storage[AT] == expect
