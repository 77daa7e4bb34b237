"""Transaction execution driver.

The frame kernel (sctest._kernels.run_frame) executes straight-line
bytecode and pauses at CALL-class instructions; this driver resolves the
callee (inline recursion for deployed addresses, recorded success for
unknown ones), maintains the shared gas meter, the per-transaction
storage/balance overlays, and the trace segments, and commits or
discards state per the halt kind.  Only OUT_OF_GAS rolls back: REVERT
and INVALID
keep their storage writes, which diverges from mainnet semantics but
matches this engine's transactional model (roll back on resource
exhaustion only).
"""

from .._kernels import run_frame
from ..bytecode.abi import encode_call
from ..errors import (
    InsufficientBalance,
    MalformedCalldata,
    SctestError,
    UnknownDestination,
)
from .bundle import ContractBundle
from .types import Account, ExecResult, Transaction
from .world import EvmWorld

CALL_DEPTH_LIMIT = 8

_HALT_NAME = {
    "stop": "STOP",
    "return": "RETURN",
    "revert": "REVERT",
    "invalid": "INVALID",
    "out_of_gas": "OUT_OF_GAS",
    "selfdestruct": "STOP",  # a recorded external effect, then a clean halt
}


class _TxCtx:
    """Mutable per-transaction execution state."""

    def __init__(self, world: EvmWorld, gas: int):
        self.world = world
        self.balances = {a: acc.balance for a, acc in world.accounts.items()}
        self.overlays: dict[int, dict[int, int]] = {}
        self.segments: list[tuple[int, tuple[int, ...]]] = []
        self.ext: list[dict] = []
        self.logs: list[tuple[int, int, tuple, bytes]] = []
        self.sha: list[tuple[bytes, bytes]] = []
        self.gas = gas

    def overlay(self, addr: int) -> dict[int, int]:
        ov = self.overlays.get(addr)
        if ov is None:
            ov = dict(self.world.storage.get(addr, {}))
            self.overlays[addr] = ov
        return ov


def _route(bundle: ContractBundle, calldata: bytes) -> tuple[int, str]:
    """Fallback monitor: unmatched selectors route to a function named
    "fallback" when the ABI declares one; otherwise execution starts at
    the dispatcher, whose no-match arm returns empty success."""
    sig = bundle.by_selector.get(calldata[:4]) if len(calldata) >= 4 else None
    if sig is not None:
        return 0, sig.name
    entry = bundle.fallback_entry
    if entry is not None:
        return entry, "fallback"
    return 0, ""


def _run_call(
    ctx: _TxCtx,
    image,
    exec_addr: int,
    caller: int,
    callvalue: int,
    calldata: bytes,
    static: bool,
    depth: int,
    start_pc: int = 0,
    fn_name: str = "",
) -> tuple[str, bytes]:
    world = ctx.world
    world.runtime_stack.append((exec_addr, fn_name))
    storage = ctx.overlay(exec_addr)
    seg: list[int] = []
    state = None if start_pc == 0 else ([], bytearray(), start_pc, 0, 0)
    callret = None
    while True:
        klogs: list = []
        r = run_frame(
            image.code, image.imm, image.nxt, image.is_jumpdest, len(image.code),
            calldata, storage, ctx.balances, exec_addr, caller, callvalue,
            world.block.timestamp, world.block.number, ctx.gas, static,
            seg, klogs, ctx.ext, ctx.sha, state, callret,
        )
        for pc, topics, data in klogs:
            ctx.logs.append((exec_addr, pc, topics, data))
        if r[0] == "halt":
            _, kind, data, gas_left = r
            ctx.gas = gas_left
            if seg:
                ctx.segments.append((exec_addr, tuple(seg)))
            world.runtime_stack.pop()
            return kind, data
        # paused at a call instruction
        _, kind, to, value, arg, gas_left, st = r
        ctx.gas = gas_left
        if seg:
            ctx.segments.append((exec_addr, tuple(seg)))
        seg = []
        success, ret = _resolve_call(
            ctx, kind, exec_addr, caller, callvalue, to, value, arg, static, depth
        )
        state = st
        callret = (success, ret)


def _resolve_call(
    ctx: _TxCtx,
    kind: str,
    from_addr: int,
    outer_caller: int,
    outer_value: int,
    to: int,
    value: int,
    arg: bytes,
    static: bool,
    depth: int,
) -> tuple[int, bytes]:
    rec = {"kind": kind, "from": from_addr, "to": to, "value": value, "resolved": False}
    ctx.ext.append(rec)
    bundle = ctx.world.deployed.get(to)
    if depth + 1 >= CALL_DEPTH_LIMIT:
        return 0, b""
    if bundle is None:
        # unknown destination: recorded, succeeds with empty return data
        if kind == "call" and value:
            if ctx.balances.get(from_addr, 0) < value:
                return 0, b""
            ctx.balances[from_addr] -= value
            ctx.balances[to] = ctx.balances.get(to, 0) + value
        return 1, b""
    rec["resolved"] = True
    if kind == "call":
        if value:
            if ctx.balances.get(from_addr, 0) < value:
                return 0, b""
            ctx.balances[from_addr] -= value
            ctx.balances[to] = ctx.balances.get(to, 0) + value
        exec_addr, caller, callvalue, st = to, from_addr, value, static
    elif kind == "delegatecall":
        # callee code, caller's storage/address/caller/value
        exec_addr, caller, callvalue, st = from_addr, outer_caller, outer_value, static
    else:  # staticcall
        exec_addr, caller, callvalue, st = to, from_addr, 0, True
    start_pc, fn_name = _route(bundle, arg)
    halt, data = _run_call(
        ctx, bundle.image, exec_addr, caller, callvalue, arg, st,
        depth + 1, start_pc, fn_name,
    )
    success = 1 if halt in ("stop", "return", "selfdestruct") else 0
    return success, data


def execute_tx(world: EvmWorld, tx: Transaction) -> tuple[EvmWorld, ExecResult]:
    """Deterministic interpretation of tx against a copy of world."""
    w = world.copy()
    w.block.timestamp += tx.delay

    bundle = w.deployed.get(tx.destination)
    if bundle is None:
        raise UnknownDestination(f"0x{tx.destination:040x} has no code")

    calldata = tx.call_data
    if calldata is None:
        sig = bundle.by_name.get(tx.function_call)
        if sig is None:
            raise SctestError(
                f"function {tx.function_call!r} not in {bundle.name} ABI"
            )
        calldata = encode_call(sig, tx.args or ())
    if len(calldata) < 4:
        raise MalformedCalldata(f"calldata is {len(calldata)} bytes, need >= 4")

    ctx = _TxCtx(w, tx.gas)
    if tx.value:
        if ctx.balances.get(tx.source, 0) < tx.value:
            raise InsufficientBalance(
                f"0x{tx.source:040x} holds {ctx.balances.get(tx.source, 0)}, "
                f"needs {tx.value}"
            )
        ctx.balances[tx.source] -= tx.value
        ctx.balances[tx.destination] = ctx.balances.get(tx.destination, 0) + tx.value

    start_pc, fn_name = _route(bundle, calldata)
    kind, data = _run_call(
        ctx, bundle.image, tx.destination, tx.source, tx.value, calldata,
        False, 0, start_pc, fn_name or tx.function_call,
    )
    halt = _HALT_NAME[kind]

    if halt != "OUT_OF_GAS":
        for addr in sorted(ctx.overlays):
            w.storage[addr] = dict(ctx.overlays[addr])
        for addr in sorted(ctx.balances):
            bal = ctx.balances[addr]
            acc = w.accounts.get(addr)
            if acc is None:
                w.accounts[addr] = Account(addr, bal)
            else:
                acc.balance = bal

    result = ExecResult(
        halt=halt,
        return_data=data,
        gas_used=tx.gas - ctx.gas,
        trace=tuple(ctx.segments),
        external_calls=tuple(ctx.ext),
        logs=tuple(ctx.logs),
        sha_preimages=tuple(ctx.sha),
    )
    return w, result


def execute_sequence(
    world: EvmWorld, txs: list[Transaction] | None = None
) -> tuple[EvmWorld, list[ExecResult]]:
    """Fold execute_tx left to right; with txs=None, drain world.tx_queue.
    Errors propagate and stop the fold at the offending transaction."""
    if txs is None:
        txs = list(world.tx_queue)
        world = world.copy()
        world.tx_queue.clear()
    results: list[ExecResult] = []
    for tx in txs:
        world, res = execute_tx(world, tx)
        results.append(res)
    return world, results
