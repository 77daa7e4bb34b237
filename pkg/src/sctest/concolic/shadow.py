"""Lockstep concrete + symbolic frame execution.

Runs the same bytecode subset as the concrete kernel while carrying a
parallel shadow stack of symbolic expressions (None marks a concrete
slot).  At every JUMPI whose condition is symbolic it records a
PathConstraint carrying the branch offset and the concretely taken
direction.  The concrete half reproduces the kernel's semantics
instruction for instruction (same gas schedule, same halt kinds, same
memory cap), so the recorded trace matches what the engine would
produce for the same transaction; generated inputs are nevertheless
always re-validated through the engine before being kept.

Symbolic values enter through call data only.  The argument layout maps
ABI-encoded regions to Input atoms: static arguments are whole-word
atoms, array elements are per-word atoms, bytes arguments are per-byte
atoms, and each dynamic argument's length word is a "length" atom
(head-word offsets stay concrete).  Reads that assemble several
symbolic bytes into one word build shift-and-add trees that
symexpr.simplify folds back to single atoms when the code later
isolates a byte.

Execution stops collecting at the first CALL-class instruction: cross-
contract data flow stays concrete (the engine handles it when the
materialized input is replayed).
"""

from dataclasses import dataclass, replace

from .._kernels import keccak256
from .._kernels.interp_py import MEM_LIMIT, STACK_LIMIT, _GAS
from ..bytecode.abi import encode_call
from ..errors import SctestError, UnknownDestination
from ..evm.engine import _route, execute_sequence
from ..evm.types import Transaction
from ..evm.world import EvmWorld
from .symexpr import (
    Binop,
    Const,
    Input,
    Keccak,
    PathConstraint,
    SymExpr,
    Unop,
    simplify,
)

MASK256 = (1 << 256) - 1
ADDR_MASK = (1 << 160) - 1

_BITS = {"uint": None, "address": 160, "bool": 1, "bytes": 8}


@dataclass(frozen=True)
class _Region:
    start: int  # absolute calldata offset
    size: int
    param: str
    kind: str  # word | length | bytes | elems
    bits: int


class ArgLayout:
    """Symbolic view of ABI-encoded call data for one function call."""

    def __init__(self, sig, args):
        self.sig = sig
        self.regions: list[_Region] = []
        head = 4
        tail = 4 + 32 * len(sig.params)
        for t, name, v in zip(sig.params, sig.param_names, args):
            if not t.is_dynamic:
                bits = _BITS[t.kind] or t.bits
                self.regions.append(_Region(head, 32, name, "word", bits))
            else:
                n = len(v)
                self.regions.append(_Region(tail, 32, name, "length", 256))
                if t.kind == "bytes":
                    padded = (n + 31) // 32 * 32
                    if n:
                        self.regions.append(_Region(tail + 32, n, name, "bytes", 8))
                    tail += 32 + padded
                else:
                    if n:
                        self.regions.append(
                            _Region(tail + 32, 32 * n, name, "elems", t.bits)
                        )
                    tail += 32 + 32 * n
            head += 32
        self._by_byte = {}
        for r in self.regions:
            for q in range(r.start, r.start + r.size):
                self._by_byte[q] = r

    def word_at(self, p: int, calldata: bytes) -> SymExpr | None:
        """Shadow of a 32-byte CALLDATALOAD window at offset p, or None
        when the window holds no symbolic bytes."""
        # whole-region hit: the common aligned read
        r = self._by_byte.get(p)
        if r is not None and r.start == p and r.kind in ("word", "length"):
            return Input(r.param, 0, r.kind, r.bits)
        if r is not None and r.kind == "elems" and (p - r.start) % 32 == 0:
            if p + 32 <= r.start + r.size:
                return Input(r.param, p - r.start, "word", r.bits)
        # byte assembly: concrete base plus shifted byte atoms
        atoms: list[tuple[int, Input]] = []
        base = 0
        for j in range(32):
            q = p + j
            rq = self._by_byte.get(q)
            shift = 8 * (31 - j)
            if rq is None:
                if q < len(calldata):
                    base |= calldata[q] << shift
                continue
            if rq.kind == "bytes":
                atoms.append((shift, Input(rq.param, q - rq.start, "byte", 8)))
            else:
                # unaligned overlap with a word-granular region: give up
                # on this window, the concrete value stays authoritative
                return None
        if not atoms:
            return None
        expr: SymExpr = Const(base)
        for shift, atom in atoms:
            expr = Binop("ADD", expr, Binop("SHL", Const(shift), atom))
        return simplify(expr)


@dataclass
class ShadowRun:
    """Everything one lockstep execution observed."""

    halt: str  # stop | return | revert | invalid | out_of_gas | external_call
    return_data: bytes
    gas_used: int
    trace: tuple[int, ...]
    constraints: tuple[PathConstraint, ...]
    sha_preimages: tuple[tuple[bytes, bytes], ...]
    storage: dict

    @property
    def decisions(self) -> tuple[tuple[int, bool], ...]:
        return tuple((c.branch_offset, c.taken) for c in self.constraints)


def _shadow_frame(
    image,
    calldata: bytes,
    layout: ArgLayout | None,
    storage: dict,
    balances: dict,
    self_addr: int,
    caller: int,
    callvalue: int,
    timestamp: int,
    number: int,
    gas: int,
    start_pc: int = 0,
) -> ShadowRun:
    ops = image.code
    imm = image.imm
    nxt = image.nxt
    is_jumpdest = image.is_jumpdest
    code_len = len(ops)

    stack: list[int] = []
    sym: list[SymExpr | None] = []
    memory = bytearray()
    mem_sym: dict[int, SymExpr] = {}
    sto_sym: dict[int, SymExpr] = {}
    trace: list[int] = []
    constraints: list[PathConstraint] = []
    sha_seen: list[tuple[bytes, bytes]] = []
    pc = start_pc

    def halt(kind: str, data: bytes = b"", gleft: int | None = None) -> ShadowRun:
        return ShadowRun(
            kind,
            data,
            gas0 - (gas if gleft is None else gleft),
            tuple(trace),
            tuple(constraints),
            tuple(sha_seen),
            storage,
        )

    def ensure(end: int) -> bool:
        if end > MEM_LIMIT:
            return False
        if len(memory) < end:
            memory.extend(bytes(end - len(memory)))
        return True

    def mem_invalidate(lo: int, hi: int, keep: int | None = None):
        for off in [o for o in mem_sym if o < hi and o + 32 > lo]:
            if off != keep:
                del mem_sym[off]

    def binop(op: str) -> SymExpr | None:
        sa = sym.pop()
        sb = sym[-1]
        if sa is None and sb is None:
            return None
        return simplify(
            Binop(
                op,
                sa if sa is not None else Const(a_snap),
                sb if sb is not None else Const(b_snap),
            )
        )

    gas0 = gas
    while True:
        if pc >= code_len:
            return halt("stop")
        op = ops[pc]
        cost = _GAS[op]
        if op == 0x20 and len(stack) >= 2:
            cost += 6 * ((stack[-2] + 31) // 32)
        gas -= cost
        if gas < 0:
            return halt("out_of_gas", gleft=0)
        trace.append(pc)

        if 0x60 <= op <= 0x7F:  # PUSH
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(imm[pc])
            sym.append(None)
            pc = nxt[pc]
            continue
        if 0x80 <= op <= 0x8F:  # DUP
            n = op - 0x7F
            if len(stack) < n or len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(stack[-n])
            sym.append(sym[-n])
            pc = nxt[pc]
            continue
        if 0x90 <= op <= 0x9F:  # SWAP
            n = op - 0x8F
            if len(stack) < n + 1:
                return halt("invalid")
            stack[-1], stack[-n - 1] = stack[-n - 1], stack[-1]
            sym[-1], sym[-n - 1] = sym[-n - 1], sym[-1]
            pc = nxt[pc]
            continue

        if 0x01 <= op <= 0x1C and op in _BIN_NAME:  # two-operand arithmetic
            if len(stack) < 2:
                return halt("invalid")
            a_snap = stack.pop()
            b_snap = stack[-1]
            name = _BIN_NAME[op]
            if op == 0x01:
                stack[-1] = (a_snap + b_snap) & MASK256
            elif op == 0x02:
                stack[-1] = (a_snap * b_snap) & MASK256
            elif op == 0x03:
                stack[-1] = (a_snap - b_snap) & MASK256
            elif op == 0x04:
                stack[-1] = a_snap // b_snap if b_snap else 0
            elif op == 0x06:
                stack[-1] = a_snap % b_snap if b_snap else 0
            elif op == 0x0A:
                stack[-1] = pow(a_snap, b_snap, 1 << 256)
            elif op == 0x10:
                stack[-1] = 1 if a_snap < b_snap else 0
            elif op == 0x11:
                stack[-1] = 1 if a_snap > b_snap else 0
            elif op == 0x14:
                stack[-1] = 1 if a_snap == b_snap else 0
            elif op == 0x16:
                stack[-1] = a_snap & b_snap
            elif op == 0x17:
                stack[-1] = a_snap | b_snap
            elif op == 0x18:
                stack[-1] = a_snap ^ b_snap
            elif op == 0x1B:
                stack[-1] = (b_snap << a_snap) & MASK256 if a_snap < 256 else 0
            elif op == 0x1C:
                stack[-1] = b_snap >> a_snap if a_snap < 256 else 0
            sym[-1] = binop(name)
        elif op == 0x15:  # ISZERO
            if not stack:
                return halt("invalid")
            stack[-1] = 1 if stack[-1] == 0 else 0
            if sym[-1] is not None:
                sym[-1] = simplify(Unop("ISZERO", sym[-1]))
        elif op == 0x19:  # NOT
            if not stack:
                return halt("invalid")
            stack[-1] = stack[-1] ^ MASK256
            if sym[-1] is not None:
                sym[-1] = simplify(Unop("NOT", sym[-1]))
        elif op == 0x20:  # SHA3
            if len(stack) < 2:
                return halt("invalid")
            off = stack.pop()
            size = stack.pop()
            sym.pop()
            sym.pop()
            if size:
                if not ensure(off + size):
                    return halt("out_of_gas")
                buf = bytes(memory[off : off + size])
            else:
                buf = b""
            digest = keccak256(buf)
            sha_seen.append((buf, digest))
            stack.append(int.from_bytes(digest, "big"))
            shadow = None
            if size and size % 32 == 0 and off % 32 == 0:
                parts = []
                symbolic = False
                for w in range(off, off + size, 32):
                    e = mem_sym.get(w)
                    if e is None:
                        parts.append(Const(int.from_bytes(memory[w : w + 32], "big")))
                    else:
                        parts.append(e)
                        symbolic = True
                if symbolic:
                    shadow = Keccak(tuple(parts), size)
            sym.append(shadow)
        elif op == 0x30:  # ADDRESS
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(self_addr)
            sym.append(None)
        elif op == 0x31:  # BALANCE
            if not stack:
                return halt("invalid")
            stack[-1] = balances.get(stack[-1] & ADDR_MASK, 0)
            sym[-1] = None
        elif op == 0x33:  # CALLER
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(caller)
            sym.append(None)
        elif op == 0x34:  # CALLVALUE
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(callvalue)
            sym.append(None)
        elif op == 0x35:  # CALLDATALOAD
            if not stack:
                return halt("invalid")
            i = stack[-1]
            i_sym = sym[-1]
            if i >= len(calldata):
                stack[-1] = 0
            else:
                chunk = calldata[i : i + 32]
                stack[-1] = int.from_bytes(chunk.ljust(32, b"\x00"), "big")
            # a symbolic load position would need an array theory; the
            # concrete value stands in for it
            if i_sym is not None or layout is None:
                sym[-1] = None
            else:
                sym[-1] = layout.word_at(i, calldata)
        elif op == 0x36:  # CALLDATASIZE
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(len(calldata))
            sym.append(None)
        elif op == 0x37:  # CALLDATACOPY
            if len(stack) < 3:
                return halt("invalid")
            dst = stack.pop()
            src = stack.pop()
            size = stack.pop()
            del sym[-3:]
            if size:
                if not ensure(dst + size):
                    return halt("out_of_gas")
                chunk = calldata[src : src + size] if src < len(calldata) else b""
                memory[dst : dst + size] = chunk.ljust(size, b"\x00")
                mem_invalidate(dst, dst + size)
                if layout is not None and dst % 32 == 0 and size % 32 == 0:
                    for w in range(0, size, 32):
                        e = layout.word_at(src + w, calldata)
                        if e is not None:
                            mem_sym[dst + w] = e
        elif op == 0x42:  # TIMESTAMP
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(timestamp)
            sym.append(None)
        elif op == 0x43:  # NUMBER
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(number)
            sym.append(None)
        elif op == 0x50:  # POP
            if not stack:
                return halt("invalid")
            stack.pop()
            sym.pop()
        elif op == 0x51:  # MLOAD
            if not stack:
                return halt("invalid")
            off = stack[-1]
            if not ensure(off + 32):
                return halt("out_of_gas")
            stack[-1] = int.from_bytes(memory[off : off + 32], "big")
            sym[-1] = mem_sym.get(off)
        elif op == 0x52:  # MSTORE
            if len(stack) < 2:
                return halt("invalid")
            off = stack.pop()
            val = stack.pop()
            sym.pop()  # offset shadow: the concrete offset is authoritative
            vsym = sym.pop()
            if not ensure(off + 32):
                return halt("out_of_gas")
            memory[off : off + 32] = val.to_bytes(32, "big")
            mem_invalidate(off, off + 32, keep=off)
            if vsym is None:
                mem_sym.pop(off, None)
            else:
                mem_sym[off] = vsym
        elif op == 0x53:  # MSTORE8
            if len(stack) < 2:
                return halt("invalid")
            off = stack.pop()
            val = stack.pop()
            del sym[-2:]
            if not ensure(off + 1):
                return halt("out_of_gas")
            memory[off] = val & 0xFF
            mem_invalidate(off, off + 1)
        elif op == 0x54:  # SLOAD
            if not stack:
                return halt("invalid")
            slot = stack[-1]
            stack[-1] = storage.get(slot, 0)
            sym[-1] = sto_sym.get(slot)
        elif op == 0x55:  # SSTORE
            if len(stack) < 2:
                return halt("invalid")
            slot = stack.pop()
            val = stack.pop()
            sym.pop()  # slot shadow: keyed by the concrete slot
            vsym = sym.pop()
            if val:
                storage[slot] = val
            else:
                storage.pop(slot, None)
            if vsym is None:
                sto_sym.pop(slot, None)
            else:
                sto_sym[slot] = vsym
        elif op == 0x56:  # JUMP
            if not stack:
                return halt("invalid")
            dest = stack.pop()
            sym.pop()
            if dest >= code_len or not is_jumpdest[dest]:
                return halt("invalid")
            pc = dest
            continue
        elif op == 0x57:  # JUMPI
            if len(stack) < 2:
                return halt("invalid")
            dest = stack.pop()
            cond = stack.pop()
            sym.pop()
            csym = sym.pop()
            if csym is not None:
                constraints.append(PathConstraint(csym, pc, bool(cond)))
            if cond:
                if dest >= code_len or not is_jumpdest[dest]:
                    return halt("invalid")
                pc = dest
                continue
        elif op == 0x58:  # PC
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(pc)
            sym.append(None)
        elif op == 0x5A:  # GAS
            if len(stack) >= STACK_LIMIT:
                return halt("invalid")
            stack.append(gas)
            sym.append(None)
        elif op == 0x5B:  # JUMPDEST
            pass
        elif 0xA0 <= op <= 0xA4:  # LOG0..4
            n = op - 0xA0
            if len(stack) < 2 + n:
                return halt("invalid")
            off = stack.pop()
            size = stack.pop()
            del stack[len(stack) - n :]
            del sym[len(sym) - n - 2 :]
            if size and not ensure(off + size):
                return halt("out_of_gas")
        elif op in (0xF0, 0xF1, 0xF4, 0xF5, 0xFA):  # CALL-class / CREATE
            return halt("external_call")
        elif op == 0xFF:  # SELFDESTRUCT
            if not stack:
                return halt("invalid")
            return halt("stop")
        elif op == 0x00:  # STOP
            return halt("stop")
        elif op in (0xF3, 0xFD):  # RETURN / REVERT
            if len(stack) < 2:
                return halt("invalid")
            off = stack.pop()
            size = stack.pop()
            del sym[-2:]
            if size:
                if not ensure(off + size):
                    return halt("out_of_gas")
                data = bytes(memory[off : off + size])
            else:
                data = b""
            return halt("return" if op == 0xF3 else "revert", data)
        else:  # INVALID and unknown bytes
            return halt("invalid")

        pc = nxt[pc]


_BIN_NAME = {
    0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV", 0x06: "MOD",
    0x0A: "EXP", 0x10: "LT", 0x11: "GT", 0x14: "EQ", 0x16: "AND",
    0x17: "OR", 0x18: "XOR", 0x1B: "SHL", 0x1C: "SHR",
}


class SnapshotCache:
    """LRU over post-prefix worlds, bounded by an approximate byte budget."""

    def __init__(self, max_bytes: int | None = None):
        self.max_bytes = max_bytes
        self._entries: dict[bytes, tuple[EvmWorld, tuple]] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _weight(world: EvmWorld) -> int:
        slots = sum(len(s) for s in world.storage.values())
        return 256 + 64 * slots + 48 * len(world.accounts)

    def _evict(self):
        if self.max_bytes is None:
            return
        total = sum(self._weight(w) for w, _ in self._entries.values())
        while total > self.max_bytes and len(self._entries) > 1:
            key = next(iter(self._entries))
            w, _ = self._entries.pop(key)
            total -= self._weight(w)

    def get(self, key: bytes):
        hit = self._entries.pop(key, None)
        if hit is not None:
            self._entries[key] = hit  # refresh recency
            self.hits += 1
        else:
            self.misses += 1
        return hit

    def put(self, key: bytes, world: EvmWorld, preimages: tuple):
        self._entries[key] = (world, preimages)
        self._evict()


def _prefix_key(prefix) -> bytes:
    parts = []
    for tx in prefix:
        args = tx.args if tx.args is not None else ()
        parts.append(
            repr((tx.function_call, args, tx.call_data, tx.delay, tx.source,
                  tx.destination, tx.value))
        )
    return keccak256("\n".join(parts).encode())


def snapshot_of(
    world: EvmWorld, prefix, cache: SnapshotCache | None = None
) -> tuple[EvmWorld, tuple]:
    """World state after running prefix transactions from `world`, plus
    the keccak preimages those runs computed.  Cached runs are reused;
    the cache never changes results, only skips re-execution."""
    prefix = list(prefix)
    if not prefix:
        return world.copy(), ()
    key = _prefix_key(prefix)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit[0].copy(), hit[1]
    after, results = execute_sequence(world, prefix)
    pre = tuple(p for r in results for p in r.sha_preimages)
    if cache is not None:
        cache.put(key, after.copy(), pre)
    return after, pre


def shadow_run(
    world: EvmWorld,
    prefix,
    tx: Transaction,
    cache: SnapshotCache | None = None,
) -> ShadowRun:
    """Execute tx with symbolic call-data shadowing after a concrete
    prefix.  tx must carry structured args (the concrete seed values for
    every symbolic parameter)."""
    base, _ = snapshot_of(world, prefix, cache)
    base.block.timestamp += tx.delay
    bundle = base.deployed.get(tx.destination)
    if bundle is None:
        raise UnknownDestination(f"0x{tx.destination:040x} has no code")
    sig = bundle.by_name.get(tx.function_call)
    if sig is None:
        raise SctestError(f"function {tx.function_call!r} not in {bundle.name} ABI")
    args = tx.args if tx.args is not None else ()
    calldata = encode_call(sig, args)
    layout = ArgLayout(sig, args)

    balances = {a: acc.balance for a, acc in base.accounts.items()}
    if tx.value:
        balances[tx.source] = balances.get(tx.source, 0) - tx.value
        balances[tx.destination] = balances.get(tx.destination, 0) + tx.value
    storage = dict(base.storage.get(tx.destination, {}))
    start_pc, _ = _route(bundle, calldata)
    return _shadow_frame(
        bundle.image,
        calldata,
        layout,
        storage,
        balances,
        tx.destination,
        tx.source,
        tx.value,
        base.block.timestamp,
        base.block.number,
        tx.gas,
        start_pc,
    )


def sym_execute(
    world: EvmWorld,
    prefix,
    tx_symbolic: Transaction,
    cache: SnapshotCache | None = None,
) -> tuple[tuple[int, ...], list[PathConstraint]]:
    """Public entry: (instruction trace, recorded path constraints)."""
    run = shadow_run(world, prefix, tx_symbolic, cache)
    return run.trace, list(run.constraints)


def repin_args(sig, args, pins: dict) -> tuple:
    """Pad or trim dynamic arguments to the pinned lengths."""
    out = list(args)
    for i, (t, name) in enumerate(zip(sig.params, sig.param_names)):
        if not t.is_dynamic or name not in pins:
            continue
        n = pins[name]
        if t.kind == "bytes":
            buf = bytes(out[i])[:n]
            out[i] = buf + b"\x00" * (n - len(buf))
        else:
            lst = list(out[i])[:n]
            out[i] = tuple(lst + [0] * (n - len(lst)))
    return tuple(out)


def concretize_loop(
    tx_symbolic: Transaction, concrete_env: dict, pins: dict | None = None
) -> Transaction:
    """Pin dynamic-argument lengths so loop bounds become concrete.

    concrete_env maps parameter names to the seed values, in declaration
    order.  Lengths default to each seed value's own length, promoted to
    1 when the seed is empty; iterations beyond the pinned length never
    run and so contribute no constraints.  Callers escalate pins (2, 4,
    8) when a branch needs more iterations than the current pin allows."""
    names = list(concrete_env)
    args = list(tx_symbolic.args if tx_symbolic.args is not None else ())
    if len(names) != len(args):
        raise SctestError(
            f"{len(names)} env entries for {len(args)} arguments"
        )
    if pins is None:
        pins = {}
    for i, name in enumerate(names):
        v = concrete_env[name]
        if isinstance(v, (bytes, bytearray)):
            n = pins.get(name, max(1, len(v)))
            buf = bytes(v)[:n]
            args[i] = buf + b"\x00" * (n - len(buf))
        elif isinstance(v, (list, tuple)):
            n = pins.get(name, max(1, len(v)))
            lst = list(v)[:n]
            args[i] = tuple(lst + [0] * (n - len(lst)))
        else:
            args[i] = v
    return replace(tx_symbolic, args=tuple(args))
