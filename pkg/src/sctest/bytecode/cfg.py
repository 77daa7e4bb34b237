"""Control-flow graph recovery from stack-machine bytecode.

Blocks are led by offset 0, JUMPDESTs, and fall-through points after
branches/terminators.  Jump targets are resolved only when the target is
a constant pushed within the same block (the standard compiled-dispatch
pattern); anything else is recorded as an unresolved edge.  Function
entries come from the manifest or from matching the dispatcher pattern
(PUSH4 selector / EQ / JUMPI); body ranges absent from the manifest are
inferred as the dominator closure of the entry block.
"""

from dataclasses import dataclass, field, replace

from .abi import FunctionSig
from .decode import Instr, decode
from .opcodes import OPCODES, TERMINATORS, lookup

_JUMP = 0x56
_JUMPI = 0x57
_JUMPDEST = 0x5B
_PUSH4 = 0x63
_EQ = 0x14

DISPATCHER = FunctionSig("__dispatch__", ())


@dataclass(frozen=True)
class BasicBlock:
    start: int
    instrs: tuple[Instr, ...]
    succs: tuple[int, ...]
    unresolved_jump: bool = False

    @property
    def end(self) -> int:
        last = self.instrs[-1]
        return last.end

    @property
    def terminator(self) -> str:
        return self.instrs[-1].name


@dataclass
class Cfg:
    blocks: dict[int, BasicBlock]
    order: list[int]  # block starts, ascending
    preds: dict[int, tuple[int, ...]]
    block_of: dict[int, int]  # instruction offset -> block start
    branch_edges: list[tuple[int, int]]
    call_edges: list[tuple[FunctionSig, FunctionSig]]
    dispatch: dict[bytes, int]  # selector bytes -> entry offset
    instrs: list[Instr] = field(default_factory=list)

    def dominated_by(self, entry_block: int) -> list[int]:
        """Blocks (starts) whose every path from the CFG entry passes
        through entry_block."""
        doms = self._dominators()
        return sorted(b for b, ds in doms.items() if entry_block in ds)

    def _dominators(self) -> dict[int, set[int]]:
        entry = self.order[0] if self.order else 0
        reachable = self._reachable(entry)
        doms = {b: set(reachable) for b in reachable}
        doms[entry] = {entry}
        changed = True
        while changed:
            changed = False
            for b in self.order:
                if b == entry or b not in reachable:
                    continue
                preds = [p for p in self.preds.get(b, ()) if p in reachable]
                if preds:
                    new = set.intersection(*(doms[p] for p in preds)) | {b}
                else:
                    new = {b}
                if new != doms[b]:
                    doms[b] = new
                    changed = True
        return doms

    def _reachable(self, entry: int) -> set[int]:
        seen: set[int] = set()
        work = [entry]
        while work:
            b = work.pop()
            if b in seen or b not in self.blocks:
                continue
            seen.add(b)
            work.extend(self.blocks[b].succs)
        return seen


def _const_stack_walk(instrs: tuple[Instr, ...]) -> dict[int, int | None]:
    """Per-block constant tracking; returns {jump instr offset: target or None}."""
    stack: list[int | None] = []
    targets: dict[int, int | None] = {}
    for ins in instrs:
        op = lookup(ins.code) if ins.code in OPCODES else None
        if ins.code == _JUMP or ins.code == _JUMPI:
            targets[ins.offset] = stack[-1] if stack else None
            if stack:
                stack.pop()
            if ins.code == _JUMPI and stack:
                stack.pop()
            continue
        if ins.imm_len:
            stack.append(ins.imm)
        elif 0x80 <= ins.code <= 0x8F:  # DUP
            n = ins.code - 0x7F
            stack.append(stack[-n] if len(stack) >= n else None)
        elif 0x90 <= ins.code <= 0x9F:  # SWAP
            n = ins.code - 0x8F
            if len(stack) >= n + 1:
                stack[-1], stack[-n - 1] = stack[-n - 1], stack[-1]
            else:
                stack = [None] * (n + 1 - len(stack)) + stack
                stack[-1], stack[-n - 1] = stack[-n - 1], stack[-1]
        else:
            info = op or OPCODES[0xFE]
            pops = info.pops if op else 0
            for _ in range(min(pops, len(stack))):
                stack.pop()
            stack.extend([None] * info.pushes)
    return targets


def build_cfg(bytecode: bytes, abi: list[FunctionSig] | None = None) -> Cfg:
    instrs = decode(bytecode)
    if not instrs:
        return Cfg({}, [], {}, {}, [], [], {}, [])

    leaders: set[int] = {instrs[0].offset}
    for i, ins in enumerate(instrs):
        if ins.code == _JUMPDEST:
            leaders.add(ins.offset)
        if ins.code in (_JUMP, _JUMPI) or ins.code in TERMINATORS:
            if i + 1 < len(instrs):
                leaders.add(instrs[i + 1].offset)

    # slice instruction list into blocks
    blocks: dict[int, BasicBlock] = {}
    order = sorted(leaders)
    index_of = {ins.offset: i for i, ins in enumerate(instrs)}
    starts = order + [instrs[-1].end]
    block_of: dict[int, int] = {}
    jump_targets: dict[int, int | None] = {}
    for bi, start in enumerate(order):
        stop = starts[bi + 1]
        body = []
        i = index_of[start]
        while i < len(instrs) and instrs[i].offset < stop:
            body.append(instrs[i])
            block_of[instrs[i].offset] = start
            i += 1
        body_t = tuple(body)
        jump_targets.update(_const_stack_walk(body_t))
        blocks[start] = BasicBlock(start, body_t, ())

    valid_dest = {ins.offset for ins in instrs if ins.code == _JUMPDEST}

    # successor edges
    edges: list[tuple[int, int]] = []
    for bi, start in enumerate(order):
        blk = blocks[start]
        last = blk.instrs[-1]
        succs: list[int] = []
        unresolved = False
        if last.code == _JUMP:
            t = jump_targets.get(last.offset)
            if t is not None and t in valid_dest:
                succs.append(block_of[t])
            else:
                unresolved = True
        elif last.code == _JUMPI:
            t = jump_targets.get(last.offset)
            if t is not None and t in valid_dest:
                succs.append(block_of[t])
            else:
                unresolved = True
            if bi + 1 < len(order):
                succs.append(order[bi + 1])
        elif last.code in TERMINATORS:
            pass
        else:  # fallthrough
            if bi + 1 < len(order):
                succs.append(order[bi + 1])
        blocks[start] = BasicBlock(start, blk.instrs, tuple(succs), unresolved)
        edges.extend((start, s) for s in succs)

    preds: dict[int, list[int]] = {b: [] for b in order}
    for a, b in edges:
        preds[b].append(a)
    preds_t = {b: tuple(ps) for b, ps in preds.items()}

    cfg = Cfg(blocks, order, preds_t, block_of, edges, [], {}, instrs)
    cfg.dispatch = _recover_dispatch(cfg)
    if abi:
        cfg.call_edges = _call_edges(cfg, abi)
    return cfg


def _recover_dispatch(cfg: Cfg) -> dict[bytes, int]:
    """Match PUSH4 <sel> .. EQ .. JUMPI(resolved) inside each block."""
    out: dict[bytes, int] = {}
    for start in cfg.order:
        blk = cfg.blocks[start]
        last = blk.instrs[-1]
        if last.code != _JUMPI:
            continue
        taken = [s for s in blk.succs]
        t = _const_stack_walk(blk.instrs).get(last.offset)
        if t is None or t not in cfg.block_of:
            continue
        sel = None
        saw_eq = False
        for ins in blk.instrs:
            if ins.code == _PUSH4:
                sel = ins.imm
            elif ins.code == _EQ and sel is not None:
                saw_eq = True
        if saw_eq and sel is not None:
            out.setdefault(sel.to_bytes(4, "big"), t)
    return out


def _call_edges(cfg: Cfg, abi: list[FunctionSig]) -> list[tuple[FunctionSig, FunctionSig]]:
    entries: dict[int, FunctionSig] = {}
    for sig in resolve_entries(cfg, abi):
        if sig.entry_offset is not None:
            entries[sig.entry_offset] = sig

    edges: list[tuple[FunctionSig, FunctionSig]] = []
    for sel, entry in sorted(cfg.dispatch.items()):
        sig = entries.get(entry)
        if sig is not None:
            edges.append((DISPATCHER, sig))

    # jumps from inside one function body into another function's entry
    ranged = [s for s in entries.values() if s.body_range]
    for a in ranged:
        lo, hi = a.body_range
        for start in cfg.order:
            if not lo <= start < hi:
                continue
            for succ in cfg.blocks[start].succs:
                b = entries.get(succ)
                if b is not None and b is not a:
                    edges.append((a, b))
    seen = set()
    uniq = []
    for e in edges:
        key = (e[0].name, e[1].name)
        if key not in seen:
            seen.add(key)
            uniq.append(e)
    return uniq


def resolve_entries(cfg: Cfg, abi: list[FunctionSig]) -> list[FunctionSig]:
    """Fill entry_offset (via dispatcher match) and body_range (via
    dominator closure) for sigs that lack them."""
    out: list[FunctionSig] = []
    for sig in abi:
        entry = sig.entry_offset
        if entry is None:
            entry_block = cfg.dispatch.get(sig.selector)
            entry = entry_block
        body = sig.body_range
        if body is None and entry is not None and entry in cfg.blocks:
            dominated = cfg.dominated_by(entry)
            if dominated:
                lo = min(dominated)
                hi = max(cfg.blocks[b].end for b in dominated)
                body = (lo, hi)
        out.append(replace(sig, entry_offset=entry, body_range=body))
    return out
