"""The coverage-guided fuzzing campaign.

A campaign owns one deployed contract, one fuzz target, and one RNG.
The setup calls run once; every candidate executes its fuzz calls from
that post-setup world (worlds are values, so the snapshot is just a
retained reference).  Candidates are scheduled in proportion to how
many uncovered basic blocks sit adjacent to the blocks their own trace
reached, plus one so fresh entries always have weight.

Bug detection applies two rules to each executed candidate:
  * assert_failure     - a transaction halted on INVALID
  * property_violation - a zero-argument property function reverts or
                         returns the zero word when probed afterwards
"""

import random
import time
from dataclasses import dataclass, field

from ..bytecode.abi import FunctionSig
from ..coverage.covmap import CoverageMap, merge_result
from ..errors import SctestError
from ..evm.engine import execute_sequence, execute_tx
from ..evm.types import ExecResult, Transaction
from .corpus import BugReport, Corpus, Finding, TestCase
from .mutate import Candidate, initial_candidate, mutate
from .target import ConcreteCall, FuzzTarget

CHUNK = 1000  # executions per scheduling iteration

ASSERT_FAILURE = "assert_failure"
PROPERTY_VIOLATION = "property_violation"

_ZERO_WORD = b"\x00" * 32


def _enclosing(abi: list[FunctionSig], offset: int) -> str | None:
    for sig in abi:
        if sig.body_range and sig.body_range[0] <= offset < sig.body_range[1]:
            return sig.name
    return None


def _detect_asserts(
    txs: list[Transaction | None],
    results: list[ExecResult],
    world,
) -> list[tuple[str, int, str, str]]:
    """(kind, pc, function, message) for every INVALID halt."""
    out = []
    for tx, res in zip(txs, results):
        if res.halt != "INVALID" or res.last_offset is None:
            continue
        addr, off = res.last_offset
        bundle = world.deployed.get(addr)
        fn = None
        if bundle is not None:
            fn = _enclosing(bundle.resolved_abi, off)
        if fn is None and tx is not None and tx.function_call:
            fn = tx.function_call
        fn = fn or "fallback"
        out.append(
            (
                ASSERT_FAILURE,
                off,
                fn,
                f"INVALID opcode in {fn} at offset 0x{off:x}",
            )
        )
    return out


def _probe_properties(
    world, props: list[FunctionSig], sender: int, destination: int
) -> list[tuple[str, int, str, str]]:
    """Call each property function once against a settled world."""
    out = []
    for sig in props:
        _, res = execute_tx(
            world,
            Transaction(
                function_call=sig.name,
                args=(),
                source=sender,
                destination=destination,
            ),
        )
        if res.failed:
            reason = f"{sig.name}() {res.halt.lower()}s"
        elif res.return_data == _ZERO_WORD:
            reason = f"{sig.name}() returns the zero word"
        else:
            continue
        off = res.last_offset[1] if res.last_offset else 0
        out.append((PROPERTY_VIOLATION, off, sig.name, reason))
    return out


def detect_bugs(
    results: list[ExecResult],
    world_after,
    abi: list[FunctionSig],
    txs: list[Transaction] | None = None,
    destination: int | None = None,
    sender: int | None = None,
) -> list[tuple[str, int, str, str]]:
    """Apply both detection rules to an executed sequence.

    Returns (kind, pc, function, message) tuples: one assert_failure per
    INVALID halt in `results`, plus one property_violation for every
    property function in `abi` that reverts or returns the zero word
    when probed against `world_after`.
    """
    padded: list[Transaction | None] = list(txs or [])
    padded += [None] * (len(results) - len(padded))
    out = _detect_asserts(padded, results, world_after)
    props = [s for s in abi if s.is_property]
    if props:
        if destination is None:
            deployed = sorted(world_after.deployed)
            if len(deployed) != 1:
                raise SctestError(
                    "property probes need a single deployed contract or"
                    " an explicit destination"
                )
            destination = deployed[0]
        if sender is None:
            sender = next(iter(world_after.accounts))
        out += _probe_properties(world_after, props, sender, destination)
    return out


@dataclass
class ChunkStats:
    executions: int = 0
    new_instructions: int = 0
    new_paths: int = 0
    new_findings: int = 0


@dataclass
class Campaign:
    world: object
    target: FuzzTarget
    rng_seed: int
    destination: int | None = None

    coverage: CoverageMap = field(default_factory=CoverageMap)
    corpus: Corpus = field(default_factory=Corpus)
    report: BugReport = field(default_factory=BugReport)
    executions: int = 0

    def __post_init__(self):
        if self.destination is None:
            deployed = sorted(self.world.deployed)
            if len(deployed) != 1:
                raise SctestError(
                    "campaign needs a single deployed contract or an"
                    " explicit destination"
                )
            self.destination = deployed[0]
        self.bundle = self.world.deployed[self.destination]
        self.abi = self.bundle.resolved_abi
        self._by_name = {s.name: s for s in self.abi}
        self._props = [s for s in self.abi if s.is_property]
        self.default_sender = next(iter(self.world.accounts))
        self.pool = tuple(
            sorted(
                set(self.world.accounts) | set(self.target.address_aliases.values())
            )
        )
        self.rng = random.Random(self.rng_seed)
        self._cands: list[Candidate] = []
        self._blocks: list[set[tuple[int, int]]] = []  # per-entry block starts
        self._finding_keys: set[tuple[str, int, str]] = set()
        self._started = False

        self._setup_txs = [self._tx(c, c.args) for c in self.target.setup]
        self.snapshot, setup_results = execute_sequence(
            self.world, self._setup_txs
        )
        for res in setup_results:
            merge_result(self.coverage, res, self.snapshot)
        self.setup_failed = any(r.failed for r in setup_results)
        # findings surfaced by setup alone attach to the first test case
        self._pending = _detect_asserts(
            self._setup_txs, setup_results, self.snapshot
        )

    # -- transaction building ---------------------------------------------

    def _resolve_sender(self, alias: str | None) -> int:
        if alias is None:
            return self.default_sender
        return self.target.address_aliases[alias]

    def _tx(self, call: ConcreteCall, args: tuple) -> Transaction:
        return Transaction(
            function_call=call.function,
            args=args,
            delay=call.delay,
            source=self._resolve_sender(call.sender),
            destination=self.destination,
            value=call.value,
        )

    def _fuzz_txs(self, cand: Candidate) -> list[Transaction]:
        return [
            self._tx(self.target.fuzz[i], cand.args[i]) for i in cand.order
        ]

    # -- scheduling ---------------------------------------------------------

    def _score(self, entry_blocks: set[tuple[int, int]]) -> int:
        uncovered: set[tuple[int, int]] = set()
        for addr, start in entry_blocks:
            bundle = self.world.deployed.get(addr)
            if bundle is None:
                continue
            blk = bundle.cfg.blocks.get(start)
            if blk is None:
                continue
            for succ in blk.succs:
                if not self.coverage.covered(addr, succ):
                    uncovered.add((addr, succ))
        return len(uncovered) + 1

    def _pick(self) -> Candidate:
        weights = [self._score(b) for b in self._blocks]
        total = sum(weights)
        r = self.rng.random() * total
        acc = 0.0
        for cand, w in zip(self._cands, weights):
            acc += w
            if r < acc:
                return cand
        return self._cands[-1]

    # -- execution ------------------------------------------------------------

    def _trace_blocks(self, results: list[ExecResult]) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for res in results:
            for addr, offsets in res.trace:
                bundle = self.world.deployed.get(addr)
                if bundle is None:
                    continue
                blocks = bundle.cfg.blocks
                out.update((addr, off) for off in offsets if off in blocks)
        return out

    def _instr_count(self) -> int:
        return sum(b.bit_count() for b in self.coverage.bits.values())

    def run(self, execs: int = CHUNK) -> ChunkStats:
        """Execute up to `execs` candidates; returns what the chunk gained."""
        stats = ChunkStats()
        for _ in range(execs):
            if not self._started:
                cand = initial_candidate(self.target)
                self._started = True
                force_insert = True
            else:
                cand = self._pick()
                other = None
                if len(self._cands) >= 2:
                    other = self._cands[self.rng.randrange(len(self._cands))]
                cand = mutate(
                    cand, self.target, self.abi, self.rng, self.pool, other
                )
                force_insert = False

            txs = self._fuzz_txs(cand)
            before_instr = self._instr_count()
            before_paths = len(self.coverage.path_set)
            world_after, results = execute_sequence(self.snapshot, txs)
            for res in results:
                merge_result(self.coverage, res, world_after)
            gained = self._instr_count() - before_instr
            new_paths = len(self.coverage.path_set) - before_paths
            self.executions += 1
            stats.executions += 1
            stats.new_instructions += gained
            stats.new_paths += new_paths

            raw = self._pending + _detect_asserts(txs, results, world_after)
            self._pending = []
            raw += _probe_properties(
                world_after, self._props, self.default_sender, self.destination
            )
            fresh = [
                (kind, pc, fn, msg)
                for kind, pc, fn, msg in raw
                if (kind, pc, fn) not in self._finding_keys
            ]

            if gained > 0 or fresh or force_insert:
                tc = TestCase(tuple(self._setup_txs) + tuple(txs))
                self.corpus.add(
                    tc, {"new_instructions": gained, "new_paths": new_paths}
                )
                self._cands.append(cand)
                self._blocks.append(self._trace_blocks(results))
                for kind, pc, fn, msg in fresh:
                    self._finding_keys.add((kind, pc, fn))
                    self.report.findings.append(
                        Finding(kind, pc, fn, tc.id, msg)
                    )
                stats.new_findings += len(fresh)
        return stats

    def finalize(self) -> None:
        """Shrink the corpus to entries that still pay for themselves."""
        self.corpus = minimize_corpus(self.world, self.corpus, self.report)


def run_campaign(
    world,
    target: FuzzTarget,
    budget: dict,
    rng_seed: int,
) -> tuple[CoverageMap, Corpus, BugReport]:
    """One-shot campaign: run to the budget, minimize, report.

    budget = {"execs": int, "seconds": float | None}.  The seconds bound
    is checked between scheduling chunks, so results are reproducible
    whenever the execution budget binds first.
    """
    camp = Campaign(world, target, rng_seed)
    remaining = int(budget["execs"])
    seconds = budget.get("seconds")
    deadline = time.monotonic() + seconds if seconds else None
    while remaining > 0:
        chunk = min(CHUNK, remaining)
        camp.run(chunk)
        remaining -= chunk
        if deadline is not None and time.monotonic() >= deadline:
            break
    camp.finalize()
    return camp.coverage, camp.corpus, camp.report


def replay(world, corpus: Corpus) -> tuple[CoverageMap, BugReport]:
    """Re-execute every corpus entry from genesis and re-derive findings.

    Entries naming functions the deployed contract no longer exposes are
    marked stale in their delta record and skipped; replay never fails
    on them.
    """
    coverage = CoverageMap()
    report = BugReport()
    seen: set[tuple[str, int, str]] = set()
    deployed = sorted(world.deployed)
    destination = deployed[0] if len(deployed) == 1 else None

    for i, tc in enumerate(corpus.entries):
        stale = any(
            world.deployed.get(tx.destination) is None
            or (
                tx.function_call is not None
                and tx.function_call not in world.deployed[tx.destination].by_name
            )
            for tx in tc.txs
        )
        world_after, results = world, []
        if not stale:
            try:
                world_after, results = execute_sequence(world, list(tc.txs))
            except SctestError:
                stale = True
        if stale:
            if i < len(corpus.deltas):
                corpus.deltas[i]["stale"] = True
            continue
        for res in results:
            merge_result(coverage, res, world_after)
        raw = _detect_asserts(list(tc.txs), results, world_after)
        if destination is not None:
            bundle = world.deployed[destination]
            props = [s for s in bundle.resolved_abi if s.is_property]
            raw += _probe_properties(
                world_after, props, next(iter(world.accounts)), destination
            )
        for kind, pc, fn, msg in raw:
            if (kind, pc, fn) in seen:
                continue
            seen.add((kind, pc, fn))
            report.findings.append(Finding(kind, pc, fn, tc.id, msg))
    return coverage, report


def _replay_signature(world, corpus: Corpus) -> tuple:
    cov, rep = replay(world, corpus)
    return (
        tuple(sorted((a, b) for a, b in cov.bits.items())),
        frozenset((f.kind, f.pc, f.function) for f in rep.findings),
    )


def minimize_corpus(world, corpus: Corpus, report: BugReport) -> Corpus:
    """Greedy one-pass shrink: drop any entry whose removal leaves replay
    coverage (instruction bits plus findings) intact.  Entries cited by a
    finding are always kept so findings stay reproducible."""
    protected = {f.testcase_id for f in report.findings}
    entries = list(corpus.entries)
    deltas = list(corpus.deltas)
    baseline = _replay_signature(world, corpus)
    keep = [True] * len(entries)
    for i in range(len(entries) - 1, -1, -1):
        if entries[i].id in protected:
            continue
        trial = Corpus(
            [e for j, e in enumerate(entries) if keep[j] and j != i],
            [d for j, d in enumerate(deltas) if keep[j] and j != i],
        )
        if _replay_signature(world, trial) == baseline:
            keep[i] = False
    out = Corpus()
    for j, (e, d) in enumerate(zip(entries, deltas)):
        if keep[j]:
            out.add(e, d)
    return out
