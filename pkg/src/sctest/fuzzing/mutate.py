"""Deterministic, type-directed mutation of fuzz candidates.

A Candidate is the campaign's working form of one test: the argument
tuple for every fuzz call (in declaration order) plus the order the
calls execute in.  Mutation only ever touches parameters the target
marked mutable, and reordering only happens in shuffle mode.
"""

import random
from dataclasses import dataclass

from ..bytecode.abi import AbiType, FunctionSig
from .target import FuzzTarget


@dataclass(frozen=True)
class Candidate:
    args: tuple[tuple, ...]  # one tuple per fuzz call, declaration order
    order: tuple[int, ...]  # execution order over fuzz-call indices


def initial_candidate(target: FuzzTarget) -> Candidate:
    return Candidate(
        tuple(c.args for c in target.fuzz),
        tuple(range(len(target.fuzz))),
    )


def _mutate_int(v: int, bits: int, rng: random.Random) -> int:
    mask = (1 << bits) - 1
    op = rng.randrange(3)
    if op == 0:  # boundary values
        return rng.choice(
            [0, 1, mask, 1 << (bits - 1), (v + 1) & mask, (v - 1) & mask]
        )
    if op == 1:  # fresh random word
        return rng.getrandbits(bits)
    return v ^ (1 << rng.randrange(bits))  # single bit flip


def _mutate_bytes(v: bytes, rng: random.Random) -> bytes:
    ops = ["append"]
    if v:
        ops += ["drop", "flip"]
    op = rng.choice(ops)
    if op == "append":
        return v + bytes([rng.randrange(256)])
    if op == "drop":
        return v[:-1]
    i = rng.randrange(len(v))
    return v[:i] + bytes([v[i] ^ (1 << rng.randrange(8))]) + v[i + 1 :]


def _mutate_array(v: tuple, bits: int, rng: random.Random) -> tuple:
    ops = ["grow"]
    if v:
        ops += ["shrink", "element"]
    op = rng.choice(ops)
    if op == "grow":
        return v + (rng.getrandbits(bits),)
    if op == "shrink":
        i = rng.randrange(len(v))
        return v[:i] + v[i + 1 :]
    i = rng.randrange(len(v))
    return v[:i] + (_mutate_int(v[i], bits, rng),) + v[i + 1 :]


def mutate_value(v, ty: AbiType, rng: random.Random, pool: tuple[int, ...]):
    """One mutated value of the same declared type."""
    if ty.kind == "bool":
        return not v
    if ty.kind == "address":
        others = [p for p in pool if p != v]
        return rng.choice(others or list(pool) or [v])
    if ty.kind == "bytes":
        return _mutate_bytes(v, rng)
    if ty.kind == "array":
        return _mutate_array(v, ty.bits, rng)
    return _mutate_int(v, ty.bits, rng)


def _mutable_positions(
    target: FuzzTarget, by_name: dict[str, FunctionSig]
) -> list[tuple[int, int]]:
    """(fuzz call index, parameter index) for every mutable slot."""
    out = []
    for ci, call in enumerate(target.fuzz):
        names = by_name[call.function].param_names
        for pi, name in enumerate(names):
            if name in call.mutable_params:
                out.append((ci, pi))
    return out


def mutate(
    cand: Candidate,
    target: FuzzTarget,
    abi: list[FunctionSig],
    rng: random.Random,
    pool: tuple[int, ...] = (),
    other: "Candidate | None" = None,
) -> Candidate:
    """One mutation step: a type-directed value mutation on a mutable
    parameter, a splice with another candidate, or (in shuffle mode)
    an adjacent swap in the execution order."""
    by_name = {s.name: s for s in abi}
    slots = _mutable_positions(target, by_name)
    ops: list[str] = []
    if slots:
        ops += ["param"] * 6
    if other is not None and other != cand:
        ops.append("splice")
    if target.order_mode == "shuffle" and len(target.fuzz) >= 2:
        ops.append("swap")
    if not ops:
        return cand
    op = rng.choice(ops)

    if op == "swap":
        j = rng.randrange(len(cand.order) - 1)
        order = list(cand.order)
        order[j], order[j + 1] = order[j + 1], order[j]
        return Candidate(cand.args, tuple(order))

    if op == "splice":
        if len(cand.args) == 1:
            return Candidate(other.args, cand.order)
        cut = rng.randrange(1, len(cand.args))
        return Candidate(cand.args[:cut] + other.args[cut:], cand.order)

    ci, pi = rng.choice(slots)
    sig = by_name[target.fuzz[ci].function]
    row = list(cand.args[ci])
    row[pi] = mutate_value(row[pi], sig.params[pi], rng, pool)
    new_args = cand.args[:ci] + (tuple(row),) + cand.args[ci + 1 :]
    return Candidate(new_args, cand.order)
