"""Core value types for the execution environment."""

from dataclasses import dataclass, field

DEFAULT_TIMESTAMP = 1_000_000
DEFAULT_GAS = 10_000_000
ADDR_MASK = (1 << 160) - 1


def addr_hex(address: int) -> str:
    return f"0x{address & ADDR_MASK:040x}"


def parse_addr(text: str | int) -> int:
    if isinstance(text, int):
        return text & ADDR_MASK
    return int(text, 16) & ADDR_MASK


@dataclass
class Account:
    address: int  # 160-bit
    balance: int  # WEI


@dataclass
class BlockCtx:
    timestamp: int = DEFAULT_TIMESTAMP
    number: int = 1


def normalize_args(args) -> tuple:
    """Make an argument list hashable and canonical (lists -> tuples)."""
    out = []
    for a in args:
        if isinstance(a, (list, tuple)):
            out.append(tuple(int(x) for x in a))
        elif isinstance(a, bytearray):
            out.append(bytes(a))
        else:
            out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class Transaction:
    """The 8-tuple unit of contract interaction.

    Exactly one of (args, call_data) drives encoding: structured args are
    ABI-encoded at execution time via the destination's manifest; raw
    call_data is passed through untouched.
    """

    function_call: str
    args: tuple | None = None
    call_data: bytes | None = None
    delay: int = 0
    gas: int = DEFAULT_GAS
    gas_price: int = 1  # carried per the transaction tuple; unused by the interpreter
    source: int = 0
    destination: int = 0
    value: int = 0

    def __post_init__(self):
        if self.args is not None:
            object.__setattr__(self, "args", normalize_args(self.args))


@dataclass(frozen=True)
class ExecResult:
    halt: str  # STOP | RETURN | REVERT | INVALID | OUT_OF_GAS
    return_data: bytes
    gas_used: int
    # trace as (address, offsets) segments in execution order; inner call
    # frames contribute their own segments between the caller's
    trace: tuple[tuple[int, tuple[int, ...]], ...]
    external_calls: tuple[dict, ...]
    logs: tuple[tuple[int, int, tuple, bytes], ...]  # (address, pc, topics, data)
    # (preimage, digest) pairs observed at SHA3 sites; feeds the
    # campaign-local preimage table used by hash concretization
    sha_preimages: tuple[tuple[bytes, bytes], ...] = ()

    def offsets(self, address: int | None = None) -> list[int]:
        """Flattened instruction offsets, optionally for one address."""
        out: list[int] = []
        for addr, seg in self.trace:
            if address is None or addr == address:
                out.extend(seg)
        return out

    @property
    def last_offset(self) -> tuple[int, int] | None:
        """(address, offset) of the final executed instruction."""
        if not self.trace:
            return None
        addr, seg = self.trace[-1]
        return (addr, seg[-1]) if seg else None

    @property
    def failed(self) -> bool:
        return self.halt in ("REVERT", "INVALID", "OUT_OF_GAS")
