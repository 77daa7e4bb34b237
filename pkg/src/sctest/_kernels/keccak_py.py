"""Pure-Python Keccak-256 (legacy pre-standard 0x01 padding).

Fallback twin of the compiled kernel in _speedups.pyx; the two are held
behaviourally identical by tests/test_kernels.py.
"""

_MASK = (1 << 64) - 1

_RC = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)


def _offsets() -> tuple[tuple[int, ...], tuple[int, ...]]:
    # standard rho rotation offsets and pi lane permutation, lane index x + 5y
    rot = [0] * 25
    x, y = 1, 0
    for t in range(24):
        rot[x + 5 * y] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    pi = [0] * 25
    for xx in range(5):
        for yy in range(5):
            pi[xx + 5 * yy] = yy + 5 * ((2 * xx + 3 * yy) % 5)
    return tuple(rot), tuple(pi)


_ROT, _PI = _offsets()
_RATE = 136  # bytes, for 256-bit output


def _f1600(lanes: list[int]) -> None:
    """keccak-f[1600] permutation in place over 25 little-endian u64 lanes."""
    rot, pi, mask = _ROT, _PI, _MASK
    for rc in _RC:
        # theta
        c = [
            lanes[i] ^ lanes[i + 5] ^ lanes[i + 10] ^ lanes[i + 15] ^ lanes[i + 20]
            for i in range(5)
        ]
        for i in range(5):
            t = c[(i + 4) % 5] ^ (
                ((c[(i + 1) % 5] << 1) | (c[(i + 1) % 5] >> 63)) & mask
            )
            for j in range(i, 25, 5):
                lanes[j] ^= t
        # rho + pi
        b = [0] * 25
        for i in range(25):
            r = rot[i]
            v = lanes[i]
            b[pi[i]] = ((v << r) | (v >> (64 - r))) & mask if r else v
        # chi
        for yy in range(0, 25, 5):
            row = b[yy : yy + 5]
            for xx in range(5):
                lanes[yy + xx] = row[xx] ^ (
                    (row[(xx + 1) % 5] ^ mask) & row[(xx + 2) % 5]
                )
        # iota
        lanes[0] ^= rc


def keccak256(data: bytes) -> bytes:
    lanes = [0] * 25
    n = len(data)
    pos = 0
    while n - pos >= _RATE:
        block = data[pos : pos + _RATE]
        for j in range(17):
            lanes[j] ^= int.from_bytes(block[8 * j : 8 * j + 8], "little")
        _f1600(lanes)
        pos += _RATE
    tail = bytearray(data[pos:])
    pad = _RATE - len(tail)
    if pad == 1:
        tail.append(0x81)
    else:
        tail.append(0x01)
        tail.extend(b"\x00" * (pad - 2))
        tail.append(0x80)
    for j in range(17):
        lanes[j] ^= int.from_bytes(tail[8 * j : 8 * j + 8], "little")
    _f1600(lanes)
    return b"".join(lanes[j].to_bytes(8, "little") for j in range(4))
