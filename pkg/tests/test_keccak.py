"""Keccak-256 oracle tests.

Expected digests are the published Keccak test vectors (pre-SHA3
padding), frozen here before the implementation was written.
"""

import pytest
from hypothesis import given, strategies as st

from sctest.bytecode.hashing import keccak256, selector

# published vectors: empty message, "abc", and the 448-bit message
VECTORS = [
    (b"", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
    (b"abc", "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"),
    (
        b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
        "45d3b367a6904e6e8d502ee04999a7c27647f91fa845d456525fd352ae3d7371",
    ),
]


@pytest.mark.parametrize("message,digest", VECTORS)
def test_published_vectors(message, digest):
    assert keccak256(message).hex() == digest


def test_selector_transfer():
    assert selector("transfer(address,uint256)").hex() == "a9059cbb"


def test_selector_is_prefix_of_digest():
    sig = "deposit(address,uint256,uint256)"
    assert selector(sig) == keccak256(sig.encode())[:4]


@given(st.binary(max_size=500))
def test_digest_shape(data):
    d = keccak256(data)
    assert isinstance(d, bytes) and len(d) == 32
    assert keccak256(data) == d


def test_rate_boundaries():
    # single-byte pad (len % 136 == 135) and full-block inputs both work
    for n in (0, 1, 135, 136, 137, 271, 272, 400):
        a = keccak256(b"\x00" * n)
        b = keccak256(b"\x01" + b"\x00" * (n - 1)) if n else None
        assert len(a) == 32
        if b is not None:
            assert a != b
