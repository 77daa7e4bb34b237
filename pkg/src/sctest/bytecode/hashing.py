"""Keccak-256 and function selectors (backend-selected kernel)."""

from .._kernels import keccak256

__all__ = ["keccak256", "selector"]


def selector(signature: str) -> bytes:
    """First 4 bytes of keccak256 of a canonical signature string."""
    return keccak256(signature.encode("ascii"))[:4]
