import pytest
from hypothesis import given, strategies as st

from sctest.bytecode import keccak256, parse_abi
from sctest.bytecode.abi import AbiType, FunctionSig, encode_args, encode_call
from sctest.errors import ArityMismatch, SchemaError, TypeMismatch, ValueOutOfRange


def sig(name, *params, **kw):
    return FunctionSig(name, tuple(AbiType.parse(p) for p in params), **kw)


def test_parse_abi_selector():
    sigs = parse_abi(
        {"functions": [{"name": "deposit", "params": ["address", "uint256", "uint256"]}]}
    )
    assert sigs[0].selector == keccak256(b"deposit(address,uint256,uint256)")[:4]


def test_parse_abi_empty():
    assert parse_abi({"functions": []}) == []


def test_parse_abi_unknown_type():
    with pytest.raises(SchemaError) as e:
        parse_abi({"functions": [{"name": "f", "params": ["uint13"]}]})
    assert "params[0]" in str(e.value)


def test_parse_abi_duplicate():
    fn = {"name": "f", "params": ["uint256"]}
    with pytest.raises(SchemaError):
        parse_abi({"functions": [fn, dict(fn)]})


def test_property_prefix_rule():
    sigs = parse_abi(
        {
            "functions": [
                {"name": "prop_solvent", "params": []},
                {"name": "deposit", "params": []},
                {"name": "check", "params": [], "is_property": True},
            ]
        }
    )
    assert [s.is_property for s in sigs] == [True, False, True]


def test_encode_single_word():
    f = sig("f", "uint256")
    data = encode_call(f, [1])
    assert data[:4] == f.selector
    assert data[4:] == (1).to_bytes(32, "big")
    assert len(data) == 36


def test_encode_checkbalance_head_tail():
    # checkBalance(uint256[],uint256) with ([8,1,1], 2)
    f = sig("checkBalance", "uint256[]", "uint256")
    body = encode_args(f.params, ([8, 1, 1], 2))
    words = [body[i : i + 32] for i in range(0, len(body), 32)]
    assert int.from_bytes(words[0], "big") == 0x40  # offset of the tail
    assert int.from_bytes(words[1], "big") == 2
    assert [int.from_bytes(w, "big") for w in words[2:]] == [3, 8, 1, 1]


def test_encode_bytes_padding():
    f = sig("g", "bytes")
    body = encode_args(f.params, (b"\x03\x04",))
    assert int.from_bytes(body[0:32], "big") == 0x20
    assert int.from_bytes(body[32:64], "big") == 2
    assert body[64:66] == b"\x03\x04"
    assert body[66:96] == bytes(30)
    assert len(body) == 96


def test_encode_bool_and_address():
    f = sig("h", "bool", "address")
    body = encode_args(f.params, (True, 0xDEAD))
    assert int.from_bytes(body[0:32], "big") == 1
    assert int.from_bytes(body[32:64], "big") == 0xDEAD


def test_value_out_of_range():
    with pytest.raises(ValueOutOfRange):
        encode_args((AbiType.parse("uint8"),), (256,))


def test_arity_and_type_mismatch():
    with pytest.raises(ArityMismatch):
        encode_args((AbiType.parse("uint256"),), (1, 2))
    with pytest.raises(TypeMismatch):
        encode_args((AbiType.parse("uint256"),), ("nope",))
    with pytest.raises(TypeMismatch):
        encode_args((AbiType.parse("bytes"),), (7,))


def test_canonical_names():
    for t in ("uint8", "uint256", "address", "bool", "bytes", "uint64[]"):
        assert AbiType.parse(t).canonical() == t
    with pytest.raises(ValueError):
        AbiType.parse("int256")
    with pytest.raises(ValueError):
        AbiType.parse("bytes[]")


@given(
    st.lists(st.integers(0, 2**256 - 1), max_size=5),
    st.integers(0, 2**256 - 1),
)
def test_dynamic_layout_structure(arr, x):
    f = sig("p", "uint256[]", "uint256")
    body = encode_args(f.params, (arr, x))
    assert len(body) == 64 + 32 + 32 * len(arr)
    assert int.from_bytes(body[64:96], "big") == len(arr)
