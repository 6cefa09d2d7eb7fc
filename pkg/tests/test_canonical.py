import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medledger import canonical


def values(max_depth=3):
    scalars = st.one_of(
        st.none(),
        st.booleans(),
        st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1),
        st.binary(max_size=64),
        st.text(max_size=32),
    )
    return st.recursive(
        scalars,
        lambda inner: st.one_of(
            st.lists(inner, max_size=5),
            st.dictionaries(st.text(max_size=8), inner, max_size=5),
        ),
        max_leaves=20,
    )


@given(values())
@settings(max_examples=300)
def test_round_trip(value):
    encoded = canonical.encode(value)
    decoded = canonical.decode(encoded)
    # Tuples encode as lists; normalize before comparing.
    assert decoded == _listify(value)
    assert canonical.encode(decoded) == encoded


def _listify(value):
    if isinstance(value, (list, tuple)):
        return [_listify(v) for v in value]
    if isinstance(value, dict):
        return {k: _listify(v) for k, v in value.items()}
    if isinstance(value, bytearray):
        return bytes(value)
    return value


def test_dict_key_order_is_irrelevant():
    a = canonical.encode({"b": 1, "a": 2, "c": None})
    b = canonical.encode({"c": None, "a": 2, "b": 1})
    assert a == b


def test_digest_is_stable():
    value = {"kind": "Send", "items": [1, 2, 3], "blob": b"\x00\xff"}
    assert canonical.digest(value) == canonical.digest(dict(reversed(value.items())))
    assert len(canonical.digest(value)) == canonical.DIGEST_SIZE


def test_rejects_floats_and_non_string_keys():
    with pytest.raises(canonical.EncodingError):
        canonical.encode(1.5)
    with pytest.raises(canonical.EncodingError):
        canonical.encode({1: "x"})


def test_rejects_out_of_range_int():
    with pytest.raises(canonical.EncodingError):
        canonical.encode(1 << 64)


def test_decode_rejects_trailing_and_truncated():
    encoded = canonical.encode([1, 2])
    with pytest.raises(canonical.EncodingError):
        canonical.decode(encoded + b"\x00")
    with pytest.raises(canonical.EncodingError):
        canonical.decode(encoded[:-1])


@given(st.binary(min_size=0, max_size=200))
@settings(max_examples=300)
def test_decode_never_crashes_on_garbage(raw):
    try:
        value = canonical.decode(raw)
    except canonical.EncodingError:
        return
    # Anything that decodes must re-encode to the same bytes.
    assert canonical.encode(value) == raw


def test_decode_rejects_unsorted_dict():
    # Hand-build a dict encoding with keys out of canonical order.
    ka = canonical.encode("b")[0:]  # tagged string 'b'
    kb = canonical.encode("a")
    body = b"D" + (2).to_bytes(4, "big") + ka + canonical.encode(1) + kb + canonical.encode(2)
    with pytest.raises(canonical.EncodingError):
        canonical.decode(body)
