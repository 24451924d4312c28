import json

import numpy as np
import pytest

from qbinfer.errors import ParseError
from qbinfer.observables import OutcomeSpace, Povm
from qbinfer.rand import random_instrument
from qbinfer.serialize import (
    decode_complex,
    decode_instrument,
    decode_matrix,
    decode_povm,
    encode_instrument,
    encode_matrix,
    encode_povm,
    fmt_float,
)


def test_complex_encoding():
    assert decode_complex([1.5, -2.0]) == 1.5 - 2j
    with pytest.raises(ParseError):
        decode_complex([1.0])


def test_matrix_roundtrip():
    m = np.array([[1 + 2j, 0.5], [-1j, 3]], dtype=complex)
    assert np.array_equal(decode_matrix(encode_matrix(m)), m)
    with pytest.raises(ParseError):
        decode_matrix([[[1, 0]], [[1, 0], [0, 0]]])  # ragged


def test_povm_roundtrip():
    povm = Povm(
        OutcomeSpace(("a", "b"), {"a": 0.1, "b": 0.9}),
        {"a": 0.25 * np.eye(2), "b": 0.75 * np.eye(2)},
    )
    block = encode_povm(povm)
    again = decode_povm(json.loads(json.dumps(block)))
    assert again.space == povm.space
    for lab in ("a", "b"):
        assert np.array_equal(again.effect(lab), povm.effect(lab))


def test_instrument_roundtrip():
    gen = np.random.default_rng(0)
    inst = random_instrument(gen, 2, 3, 2)
    block = encode_instrument(inst)
    again = decode_instrument(json.loads(json.dumps(block)))
    assert again.space.labels == inst.space.labels
    for lab in inst.space.labels:
        for k1, k2 in zip(inst.kraus_for(lab), again.kraus_for(lab)):
            assert np.array_equal(k1, k2)


def test_float_formatting_roundtrips():
    for x in (0.1, 1 / 3, 2 / 3, np.pi, 1e-17, 123456.789):
        assert float(fmt_float(x)) == x
