"""Canonical encoding, path signatures, and the liveness clock."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainsmr.core import (
    DuplicateSigner,
    MalformedInput,
    MoveDescriptor,
    PathSignature,
    Request,
    SignatureProvider,
    SignerMismatch,
    age,
    decode_path_signature,
    decode_request,
    encode_path_signature,
    encode_request,
    extend_path,
    is_live,
    is_ready,
    round_start_time,
    sign_request,
    skip_move,
    verify_path_signature,
)

args_st = st.lists(
    st.one_of(st.integers(min_value=-(2**63), max_value=2**63 - 1), st.binary(max_size=16)),
    max_size=4,
).map(tuple)
moves_st = st.builds(MoveDescriptor, st.text(min_size=1, max_size=8), args_st)
requests_st = st.builds(
    Request, agent=st.integers(0, 9), move=moves_st, round=st.integers(1, 40)
)


@given(requests_st)
def test_request_round_trip(req):
    assert decode_request(encode_request(req)) == req


@given(requests_st, requests_st)
def test_encoding_injective(a, b):
    assert (encode_request(a) == encode_request(b)) == (a == b)


@given(requests_st)
def test_trailing_bytes_rejected(req):
    data = encode_request(req)
    with pytest.raises(MalformedInput):
        decode_request(data + b"\x00")


@given(requests_st, st.integers(min_value=1, max_value=8))
def test_truncation_rejected(req, cut):
    data = encode_request(req)
    cut = min(cut, len(data))
    with pytest.raises(MalformedInput):
        decode_request(data[:-cut])


def test_move_arg_types_guarded():
    with pytest.raises(MalformedInput):
        MoveDescriptor("X", (True,))
    with pytest.raises(MalformedInput):
        MoveDescriptor("X", (1.5,))
    with pytest.raises(MalformedInput):
        MoveDescriptor("")


def test_request_field_guards():
    with pytest.raises(MalformedInput):
        Request(agent=-1, move=skip_move(), round=1)
    with pytest.raises(MalformedInput):
        Request(agent=0, move=skip_move(), round=0)
    # encodable range is checked at encode time
    with pytest.raises(MalformedInput):
        encode_request(Request(agent=2**32, move=skip_move(), round=1))


# -- path signatures ---------------------------------------------------------


def _req(agent=0, name="Agree", rnd=1, args=()):
    return Request(agent=agent, move=MoveDescriptor(name, args), round=rnd)


def test_sign_verify_extend():
    p = SignatureProvider()
    ps = sign_request(p, _req(), 0)
    assert verify_path_signature(p, ps)
    ps2 = extend_path(p, ps, 1)
    assert ps2.path == (0, 1)
    assert verify_path_signature(p, ps2)
    ps3 = extend_path(p, ps2, 2)
    assert verify_path_signature(p, ps3)


def test_originator_must_sign_own_request():
    p = SignatureProvider()
    with pytest.raises(SignerMismatch):
        sign_request(p, _req(agent=0), 1)
    # a signature produced with the wrong key never verifies
    forged = PathSignature(_req(agent=0), (0,), (p.sign(1, encode_request(_req(agent=0))),))
    assert not verify_path_signature(p, forged)


def test_tampered_layers_fail():
    p = SignatureProvider()
    ps = extend_path(p, sign_request(p, _req(), 0), 1)
    swapped_req = PathSignature(_req(name="Complete"), (0, 1), ps.sigs)
    assert not verify_path_signature(p, swapped_req)
    bad_inner = PathSignature(ps.request, ps.path, (b"\x00" * 32, ps.sigs[1]))
    assert not verify_path_signature(p, bad_inner)
    bad_outer = PathSignature(ps.request, ps.path, (ps.sigs[0], b"\x00" * 32))
    assert not verify_path_signature(p, bad_outer)


def test_path_structure_guards():
    p = SignatureProvider()
    ps = sign_request(p, _req(), 0)
    with pytest.raises(DuplicateSigner):
        extend_path(p, ps, 0)
    with pytest.raises(MalformedInput):
        PathSignature(_req(agent=0), (1,), (b"x",))  # path must start with originator
    with pytest.raises(MalformedInput):
        PathSignature(_req(agent=0), (0,), ())  # one signature per entry
    with pytest.raises(MalformedInput):
        PathSignature(_req(agent=0), (), ())


def test_extend_refuses_unverified_inner():
    p = SignatureProvider()
    fake = PathSignature(_req(), (0,), (b"\x00" * 32,))
    with pytest.raises(MalformedInput):
        extend_path(p, fake, 1)


@given(requests_st, st.lists(st.integers(0, 9), unique=True, min_size=0, max_size=3))
def test_path_signature_round_trip(req, relayers):
    p = SignatureProvider()
    ps = sign_request(p, req, req.agent)
    for r in relayers:
        if r in ps.path:
            continue
        ps = extend_path(p, ps, r)
    decoded = decode_path_signature(encode_path_signature(ps))
    assert decoded == ps
    assert verify_path_signature(p, decoded)


def test_decode_path_signature_rejects_garbage():
    with pytest.raises(MalformedInput):
        decode_path_signature(b"")
    with pytest.raises(MalformedInput):
        decode_path_signature(b"\x02\x00")
    p = SignatureProvider()
    good = encode_path_signature(sign_request(p, _req(), 0))
    with pytest.raises(MalformedInput):
        decode_path_signature(good + b"\x00")


# -- timing ------------------------------------------------------------------


def test_age_saturates():
    assert age(5, 10) == 0
    assert age(10, 10) == 0
    assert age(17, 10) == 7


def test_liveness_boundary_inclusive():
    p = SignatureProvider()
    delta = 10
    ps1 = sign_request(p, _req(), 0)  # path length 1
    assert is_live(ps1, 100 + delta, 100, delta)
    assert not is_live(ps1, 100 + delta + 1, 100, delta)
    ps2 = extend_path(p, ps1, 1)  # path length 2
    assert is_live(ps2, 100 + 2 * delta, 100, delta)
    assert not is_live(ps2, 100 + 2 * delta + 1, 100, delta)


def test_ready_boundary_exclusive():
    assert not is_ready(100 + 30, 100, 3, 10)
    assert is_ready(100 + 31, 100, 3, 10)


@given(st.integers(1, 20), st.integers(2, 6), st.integers(1, 20))
def test_round_start_closed_form(rnd, n, delta):
    assert round_start_time(1, n, delta) == (n + 1) * delta
    start = round_start_time(rnd, n, delta)
    assert round_start_time(rnd + 1, n, delta) == start + n * delta
