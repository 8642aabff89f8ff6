"""Core protocol values: requests, canonical encoding, path signatures, timing.

Every request an agent issues is wrapped in a path signature: the originator
signs the request, and each relaying agent signs the previous layer. Replicas
accept a wrapped request only while it is live, i.e. the elapsed time in its
round does not exceed (path length) * delta, which is what lets honest relays
outrun the liveness cutoff no matter when they pick a message up.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass

AgentId = int
AssetId = int
Tick = int

SKIP = "Skip"


class MalformedInput(ValueError):
    """Structurally invalid value: bad encoding, broken signature chain, bad field."""


class SignerMismatch(ValueError):
    """A request may only be originated (signed first) by its own agent."""


class DuplicateSigner(ValueError):
    """Each agent may appear at most once in a signature path."""


def _u32(value: int) -> bytes:
    if not 0 <= value <= 0xFFFFFFFF:
        raise MalformedInput(f"u32 out of range: {value}")
    return struct.pack("<I", value)


def _i64(value: int) -> bytes:
    if not -(2**63) <= value < 2**63:
        raise MalformedInput(f"i64 out of range: {value}")
    return struct.pack("<q", value)


def _lp(data: bytes) -> bytes:
    return _u32(len(data)) + data


class _Reader:
    """Cursor over an immutable byte string; every read is bounds-checked."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if count < 0 or self.pos + count > len(self.data):
            raise MalformedInput("trailing or truncated bytes in encoding")
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def lp(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> bool:
        return self.pos == len(self.data)


@dataclass(frozen=True, slots=True)
class MoveDescriptor:
    """A named move with integer or byte-string arguments.

    The canonical encoding is injective: two descriptors encode equal iff they
    are equal, so replicas can deduplicate and compare by bytes.
    """

    name: str
    args: tuple = ()

    def __post_init__(self):
        if not self.name:
            raise MalformedInput("move name must be non-empty")
        for a in self.args:
            if not isinstance(a, (int, bytes)) or isinstance(a, bool):
                raise MalformedInput(f"move arg must be int or bytes, got {type(a).__name__}")

    def encode(self) -> bytes:
        out = [_lp(self.name.encode("utf-8")), _u32(len(self.args))]
        for a in self.args:
            if isinstance(a, int):
                out.append(b"\x00" + _i64(a))
            else:
                out.append(b"\x01" + _lp(a))
        return b"".join(out)


def skip_move() -> MoveDescriptor:
    return MoveDescriptor(SKIP)


@dataclass(frozen=True, slots=True)
class Request:
    """One agent's proposed move for one round. Equality is structural."""

    agent: AgentId
    move: MoveDescriptor
    round: int

    def __post_init__(self):
        if self.agent < 0:
            raise MalformedInput("agent id must be non-negative")
        if self.round < 1:
            raise MalformedInput("round numbers start at 1")


def encode_request(req: Request) -> bytes:
    """Canonical bytes for a request: agent, round, then the move."""
    return _u32(req.agent) + _u32(req.round) + req.move.encode()


def _decode_move(r: _Reader) -> MoveDescriptor:
    name = r.lp().decode("utf-8")
    argc = r.u32()
    if argc > len(r.data):
        raise MalformedInput("arg count exceeds input size")
    args = []
    for _ in range(argc):
        tag = r.take(1)
        if tag == b"\x00":
            args.append(r.i64())
        elif tag == b"\x01":
            args.append(r.lp())
        else:
            raise MalformedInput(f"unknown arg tag {tag!r}")
    return MoveDescriptor(name, tuple(args))


def decode_request(data: bytes) -> Request:
    """Inverse of encode_request; rejects any trailing or truncated bytes."""
    r = _Reader(data)
    agent = r.u32()
    rnd = r.u32()
    move = _decode_move(r)
    if not r.done():
        raise MalformedInput("trailing bytes after request")
    return Request(agent, move, rnd)


@dataclass(frozen=True, slots=True)
class PathSignature:
    """A request wrapped in nested signatures by the agents in `path`.

    path[0] is the originator and signed the raw request; each later agent
    signed the canonical encoding of the layer beneath it. Agents are distinct,
    so a path can never grow past the number of agents.
    """

    request: Request
    path: tuple[AgentId, ...]
    sigs: tuple[bytes, ...]

    def __post_init__(self):
        if not self.path:
            raise MalformedInput("signature path must be non-empty")
        if len(set(self.path)) != len(self.path):
            raise MalformedInput("signature path must not repeat agents")
        if self.path[0] != self.request.agent:
            raise MalformedInput("path must start with the originating agent")
        if len(self.sigs) != len(self.path):
            raise MalformedInput("one signature per path entry")


def encode_path_signature(ps: PathSignature) -> bytes:
    """Canonical nesting: layer 0 wraps the request, layer i wraps layer i-1."""
    out = b"\x00" + _lp(encode_request(ps.request))
    for signer, sig in zip(ps.path, ps.sigs):
        out = b"\x01" + _lp(out) + _u32(signer) + _lp(sig)
    return out


def decode_path_signature(data: bytes) -> PathSignature:
    outer: list[tuple[AgentId, bytes]] = []  # outermost layer first
    r = _Reader(data)
    while True:
        tag = r.take(1)
        if tag == b"\x00":
            req = decode_request(r.lp())
            if not r.done():
                raise MalformedInput("trailing bytes after request layer")
            break
        if tag != b"\x01":
            raise MalformedInput(f"unknown layer tag {tag!r}")
        inner = r.lp()
        signer = r.u32()
        sig = r.lp()
        if not r.done():
            raise MalformedInput("trailing bytes after signature layer")
        outer.append((signer, sig))
        r = _Reader(inner)
    path = tuple(signer for signer, _ in reversed(outer))
    sigs = tuple(sig for _, sig in reversed(outer))
    return PathSignature(req, path, sigs)


class SignatureProvider:
    """Deterministic keyed-MAC signatures for simulation runs.

    Each agent's key is derived from a shared salt, so the same scenario always
    produces byte-identical signatures, and within the model nobody can produce
    another agent's signature without that agent's key.
    """

    def __init__(self, salt: bytes = b"chainsmr"):
        self._salt = salt
        self._keys: dict[AgentId, bytes] = {}

    def _key(self, agent: AgentId) -> bytes:
        k = self._keys.get(agent)
        if k is None:
            k = hashlib.sha256(self._salt + b"|agent|" + _u32(agent)).digest()
            self._keys[agent] = k
        return k

    def sign(self, agent: AgentId, message: bytes) -> bytes:
        return hmac.new(self._key(agent), message, hashlib.sha256).digest()

    def verify(self, agent: AgentId, message: bytes, sig: bytes) -> bool:
        return hmac.compare_digest(self.sign(agent, message), sig)


def sign_request(provider: SignatureProvider, req: Request, signer: AgentId) -> PathSignature:
    """Originate a path signature. Only the request's own agent may do this."""
    if signer != req.agent:
        raise SignerMismatch(f"agent {signer} cannot originate a request by {req.agent}")
    sig = provider.sign(signer, encode_request(req))
    return PathSignature(req, (signer,), (sig,))


def extend_path(provider: SignatureProvider, ps: PathSignature, signer: AgentId) -> PathSignature:
    """Wrap one more signature layer around a verified path signature."""
    if signer in ps.path:
        raise DuplicateSigner(f"agent {signer} already signed this path")
    if not verify_path_signature(provider, ps):
        raise MalformedInput("inner path signature does not verify")
    sig = provider.sign(signer, encode_path_signature(ps))
    return PathSignature(ps.request, ps.path + (signer,), ps.sigs + (sig,))


def verify_path_signature(provider: SignatureProvider, ps: PathSignature) -> bool:
    """Check every layer, innermost first. Never raises on bad input."""
    try:
        message = encode_request(ps.request)
        inner = PathSignature(ps.request, ps.path[:1], ps.sigs[:1])
        if not provider.verify(ps.path[0], message, ps.sigs[0]):
            return False
        for i in range(1, len(ps.path)):
            message = encode_path_signature(inner)
            if not provider.verify(ps.path[i], message, ps.sigs[i]):
                return False
            inner = PathSignature(ps.request, ps.path[: i + 1], ps.sigs[: i + 1])
        return True
    except (MalformedInput, IndexError):
        return False


def round_start_time(rnd: int, n_agents: int, delta: Tick) -> Tick:
    """Scheduled start of a round: initialization takes (n+1)*delta, each round n*delta."""
    return (n_agents + 1) * delta + (rnd - 1) * n_agents * delta


def age(now: Tick, round_start: Tick) -> Tick:
    """Ticks elapsed in a round, saturating at zero for early arrivals."""
    return max(0, now - round_start)


def is_live(ps: PathSignature, now: Tick, round_start: Tick, delta: Tick) -> bool:
    """A k-signature wrap is acceptable while the round age is at most k*delta."""
    return age(now, round_start) <= len(ps.path) * delta


def is_ready(now: Tick, round_start: Tick, n_agents: int, delta: Tick) -> bool:
    """Past every possible liveness window: age strictly greater than n*delta."""
    return age(now, round_start) > n_agents * delta
