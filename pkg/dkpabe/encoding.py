'''encoding.py: Contains the key store entry format and the canonical codecs of every serialized entity.

Key store entry layout (all integers big-endian):
    magic "DKAB" | version u8 | backend tag u8 | role u8 | payload length u32 | payload | checksum (4 bytes)
The checksum covers every byte before it.
'''

from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Optional

from .access import AccessTree, AttributeId, Node
from .checksum import CHECKSUM_SIZE, ChecksumCalculator
from .errors import BackendMismatch, BadChecksum, BadMagic, BadVersion, FormatError, MalformedProof
from .groups import TAG_BACKENDS, Backend, GroupContext, SourceElement, TargetElement
from .kpabe import AuthorityPublicKey, AuthoritySecretKey, Ciphertext, GlobalParams, UserKeyShare
from .stream import Stream, prefixed, prefixed_string
from .zkp import PedersenCommitment, PedersenOpening, SigmaProof, SigmaProtocol

MAGIC = b"DKAB"
FORMAT_VERSION = 1
_HEADER_SIZE = len(MAGIC) + 3 + 4


class Role(IntEnum):
    GLOBAL_PARAMS = 1
    AUTHORITY_PK = 2
    AUTHORITY_SK = 3
    USER_SHARE = 4
    PSEUDONYM = 5


@dataclass(frozen=True)
class KeyStoreEntry:
    '''
    A versioned, checksummed container for one serialized entity.

    Attributes:
        role:        What the payload holds.
        backend_tag: The backend tag of every element inside the payload.
        payload:     The canonical entity bytes.
    '''
    role: Role
    backend_tag: int
    payload: bytes
    version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        body = (MAGIC + bytes([self.version, self.backend_tag, int(self.role)])
                + len(self.payload).to_bytes(4, "big") + self.payload)
        return body + ChecksumCalculator.calculate_checksum(body)

    @property
    def backend(self) -> Optional[Backend]:
        return TAG_BACKENDS.get(self.backend_tag)

    @staticmethod
    def from_bytes(data: bytes) -> "KeyStoreEntry":
        with Stream.from_byte_array(data) as stream:
            return KeyStoreDecoder(stream).read()


class KeyStoreDecoder:
    '''
    A class for decoding a key store entry from a stream.

    Attributes:
        _stream: The stream holding one entry.
    '''

    def __init__(self, stream: Stream):
        if stream is None:
            raise ValueError("stream parameter is None")
        self._stream = stream

    def is_entry(self) -> bool:
        '''Returns whether the stream starts with a key store header.'''
        position = self._stream.position()
        try:
            return self._stream.get_length() - position >= _HEADER_SIZE + CHECKSUM_SIZE \
                and self._stream.read_bytes(len(MAGIC)) == MAGIC
        except FormatError:
            return False
        finally:
            self._stream.seek(position)

    def check_integrity(self) -> bool:
        '''Returns whether the entry checksum matches.'''
        position = self._stream.position()
        try:
            self.read()
        except FormatError:
            return False
        finally:
            self._stream.seek(position)
        return True

    def read(self) -> KeyStoreEntry:
        stream = self._stream
        checksum = ChecksumCalculator()
        stream.set_checksum(checksum)
        try:
            magic = stream.read_bytes(len(MAGIC))
            if magic != MAGIC:
                raise BadMagic(f"Not a key store entry (magic {magic!r})")
            version = stream.read_byte()
            if version != FORMAT_VERSION:
                raise BadVersion(f"Unsupported key store version {version}")
            backend_tag = stream.read_byte()
            role_byte = stream.read_byte()
            payload = stream.read_prefixed()
        finally:
            stream.set_checksum(None)
        expected = checksum.get_checksum()
        if stream.read_bytes(CHECKSUM_SIZE) != expected:
            raise BadChecksum("Key store entry checksum does not match")
        try:
            role = Role(role_byte)
        except ValueError:
            raise FormatError(f"Unknown key store role {role_byte}") from None
        return KeyStoreEntry(role, backend_tag, payload, version)


def _expect_backend(entry: KeyStoreEntry, ctx: GroupContext):
    if entry.backend_tag != ctx.tag:
        found = entry.backend.value if entry.backend else f"0x{entry.backend_tag:02x}"
        raise BackendMismatch(f"Entry was written for the {found} backend, context is {ctx.kind.value}")


def _expect_role(entry: KeyStoreEntry, role: Role):
    if entry.role != role:
        raise FormatError(f"Expected a {role.name.lower()} entry, found {entry.role.name.lower()}")


def _finish(stream: Stream):
    if not stream.at_end():
        raise FormatError(f"{stream.remaining()} trailing bytes after payload")


def read_source(ctx: GroupContext, stream: Stream) -> SourceElement:
    element = ctx.read_element(stream)
    if not isinstance(element, SourceElement):
        raise FormatError("Expected a source group element")
    return element


def read_target(ctx: GroupContext, stream: Stream) -> TargetElement:
    element = ctx.read_element(stream)
    if not isinstance(element, TargetElement):
        raise FormatError("Expected a target group element")
    return element


# access trees: preorder records of (threshold u16, child count u16, authority u32, index u32)

def encode_tree(tree: AccessTree) -> bytes:
    records = bytearray()
    count = 0
    for _, node in tree.walk():
        attribute = node.attribute
        records += node.threshold.to_bytes(2, "big") + len(node.children).to_bytes(2, "big")
        records += (attribute.authority if attribute else 0).to_bytes(4, "big")
        records += (attribute.index if attribute else 0).to_bytes(4, "big")
        count += 1
    return count.to_bytes(4, "big") + bytes(records)


def read_tree(stream: Stream) -> AccessTree:
    remaining = [stream.read_uint_32()]
    if remaining[0] == 0:
        raise FormatError("Empty access tree")

    def read_node():
        if remaining[0] == 0:
            raise FormatError("Access tree records end early")
        remaining[0] -= 1
        threshold = stream.read_uint_16()
        child_count = stream.read_uint_16()
        authority = stream.read_uint_32()
        index = stream.read_uint_32()
        if child_count == 0:
            try:
                return Node(threshold, (), AttributeId(authority, index))
            except ValueError as error:
                raise FormatError(str(error)) from None
        return Node(threshold, tuple(read_node() for _ in range(child_count)))

    root = read_node()
    if remaining[0] != 0:
        raise FormatError("Access tree has unreachable records")
    try:
        return AccessTree(root)
    except ValueError as error:
        raise FormatError(f"Invalid access tree: {error}") from None


def decode_tree(data: bytes) -> AccessTree:
    with Stream.from_byte_array(data) as stream:
        tree = read_tree(stream)
        _finish(stream)
    return tree


def encode_attribute(attribute: AttributeId) -> bytes:
    return attribute.authority.to_bytes(4, "big") + attribute.index.to_bytes(4, "big")


def read_attribute(stream: Stream) -> AttributeId:
    try:
        return AttributeId(stream.read_uint_32(), stream.read_uint_32())
    except ValueError as error:
        raise FormatError(str(error)) from None


# entity payloads

def _params_payload(params: GlobalParams) -> bytes:
    order = params.order
    return (prefixed(order.to_bytes((order.bit_length() + 7) // 8, "big"))
            + params.g.to_bytes() + params.h.to_bytes() + params.h1.to_bytes())


def _read_params(stream: Stream, backend: Backend) -> GlobalParams:
    order = stream.read_big_int()
    ctx = GroupContext.create(backend, None if backend == Backend.CURVE else order)
    if ctx.order != order:
        raise FormatError("Group order does not match the backend")
    g, h, h1 = (read_source(ctx, stream) for _ in range(3))
    if g != ctx.generator():
        raise FormatError("Unexpected group generator")
    return GlobalParams(ctx, g, h, h1, ctx.pair(g, g))


def _pk_payload(pk: AuthorityPublicKey) -> bytes:
    out = bytearray(pk.authority_id.to_bytes(4, "big") + prefixed_string(pk.name))
    out += len(pk.attribute_names).to_bytes(4, "big")
    for name in pk.attribute_names:
        out += prefixed_string(name)
    out += pk.Y.to_bytes() + pk.Z.to_bytes() + len(pk.T).to_bytes(4, "big")
    for element in pk.T:
        out += element.to_bytes()
    return bytes(out)


def _read_pk(stream: Stream, ctx: GroupContext) -> AuthorityPublicKey:
    authority_id = stream.read_uint_32()
    name = stream.read_string()
    names = tuple(stream.read_string() for _ in range(stream.read_uint_32()))
    Y = read_target(ctx, stream)
    Z = read_source(ctx, stream)
    T = tuple(read_source(ctx, stream) for _ in range(stream.read_uint_32()))
    if names and len(names) != len(T):
        raise FormatError("Attribute name table does not match the key")
    return AuthorityPublicKey(authority_id, Y, Z, T, names, name)


def _sk_payload(ctx: GroupContext, sk: AuthoritySecretKey) -> bytes:
    out = bytearray(sk.authority_id.to_bytes(4, "big"))
    out += ctx.scalar_to_bytes(sk.alpha) + ctx.scalar_to_bytes(sk.beta) + len(sk.t).to_bytes(4, "big")
    for value in sk.t:
        out += ctx.scalar_to_bytes(value)
    return bytes(out)


def _read_sk(stream: Stream, ctx: GroupContext) -> AuthoritySecretKey:
    authority_id = stream.read_uint_32()
    alpha = ctx.read_scalar(stream)
    beta = ctx.read_scalar(stream)
    t = tuple(ctx.read_scalar(stream) for _ in range(stream.read_uint_32()))
    return AuthoritySecretKey(authority_id, alpha, beta, t)


def _share_payload(share: UserKeyShare) -> bytes:
    out = bytearray(share.authority_id.to_bytes(4, "big") + prefixed(encode_tree(share.tree)))
    out += share.D.to_bytes() + share.D1.to_bytes() + len(share.Dj).to_bytes(4, "big")
    for attribute in sorted(share.Dj):
        out += encode_attribute(attribute) + share.Dj[attribute].to_bytes()
    return bytes(out)


def _read_share(stream: Stream, ctx: GroupContext) -> UserKeyShare:
    authority_id = stream.read_uint_32()
    tree = decode_tree(stream.read_prefixed())
    D = read_source(ctx, stream)
    D1 = read_source(ctx, stream)
    Dj = {}
    for _ in range(stream.read_uint_32()):
        attribute = read_attribute(stream)
        Dj[attribute] = read_source(ctx, stream)
    if set(Dj) != tree.leaf_set():
        raise FormatError("Leaf components do not match the access tree")
    return UserKeyShare(authority_id, tree, D, D1, Dj)


def _pseudonym_payload(ctx: GroupContext, pseudonym: PedersenCommitment) -> bytes:
    return (pseudonym.com.to_bytes() + ctx.scalar_to_bytes(pseudonym.opening.message)
            + ctx.scalar_to_bytes(pseudonym.opening.blinder))


def _read_pseudonym(stream: Stream, ctx: GroupContext) -> PedersenCommitment:
    com = read_source(ctx, stream)
    return PedersenCommitment(com, PedersenOpening(ctx.read_scalar(stream), ctx.read_scalar(stream)))


def encode(params: GlobalParams, entity) -> bytes:
    '''Serializes any key store entity into a checksummed entry.'''
    ctx = params.ctx
    if isinstance(entity, GlobalParams):
        role, payload = Role.GLOBAL_PARAMS, _params_payload(entity)
    elif isinstance(entity, AuthorityPublicKey):
        role, payload = Role.AUTHORITY_PK, _pk_payload(entity)
    elif isinstance(entity, AuthoritySecretKey):
        role, payload = Role.AUTHORITY_SK, _sk_payload(ctx, entity)
    elif isinstance(entity, UserKeyShare):
        role, payload = Role.USER_SHARE, _share_payload(entity)
    elif isinstance(entity, PedersenCommitment):
        role, payload = Role.PSEUDONYM, _pseudonym_payload(ctx, entity)
    else:
        raise TypeError(f"Cannot encode {type(entity).__name__}")
    return KeyStoreEntry(role, ctx.tag, payload).to_bytes()


def decode(data: bytes, params: Optional[GlobalParams] = None):
    '''Decodes an entry. Every role except global parameters needs the params it was written under.'''
    entry = KeyStoreEntry.from_bytes(data)
    with Stream.from_byte_array(entry.payload) as stream:
        if entry.role == Role.GLOBAL_PARAMS:
            if entry.backend is None:
                raise BackendMismatch(f"Unknown backend tag 0x{entry.backend_tag:02x}")
            if params is not None:
                _expect_backend(entry, params.ctx)
            entity = _read_params(stream, entry.backend)
        else:
            if params is None:
                raise ValueError(f"Decoding a {entry.role.name.lower()} entry needs the global parameters")
            ctx = params.ctx
            _expect_backend(entry, ctx)
            readers = {
                Role.AUTHORITY_PK: _read_pk,
                Role.AUTHORITY_SK: _read_sk,
                Role.USER_SHARE: _read_share,
                Role.PSEUDONYM: _read_pseudonym,
            }
            entity = readers[entry.role](stream, ctx)
        _finish(stream)
    return entity


def decode_as(data: bytes, role: Role, params: Optional[GlobalParams] = None):
    _expect_role(KeyStoreEntry.from_bytes(data), role)
    return decode(data, params)


def save_entity(path, params: GlobalParams, entity):
    with open(path, "wb") as handle:
        handle.write(encode(params, entity))


def load_entity(path, role: Role, params: Optional[GlobalParams] = None):
    with open(path, "rb") as handle:
        return decode_as(handle.read(), role, params)


def inspect_entry(data: bytes) -> Dict[str, object]:
    '''Header fields of an entry, for display.'''
    entry = KeyStoreEntry.from_bytes(data)
    backend = entry.backend
    return {
        "magic": MAGIC.decode("ascii"),
        "version": entry.version,
        "backend": backend.value if backend else f"0x{entry.backend_tag:02x}",
        "role": entry.role.name.lower().replace("_", "-"),
        "payload_bytes": len(entry.payload),
        "checksum": data[-CHECKSUM_SIZE:].hex(),
    }


# ciphertexts: the part of the lowest authority id is rederived as C3 / prod(others)

def encode_ciphertext(ciphertext: Ciphertext) -> bytes:
    authorities = ciphertext.authorities
    out = bytearray(len(authorities).to_bytes(2, "big"))
    for k in authorities:
        labels = sorted(ciphertext.attributes[k])
        out += k.to_bytes(4, "big") + len(labels).to_bytes(4, "big")
        for attribute in labels:
            out += attribute.index.to_bytes(4, "big")
    out += ciphertext.c1.to_bytes() + ciphertext.c2.to_bytes() + ciphertext.c3.to_bytes()
    for k in authorities[1:]:
        out += ciphertext.c3_parts[k].to_bytes()
    for k in authorities:
        for attribute in sorted(ciphertext.attributes[k]):
            out += ciphertext.components[attribute].to_bytes()
    return bytes(out)


def read_ciphertext(stream: Stream, params: GlobalParams) -> Ciphertext:
    ctx = params.ctx
    count = stream.read_uint_16()
    if count == 0:
        raise FormatError("Ciphertext names no authority")
    attributes = {}
    for _ in range(count):
        k = stream.read_uint_32()
        try:
            labels = frozenset(AttributeId(k, stream.read_uint_32()) for _ in range(stream.read_uint_32()))
        except ValueError as error:
            raise FormatError(str(error)) from None
        if k in attributes or not labels:
            raise FormatError(f"Invalid attribute set for authority {k}")
        attributes[k] = labels
    authorities = sorted(attributes)
    if authorities != list(attributes):
        raise FormatError("Ciphertext authorities are not sorted")
    c1 = read_target(ctx, stream)
    c2 = read_source(ctx, stream)
    c3 = read_source(ctx, stream)
    c3_parts = {k: read_source(ctx, stream) for k in authorities[1:]}
    first = c3
    for part in c3_parts.values():
        first = first / part
    c3_parts = {authorities[0]: first, **c3_parts}
    components = {attribute: read_source(ctx, stream)
                  for k in authorities for attribute in sorted(attributes[k])}
    return Ciphertext(attributes, c1, c2, c3, c3_parts, components)


def decode_ciphertext(data: bytes, params: GlobalParams) -> Ciphertext:
    with Stream.from_byte_array(data) as stream:
        ciphertext = read_ciphertext(stream, params)
        _finish(stream)
    return ciphertext


# sigma proofs: statement digest | commitments | challenge | responses in witness order

def encode_proof(protocol: SigmaProtocol, proof: SigmaProof) -> bytes:
    ctx = protocol.ctx
    out = bytearray(prefixed(protocol.statement_digest()))
    out += len(proof.commitments).to_bytes(2, "big")
    for commitment in proof.commitments:
        out += commitment.to_bytes()
    out += ctx.scalar_to_bytes(proof.challenge) + len(protocol.witness_names).to_bytes(2, "big")
    for name in protocol.witness_names:
        out += ctx.scalar_to_bytes(proof.responses[name])
    return prefixed(bytes(out))


def read_proof(stream: Stream, protocol: SigmaProtocol) -> SigmaProof:
    ctx = protocol.ctx
    with Stream.from_byte_array(stream.read_prefixed()) as inner:
        if inner.read_prefixed() != protocol.statement_digest():
            raise MalformedProof("Proof was made for another statement")
        commitments = tuple(ctx.read_element(inner) for _ in range(inner.read_uint_16()))
        challenge = ctx.read_scalar(inner)
        if inner.read_uint_16() != len(protocol.witness_names):
            raise MalformedProof("Proof carries the wrong number of responses")
        responses = {name: ctx.read_scalar(inner) for name in protocol.witness_names}
        _finish(inner)
    return SigmaProof(commitments, challenge, responses)
