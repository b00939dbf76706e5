'''hybrid.py: Contains the hybrid file format: a KP-ABE ciphertext encapsulating a random target element,
and the payload under AES-GCM with a key derived from that element.

Layout:
    magic "DKHY" | version u8 | backend tag u8 | label (u32-prefixed) | kpabe ciphertext (u32-prefixed)
    | key check value (16 bytes) | chunks
Each chunk is a u32 length followed by AES-GCM output. The nonce is the chunk counter (8 bytes) and a
final-chunk flag (4 bytes); the associated data is the whole header.
'''

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from io import BytesIO
from typing import BinaryIO, Mapping

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AuthenticationFailed, BackendMismatch, BadMagic, BadVersion, DecryptionMismatch, FormatError
from .encoding import decode_ciphertext, encode_ciphertext
from .groups import TargetElement, default_rng
from .kpabe import Ciphertext, GlobalParams, decrypt, encrypt, random_message
from .stream import Stream, prefixed

logger = logging.getLogger(__name__)

HYBRID_MAGIC = b"DKHY"
HYBRID_VERSION = 1
CHUNK_SIZE = 64 * 1024
KEY_CHECK_SIZE = 16
_KEY_SIZE = 32
_TAG_SIZE = 16
_KDF_INFO = b"dkpabe/hybrid/v1"


@dataclass(frozen=True)
class HybridHeader:
    '''The part of a hybrid file in front of the payload chunks.'''
    backend_tag: int
    label: bytes
    ciphertext: bytes
    key_check: bytes

    def prefix(self) -> bytes:
        return (HYBRID_MAGIC + bytes([HYBRID_VERSION, self.backend_tag])
                + prefixed(self.label) + prefixed(self.ciphertext))

    def to_bytes(self) -> bytes:
        return self.prefix() + self.key_check


def derive_keys(element: TargetElement, prefix: bytes):
    '''HKDF-SHA256 over the encoded element; info binds the label and the header.'''
    okm = HKDF(algorithm=hashes.SHA256(), length=_KEY_SIZE + KEY_CHECK_SIZE, salt=None,
               info=_KDF_INFO + prefix).derive(element.to_bytes())
    return okm[:_KEY_SIZE], okm[_KEY_SIZE:]


def _nonce(counter: int, final: bool) -> bytes:
    return counter.to_bytes(8, "big") + (1 if final else 0).to_bytes(4, "big")


def encrypt_stream(params: GlobalParams, pks, attr_sets: Mapping, reader: BinaryIO, writer: BinaryIO,
                   rng=None, label: bytes = b"") -> Ciphertext:
    '''Encrypts everything readable from reader into writer.'''
    rng = rng or default_rng()
    element = random_message(params, rng)
    ciphertext = encrypt(params, pks, attr_sets, element, rng)
    header = HybridHeader(params.ctx.tag, label, encode_ciphertext(ciphertext), b"")
    key, key_check = derive_keys(element, header.prefix())
    header_bytes = header.prefix() + key_check
    writer.write(header_bytes)

    aead = AESGCM(key)
    counter = 0
    chunk = reader.read(CHUNK_SIZE)
    while True:
        following = reader.read(CHUNK_SIZE) if len(chunk) == CHUNK_SIZE else b""
        final = not following
        sealed = aead.encrypt(_nonce(counter, final), chunk, header_bytes)
        writer.write(len(sealed).to_bytes(4, "big") + sealed)
        if final:
            break
        chunk = following
        counter += 1
    logger.debug("Hybrid encryption wrote %d chunks for %d authorities", counter + 1, len(ciphertext.attributes))
    return ciphertext


def read_header(stream: Stream, params: GlobalParams) -> HybridHeader:
    magic = stream.read_bytes(len(HYBRID_MAGIC))
    if magic != HYBRID_MAGIC:
        raise BadMagic(f"Not a hybrid ciphertext (magic {magic!r})")
    version = stream.read_byte()
    if version != HYBRID_VERSION:
        raise BadVersion(f"Unsupported hybrid version {version}")
    backend_tag = stream.read_byte()
    if backend_tag != params.ctx.tag:
        raise BackendMismatch(f"Hybrid file was written for backend tag 0x{backend_tag:02x}")
    label = stream.read_prefixed()
    ciphertext = stream.read_prefixed()
    return HybridHeader(backend_tag, label, ciphertext, stream.read_bytes(KEY_CHECK_SIZE))


def decrypt_stream(params: GlobalParams, shares, stream: Stream, writer: BinaryIO) -> int:
    '''
    Decrypts a hybrid file into writer and returns the plaintext length.

    The policy is checked by the KP-ABE decryption before any chunk is touched.
    '''
    header = read_header(stream, params)
    element = decrypt(params, shares, decode_ciphertext(header.ciphertext, params))
    key, key_check = derive_keys(element, header.prefix())
    if key_check != header.key_check:
        raise DecryptionMismatch("Decapsulated key does not match the key check value")

    aead = AESGCM(key)
    header_bytes = header.to_bytes()
    counter = written = 0
    while True:
        if stream.at_end():
            raise AuthenticationFailed("Hybrid payload is truncated")
        length = stream.read_uint_32()
        if length < _TAG_SIZE or length > CHUNK_SIZE + _TAG_SIZE:
            raise AuthenticationFailed(f"Chunk {counter} has an invalid length")
        sealed = stream.read_bytes(length)
        plaintext = None
        for final in (False, True):
            try:
                plaintext = aead.decrypt(_nonce(counter, final), sealed, header_bytes)
            except InvalidTag:
                continue
            break
        if plaintext is None:
            raise AuthenticationFailed(f"Chunk {counter} failed authentication")
        writer.write(plaintext)
        written += len(plaintext)
        if final:
            break
        counter += 1
    if not stream.at_end():
        raise AuthenticationFailed("Data after the final chunk")
    return written


def hybrid_encrypt(params: GlobalParams, pks, attr_sets: Mapping, payload: bytes, rng=None,
                   label: bytes = b"") -> bytes:
    out = BytesIO()
    encrypt_stream(params, pks, attr_sets, BytesIO(payload), out, rng, label)
    return out.getvalue()


def decrypt_file(params: GlobalParams, shares, path, writer: BinaryIO) -> int:
    '''decrypt_stream over a file; damage past the magic and version is an authentication failure.'''
    with _damage_is_authentication_failure(), Stream.from_file(path) as stream:
        return decrypt_stream(params, shares, stream, writer)


def hybrid_decrypt(params: GlobalParams, shares, data: bytes) -> bytes:
    '''Returns the payload only after every chunk has been authenticated.'''
    out = BytesIO()
    with _damage_is_authentication_failure(), Stream.from_byte_array(data) as stream:
        decrypt_stream(params, shares, stream, out)
    return out.getvalue()


@contextmanager
def _damage_is_authentication_failure():
    try:
        yield
    except FormatError as error:
        if isinstance(error, (BadMagic, BadVersion)):
            raise
        raise AuthenticationFailed(f"Hybrid file is damaged: {error}") from error
