'''wire.py: Contains the WireFrame format and the codecs of the issuing protocol messages.

Frame layout: length u32 (covers type, session id and payload) | type u8 | session id (16 bytes) | payload
'''

from dataclasses import dataclass
from enum import IntEnum

from . import errors
from .encoding import encode_attribute, read_attribute, encode_proof, encode_tree, read_proof, read_source, read_tree
from .errors import DkpabeError, FormatError, FrameTooLarge, ProtocolAbort
from .issuing import SESSION_ID_SIZE, BlindedKeys, BlindSumReply, IssueComplete, IssueRequest
from .kpabe import AuthorityPublicKey, GlobalParams
from .stream import Stream, prefixed, prefixed_big_int, prefixed_string
from .twopc import BlindSumRequest
from .zkp import AuthorityPokStatement, UserPokStatement

DEFAULT_MAX_FRAME = 1 << 20
_FRAME_OVERHEAD = 1 + SESSION_ID_SIZE


class FrameType(IntEnum):
    ISSUE_REQUEST = 0x01
    BLIND_SUM_REPLY = 0x02
    ISSUE_COMPLETE = 0x03
    BLINDED_KEYS = 0x04
    ERROR = 0x7F


@dataclass(frozen=True)
class WireFrame:
    type: FrameType
    session_id: bytes
    payload: bytes = b""

    def to_bytes(self) -> bytes:
        if len(self.session_id) != SESSION_ID_SIZE:
            raise ValueError(f"Session ids are {SESSION_ID_SIZE} bytes")
        length = _FRAME_OVERHEAD + len(self.payload)
        return length.to_bytes(4, "big") + bytes([int(self.type)]) + self.session_id + self.payload


def read_frame(stream: Stream, max_size: int = DEFAULT_MAX_FRAME) -> WireFrame:
    length = stream.read_uint_32()
    if length > max_size:
        raise FrameTooLarge(f"Frame of {length} bytes exceeds the {max_size}-byte limit")
    if length < _FRAME_OVERHEAD:
        raise FormatError(f"Frame of {length} bytes is shorter than its header")
    type_byte = stream.read_byte()
    try:
        frame_type = FrameType(type_byte)
    except ValueError:
        raise FormatError(f"Unknown frame type 0x{type_byte:02x}") from None
    session_id = stream.read_bytes(SESSION_ID_SIZE)
    return WireFrame(frame_type, session_id, stream.read_bytes(length - _FRAME_OVERHEAD))


def decode_frame(data: bytes, max_size: int = DEFAULT_MAX_FRAME) -> WireFrame:
    '''Decodes exactly one frame; trailing bytes are a violation.'''
    with Stream.from_byte_array(data) as stream:
        frame = read_frame(stream, max_size)
        if not stream.at_end():
            raise FormatError("Trailing bytes after frame")
    return frame


def _expect(frame: WireFrame, frame_type: FrameType):
    if frame.type == FrameType.ERROR:
        raise error_from_frame(frame)
    if frame.type != frame_type:
        raise ProtocolAbort(f"Expected a {frame_type.name} frame, received {frame.type.name}")


def _payload(frame: WireFrame):
    return Stream.from_byte_array(frame.payload)


def _done(stream: Stream):
    if not stream.at_end():
        raise FormatError("Trailing bytes in message payload")


# error frames carry the error class name and its message

def error_frame(session_id: bytes, error: DkpabeError) -> WireFrame:
    return WireFrame(FrameType.ERROR, session_id,
                     prefixed_string(type(error).__name__) + prefixed_string(str(error)))


def error_from_frame(frame: WireFrame) -> DkpabeError:
    with _payload(frame) as stream:
        name = stream.read_string()
        message = stream.read_string()
    error_type = getattr(errors, name, None)
    if isinstance(error_type, type) and issubclass(error_type, ProtocolAbort) \
            and error_type.__init__ is ProtocolAbort.__init__:
        return error_type(message)
    return ProtocolAbort(f"{name}: {message}")


# IssueRequest

def encode_issue_request(params: GlobalParams, message: IssueRequest) -> WireFrame:
    statement = message.statement
    out = bytearray(message.authority_id.to_bytes(4, "big"))
    for element in (statement.psi1, statement.psi2, statement.psi3, statement.psi4):
        out += element.to_bytes()
    out += bytes([0 if statement.com is None else 1])
    if statement.com is not None:
        out += statement.com.to_bytes()
    out += prefixed_big_int(message.paillier_n)
    for request in (message.request_x, message.request_y):
        out += prefixed_big_int(request.enc_product) + prefixed_big_int(request.enc_rho)
    out += encode_proof(statement.protocol(params), message.proof)
    return WireFrame(FrameType.ISSUE_REQUEST, message.session_id, bytes(out))


def decode_issue_request(params: GlobalParams, frame: WireFrame) -> IssueRequest:
    _expect(frame, FrameType.ISSUE_REQUEST)
    ctx = params.ctx
    with _payload(frame) as stream:
        authority_id = stream.read_uint_32()
        psi1, psi2, psi3, psi4 = (read_source(ctx, stream) for _ in range(4))
        flag = stream.read_byte()
        if flag not in (0, 1):
            raise FormatError("Invalid pseudonym flag")
        com = read_source(ctx, stream) if flag else None
        statement = UserPokStatement(psi1, psi2, psi3, psi4, com)
        paillier_n = stream.read_big_int()
        request_x = BlindSumRequest(stream.read_big_int(), stream.read_big_int())
        request_y = BlindSumRequest(stream.read_big_int(), stream.read_big_int())
        proof = read_proof(stream, statement.protocol(params))
        _done(stream)
    return IssueRequest(frame.session_id, authority_id, statement, proof, paillier_n, request_x, request_y)


# BlindSumReply

def encode_blind_sum_reply(message: BlindSumReply) -> WireFrame:
    return WireFrame(FrameType.BLIND_SUM_REPLY, message.session_id,
                     prefixed_big_int(message.reply_x) + prefixed_big_int(message.reply_y))


def decode_blind_sum_reply(frame: WireFrame) -> BlindSumReply:
    _expect(frame, FrameType.BLIND_SUM_REPLY)
    with _payload(frame) as stream:
        reply = BlindSumReply(frame.session_id, stream.read_big_int(), stream.read_big_int())
        _done(stream)
    return reply


# IssueComplete

def encode_issue_complete(params: GlobalParams, message: IssueComplete) -> WireFrame:
    ctx = params.ctx
    payload = (ctx.scalar_to_bytes(message.z_x) + ctx.scalar_to_bytes(message.z_y)
               + message.P.to_bytes() + message.Q.to_bytes() + message.R.to_bytes())
    return WireFrame(FrameType.ISSUE_COMPLETE, message.session_id, payload)


def decode_issue_complete(params: GlobalParams, frame: WireFrame) -> IssueComplete:
    _expect(frame, FrameType.ISSUE_COMPLETE)
    ctx = params.ctx
    with _payload(frame) as stream:
        z_x = ctx.read_scalar(stream)
        z_y = ctx.read_scalar(stream)
        P, Q, R = (read_source(ctx, stream) for _ in range(3))
        _done(stream)
    return IssueComplete(frame.session_id, z_x, z_y, P, Q, R)


# BlindedKeys

def encode_blinded_keys(params: GlobalParams, pk: AuthorityPublicKey, bases, message: BlindedKeys) -> WireFrame:
    P, Q, R = bases
    out = bytearray(message.authority_id.to_bytes(4, "big") + prefixed(encode_tree(message.tree)))
    out += message.D.to_bytes() + message.D1.to_bytes() + len(message.Dj).to_bytes(4, "big")
    for attribute in sorted(message.Dj):
        out += encode_attribute(attribute) + message.Dj[attribute].to_bytes()
    statement = AuthorityPokStatement(pk.Y, P, Q, R, message.D, message.D1, message.Dj)
    out += encode_proof(statement.protocol(params), message.proof)
    return WireFrame(FrameType.BLINDED_KEYS, message.session_id, bytes(out))


def decode_blinded_keys(params: GlobalParams, pk: AuthorityPublicKey, bases, frame: WireFrame) -> BlindedKeys:
    '''bases are the (P, Q, R) the user sent; the proof is parsed against them.'''
    _expect(frame, FrameType.BLINDED_KEYS)
    ctx = params.ctx
    P, Q, R = bases
    with _payload(frame) as stream:
        authority_id = stream.read_uint_32()
        with Stream.from_byte_array(stream.read_prefixed()) as tree_stream:
            tree = read_tree(tree_stream)
            _done(tree_stream)
        D = read_source(ctx, stream)
        D1 = read_source(ctx, stream)
        Dj = {}
        for _ in range(stream.read_uint_32()):
            attribute = read_attribute(stream)
            Dj[attribute] = read_source(ctx, stream)
        statement = AuthorityPokStatement(pk.Y, P, Q, R, D, D1, Dj)
        proof = read_proof(stream, statement.protocol(params))
        _done(stream)
    return BlindedKeys(frame.session_id, authority_id, tree, D, D1, Dj, proof)
