'''groups.py: Contains the bilinear group abstraction used by every scheme module.

Two interchangeable backends are provided:
    1. CURVE: BLS12-381 through py_ecc (Type-3 pairing)
    2. TRANSPARENT: elements carry their discrete logs over a small prime. It is
       insecure by construction and only exists as a brute-force test oracle.

A SourceElement is a mirrored pair: one half in G1 and one in G2, sharing the
same discrete log relative to (g1, g2). pair(a, b) uses the G1 half of a and
the G2 half of b, which emulates the symmetric pairing of the scheme. Elements
derived from hashed generators (h, h1 on the curve) have no G1 half.
'''

import hashlib
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum

from .errors import BackendMismatch, FormatError, UnsupportedParameters

Scalar = int

DEFAULT_TRANSPARENT_ORDER = 2147483647  # 2^31 - 1

_KIND_SOURCE = 0x01
_KIND_TARGET = 0x02
_HAS_G1 = 0x01
_HAS_G2 = 0x02
_CURVE_DST = b"DKPABE-V01-CS01-with-BLS12381G2_XMD:SHA-256_SSWU_RO_"


class Backend(str, Enum):
    '''An enum class naming the pairing backends.'''
    CURVE = "curve"
    TRANSPARENT = "transparent"


BACKEND_TAGS = {
    Backend.CURVE: 0x01,
    Backend.TRANSPARENT: 0x02,
}
TAG_BACKENDS = {tag: backend for backend, tag in BACKEND_TAGS.items()}


def hash_to_scalar(data: bytes, order: int) -> Scalar:
    '''SHA-512 of data, reduced mod order (wide reduction keeps the bias negligible).'''
    return int.from_bytes(hashlib.sha512(bytes(data)).digest(), "big") % order


def default_rng():
    return secrets.SystemRandom()


def rand_scalar(rng, order: int) -> Scalar:
    return rng.randrange(0, order)


def rand_nonzero_scalar(rng, order: int) -> Scalar:
    '''Uniform over [1, order).'''
    return rng.randrange(1, order)


def inverse(value: Scalar, order: int) -> Scalar:
    value %= order
    if value == 0:
        raise ZeroDivisionError("Zero has no inverse mod the group order")
    return pow(value, -1, order)


def is_probable_prime(n: int) -> bool:
    '''Miller-Rabin over the first twelve prime bases; deterministic for n < 3.3 * 10^24.'''
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class OpCounts:
    '''Tallies of group multiplications, exponentiations and pairings.'''
    multiplications: int = 0
    exponentiations: int = 0
    pairings: int = 0

    def __sub__(self, other):
        return OpCounts(self.multiplications - other.multiplications,
                        self.exponentiations - other.exponentiations,
                        self.pairings - other.pairings)

    def __add__(self, other):
        return OpCounts(self.multiplications + other.multiplications,
                        self.exponentiations + other.exponentiations,
                        self.pairings + other.pairings)

    def as_tuple(self):
        return (self.multiplications, self.exponentiations, self.pairings)


class _TransparentBackend:
    '''Discrete-log oracle: every element is stored as its exponent mod p.'''
    kind = Backend.TRANSPARENT

    def __init__(self, order: int):
        if order < 5 or not is_probable_prime(order):
            raise UnsupportedParameters(f"Transparent backend needs a prime order >= 5, got {order}")
        self.order = order
        self.width = (order.bit_length() + 7) // 8

    def generator(self):
        return 1, 1

    def hash_to_halves(self, dst: bytes):
        counter = 0
        while True:
            value = hash_to_scalar(dst + counter.to_bytes(4, "big"), self.order)
            if value > 1:
                return value, value
            counter += 1

    def identity(self, half):
        return 0

    def mul(self, half, a, b):
        return (a + b) % self.order

    def exp(self, half, a, k):
        return (a * k) % self.order

    def inv(self, half, a):
        return (-a) % self.order

    def eq(self, half, a, b):
        return a == b

    def pair(self, a1, b2):
        return (a1 * b2) % self.order

    def gt_identity(self):
        return 0

    def gt_mul(self, a, b):
        return (a + b) % self.order

    def gt_exp(self, a, k):
        return (a * k) % self.order

    def gt_inv(self, a):
        return (-a) % self.order

    def gt_eq(self, a, b):
        return a == b

    def half_size(self, half):
        return self.width

    def gt_size(self):
        return self.width

    def encode_half(self, half, a):
        return a.to_bytes(self.width, "big")

    def decode_half(self, half, data):
        value = int.from_bytes(data, "big")
        if value >= self.order:
            raise FormatError("Transparent element out of range")
        return value

    def encode_gt(self, a):
        return a.to_bytes(self.width, "big")

    def decode_gt(self, data):
        return self.decode_half(2, data)


class _CurveBackend:
    '''BLS12-381 through py_ecc.optimized_bls12_381.'''
    kind = Backend.CURVE

    def __init__(self):
        from py_ecc import optimized_bls12_381 as bls
        from py_ecc.bls import point_compression
        from py_ecc.bls.hash_to_curve import hash_to_G2

        self._bls = bls
        self._compression = point_compression
        self._hash_to_G2 = hash_to_G2
        self.order = bls.curve_order
        self.width = 32

    def generator(self):
        return self._bls.G1, self._bls.G2

    def hash_to_halves(self, dst: bytes):
        point = self._hash_to_G2(dst, _CURVE_DST, hashlib.sha256)
        return None, point

    def identity(self, half):
        return self._bls.Z1 if half == 1 else self._bls.Z2

    def mul(self, half, a, b):
        return self._bls.add(a, b)

    def exp(self, half, a, k):
        return self._bls.multiply(a, k % self.order)

    def inv(self, half, a):
        return self._bls.neg(a)

    def eq(self, half, a, b):
        return self._bls.eq(a, b)

    def pair(self, a1, b2):
        return self._bls.pairing(b2, a1)

    def gt_identity(self):
        return self._bls.FQ12.one()

    def gt_mul(self, a, b):
        return a * b

    def gt_exp(self, a, k):
        return a ** (k % self.order)

    def gt_inv(self, a):
        return a.inv()

    def gt_eq(self, a, b):
        return self.encode_gt(a) == self.encode_gt(b)

    def half_size(self, half):
        return 48 if half == 1 else 96

    def gt_size(self):
        return 12 * 48

    def encode_half(self, half, a):
        if half == 1:
            return self._compression.compress_G1(a).to_bytes(48, "big")
        z1, z2 = self._compression.compress_G2(a)
        return z1.to_bytes(48, "big") + z2.to_bytes(48, "big")

    def decode_half(self, half, data):
        try:
            if half == 1:
                point = self._compression.decompress_G1(int.from_bytes(data, "big"))
            else:
                point = self._compression.decompress_G2((int.from_bytes(data[:48], "big"),
                                                         int.from_bytes(data[48:], "big")))
        except (ValueError, AssertionError, ArithmeticError, TypeError) as error:
            raise FormatError(f"Invalid curve point: {error}") from error
        if not self._bls.is_inf(self._bls.multiply(point, self.order)):
            raise FormatError("Curve point is outside the prime order subgroup")
        return point

    def encode_gt(self, a):
        modulus = self._bls.field_modulus
        coeffs = [int(c.n if hasattr(c, "n") else c) % modulus for c in a.coeffs]
        return b"".join(c.to_bytes(48, "big") for c in coeffs)

    def decode_gt(self, data):
        coeffs = [int.from_bytes(data[i:i + 48], "big") for i in range(0, 12 * 48, 48)]
        if any(c >= self._bls.field_modulus for c in coeffs):
            raise FormatError("Invalid target element")
        return self._bls.FQ12(coeffs)


class SourceElement:
    '''
    An element of the source group, stored as a mirrored pair.

    Attributes:
        ctx: The GroupContext the element was created under.
        g1:  The G1 half, or None when it is unknown.
        g2:  The G2 half, or None when it is unknown.
    '''
    __slots__ = ("ctx", "g1", "g2")

    def __init__(self, ctx, g1, g2):
        self.ctx = ctx
        self.g1 = g1
        self.g2 = g2

    def __mul__(self, other):
        return self.ctx.mul(self, other)

    def __truediv__(self, other):
        return self.ctx.div(self, other)

    def __pow__(self, k):
        return self.ctx.exp(self, k)

    def __eq__(self, other):
        if not isinstance(other, SourceElement) or not self.ctx.compatible(other.ctx):
            return False
        backend = self.ctx.backend
        for half, mine, theirs in ((1, self.g1, other.g1), (2, self.g2, other.g2)):
            if (mine is None) != (theirs is None):
                return False
            if mine is not None and not backend.eq(half, mine, theirs):
                return False
        return True

    def __hash__(self):
        return hash(self.to_bytes())

    def __repr__(self):
        return f"SourceElement({self.ctx.backend.kind.value}, {self.to_bytes().hex()[:16]}...)"

    def to_bytes(self) -> bytes:
        return self.ctx.encode_element(self)

    def is_identity(self) -> bool:
        return self == self.ctx.source_identity(like=self)


class TargetElement:
    '''An element of the pairing target group.'''
    __slots__ = ("ctx", "value")

    def __init__(self, ctx, value):
        self.ctx = ctx
        self.value = value

    def __mul__(self, other):
        return self.ctx.mul(self, other)

    def __truediv__(self, other):
        return self.ctx.div(self, other)

    def __pow__(self, k):
        return self.ctx.exp(self, k)

    def __eq__(self, other):
        if not isinstance(other, TargetElement) or not self.ctx.compatible(other.ctx):
            return False
        return self.ctx.backend.gt_eq(self.value, other.value)

    def __hash__(self):
        return hash(self.to_bytes())

    def __repr__(self):
        return f"TargetElement({self.ctx.backend.kind.value}, {self.to_bytes().hex()[:16]}...)"

    def to_bytes(self) -> bytes:
        return self.ctx.encode_element(self)

    def is_identity(self) -> bool:
        return self == self.ctx.target_identity()


class _Tally:
    def __init__(self):
        self.counts = OpCounts()


class GroupContext:
    '''
    A class that owns one backend instance and the operation counters.

    Attributes:
        backend: The backend arithmetic object.
        order:   The prime group order p.
        tag:     The backend tag byte used in every encoding.
    '''

    def __init__(self, backend):
        self.backend = backend
        self.order = backend.order
        self.kind = backend.kind
        self.tag = BACKEND_TAGS[backend.kind]
        self.scalar_width = (self.order.bit_length() + 7) // 8
        self._lock = threading.Lock()
        self._multiplications = 0
        self._exponentiations = 0
        self._pairings = 0

    @staticmethod
    def create(backend=Backend.CURVE, order=None):
        '''Creates a context for the named backend.'''
        backend = Backend(backend)
        if backend == Backend.CURVE:
            if order is not None:
                raise UnsupportedParameters("The curve backend has a fixed group order")
            return GroupContext(_CurveBackend())
        return GroupContext(_TransparentBackend(order or DEFAULT_TRANSPARENT_ORDER))

    def compatible(self, other) -> bool:
        return self is other or (self.kind == other.kind and self.order == other.order)

    def _check(self, a, b):
        if type(a) is not type(b):
            raise BackendMismatch(f"Cannot combine {type(a).__name__} with {type(b).__name__}")
        if not self.compatible(b.ctx):
            raise BackendMismatch(f"Elements belong to different backends ({self.kind.value} and {b.ctx.kind.value})")

    # counters

    def counters_snapshot(self) -> OpCounts:
        with self._lock:
            return OpCounts(self._multiplications, self._exponentiations, self._pairings)

    def reset_counters(self):
        with self._lock:
            self._multiplications = 0
            self._exponentiations = 0
            self._pairings = 0

    @contextmanager
    def counting(self):
        '''Yields a tally whose counts hold the operations done inside the block.'''
        tally = _Tally()
        start = self.counters_snapshot()
        try:
            yield tally
        finally:
            tally.counts = self.counters_snapshot() - start

    def _count(self, multiplications=0, exponentiations=0, pairings=0):
        with self._lock:
            self._multiplications += multiplications
            self._exponentiations += exponentiations
            self._pairings += pairings

    # element constructors

    def generator(self) -> SourceElement:
        g1, g2 = self.backend.generator()
        return SourceElement(self, g1, g2)

    def hash_to_source(self, dst: bytes) -> SourceElement:
        g1, g2 = self.backend.hash_to_halves(dst)
        return SourceElement(self, g1, g2)

    def source_identity(self, like=None) -> SourceElement:
        g1 = None if like is not None and like.g1 is None else self.backend.identity(1)
        g2 = None if like is not None and like.g2 is None else self.backend.identity(2)
        return SourceElement(self, g1, g2)

    def target_identity(self) -> TargetElement:
        return TargetElement(self, self.backend.gt_identity())

    # arithmetic

    def mul(self, a, b):
        self._check(a, b)
        self._count(multiplications=1)
        return self._raw_mul(a, b)

    def _raw_mul(self, a, b):
        backend = self.backend
        if isinstance(a, TargetElement):
            return TargetElement(self, backend.gt_mul(a.value, b.value))
        g1 = None if a.g1 is None or b.g1 is None else backend.mul(1, a.g1, b.g1)
        g2 = None if a.g2 is None or b.g2 is None else backend.mul(2, a.g2, b.g2)
        return SourceElement(self, g1, g2)

    def div(self, a, b):
        '''a / b, counted as one multiplication.'''
        self._check(a, b)
        self._count(multiplications=1)
        return self._raw_mul(a, self._raw_inv(b))

    def _raw_inv(self, a):
        backend = self.backend
        if isinstance(a, TargetElement):
            return TargetElement(self, backend.gt_inv(a.value))
        return SourceElement(self,
                             None if a.g1 is None else backend.inv(1, a.g1),
                             None if a.g2 is None else backend.inv(2, a.g2))

    def exp(self, base, k: Scalar):
        self._count(exponentiations=1)
        return self._raw_exp(base, k)

    def _raw_exp(self, base, k):
        backend = self.backend
        k %= self.order
        if isinstance(base, TargetElement):
            return TargetElement(self, backend.gt_exp(base.value, k))
        return SourceElement(self,
                             None if base.g1 is None else backend.exp(1, base.g1, k),
                             None if base.g2 is None else backend.exp(2, base.g2, k))

    def pair(self, a: SourceElement, b: SourceElement) -> TargetElement:
        '''e(a, b) from the G1 half of a and the G2 half of b.'''
        self._check(a, b)
        if not isinstance(a, SourceElement):
            raise BackendMismatch("Only source elements can be paired")
        if a.g1 is None or b.g2 is None:
            raise BackendMismatch("Pairing needs the G1 half of the left and the G2 half of the right operand")
        self._count(pairings=1)
        return TargetElement(self, self.backend.pair(a.g1, b.g2))

    # scalars

    def hash_to_scalar(self, data: bytes) -> Scalar:
        return hash_to_scalar(data, self.order)

    def random_scalar(self, rng=None) -> Scalar:
        return rand_scalar(rng or default_rng(), self.order)

    def random_nonzero_scalar(self, rng=None) -> Scalar:
        return rand_nonzero_scalar(rng or default_rng(), self.order)

    def inverse(self, value: Scalar) -> Scalar:
        return inverse(value, self.order)

    # oracle helpers

    def dlog(self, element):
        '''Discrete log of element relative to g (transparent backend only).'''
        if self.kind != Backend.TRANSPARENT:
            raise UnsupportedParameters("Discrete logs are only available on the transparent backend")
        if isinstance(element, TargetElement):
            return element.value
        return element.g1 if element.g1 is not None else element.g2

    def is_consistent(self, element: SourceElement) -> bool:
        '''True when both halves share one discrete log (or one half is absent).'''
        if element.g1 is None or element.g2 is None:
            return True
        if self.kind == Backend.TRANSPARENT:
            return element.g1 == element.g2
        g1, g2 = self.backend.generator()
        return self.backend.gt_eq(self.backend.pair(element.g1, g2), self.backend.pair(g1, element.g2))

    # encoding

    def scalar_to_bytes(self, value: Scalar) -> bytes:
        return (value % self.order).to_bytes(self.scalar_width, "big")

    def read_scalar(self, stream) -> Scalar:
        value = int.from_bytes(stream.read_bytes(self.scalar_width), "big")
        if value >= self.order:
            raise FormatError("Scalar out of range")
        return value

    def encode_element(self, element) -> bytes:
        backend = self.backend
        if isinstance(element, TargetElement):
            return bytes([self.tag, _KIND_TARGET]) + backend.encode_gt(element.value)
        flags = (_HAS_G1 if element.g1 is not None else 0) | (_HAS_G2 if element.g2 is not None else 0)
        out = bytearray([self.tag, _KIND_SOURCE, flags])
        if element.g1 is not None:
            out += backend.encode_half(1, element.g1)
        if element.g2 is not None:
            out += backend.encode_half(2, element.g2)
        return bytes(out)

    def read_element(self, stream):
        '''Reads one tagged element from a Stream.'''
        tag = stream.read_byte()
        if tag != self.tag:
            raise BackendMismatch(f"Element tagged for backend 0x{tag:02x}, context is {self.kind.value}")
        kind = stream.read_byte()
        backend = self.backend
        if kind == _KIND_TARGET:
            return TargetElement(self, backend.decode_gt(stream.read_bytes(backend.gt_size())))
        if kind != _KIND_SOURCE:
            raise FormatError(f"Unknown element kind 0x{kind:02x}")
        flags = stream.read_byte()
        if flags & ~(_HAS_G1 | _HAS_G2):
            raise FormatError(f"Unknown element flags 0x{flags:02x}")
        g1 = backend.decode_half(1, stream.read_bytes(backend.half_size(1))) if flags & _HAS_G1 else None
        g2 = backend.decode_half(2, stream.read_bytes(backend.half_size(2))) if flags & _HAS_G2 else None
        return SourceElement(self, g1, g2)

    def element_from_bytes(self, data: bytes):
        from .stream import Stream

        stream = Stream.from_byte_array(data)
        element = self.read_element(stream)
        if stream.position() != stream.get_length():
            raise FormatError("Trailing bytes after element")
        return element


def pair(a: SourceElement, b: SourceElement) -> TargetElement:
    return a.ctx.pair(a, b)


def exp(base, k: Scalar):
    return base.ctx.exp(base, k)


def counters_snapshot(ctx: GroupContext) -> OpCounts:
    return ctx.counters_snapshot()


def reset_counters(ctx: GroupContext):
    ctx.reset_counters()
