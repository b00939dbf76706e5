'''twopc.py: Contains the blind-sum two-party computation: the user holds (u, rho), the authority holds v
and learns only x = (v + u) * rho mod p.

The homomorphic backend runs over the user's Paillier key:
    1. user -> authority: Enc(u*rho), Enc(rho)
    2. authority -> user: Enc(u*rho) + Enc(rho)*v + t for a fresh statistical mask t
    3. user -> authority: z = (u*rho + v*rho + t) mod p
The authority outputs x = z - t mod p.
'''

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from phe import paillier

from .errors import ProtocolAbort
from .groups import default_rng

logger = logging.getLogger(__name__)

MASK_BITS = 128
DEFAULT_MODULUS_BITS = 2048
MAX_MODULUS_BITS = 4096


class BlindSumBackend(str, Enum):
    HOMOMORPHIC = "homomorphic"
    TRUSTED = "trusted-test"


def required_modulus_bits(order: int) -> int:
    '''Smallest Paillier modulus that holds u*rho + v*rho + t below n/3 without wraparound.'''
    return 2 * order.bit_length() + MASK_BITS + 4


def max_modulus_bits(order: int) -> int:
    '''Largest Paillier modulus an authority accepts.'''
    return max(MAX_MODULUS_BITS, required_modulus_bits(order))


def generate_keypair(order: int, n_length: Optional[int] = None):
    '''A Paillier keypair large enough for the given group order.'''
    n_length = n_length or max(DEFAULT_MODULUS_BITS, required_modulus_bits(order))
    if n_length < required_modulus_bits(order):
        raise ValueError(f"A {n_length}-bit modulus is too small for a {order.bit_length()}-bit group order")
    if n_length > max_modulus_bits(order):
        raise ValueError(f"A {n_length}-bit modulus is above the {max_modulus_bits(order)}-bit limit")
    return paillier.generate_paillier_keypair(n_length=n_length)


@dataclass(frozen=True)
class BlindSumRequest:
    '''Enc(u*rho) and Enc(rho) as raw ciphertext integers.'''
    enc_product: int
    enc_rho: int


class UserBlindSum:
    '''
    The user side of one blind sum.

    Attributes:
        order:   The group order p.
        backend: HOMOMORPHIC, or TRUSTED for in-the-clear test runs.
    '''

    def __init__(self, order: int, u: int, rho: int, public_key=None, private_key=None, rng=None,
                 backend: BlindSumBackend = BlindSumBackend.HOMOMORPHIC):
        if rho % order == 0:
            raise ValueError("rho must be nonzero")
        self.order = order
        self.backend = BlindSumBackend(backend)
        if self.backend == BlindSumBackend.HOMOMORPHIC and (public_key is None or private_key is None):
            raise ValueError("The homomorphic backend needs the user's Paillier keypair")
        self._u = u % order
        self._rho = rho % order
        self._public_key = public_key
        self._private_key = private_key
        self._rng = rng or default_rng()
        self._sent = False

    def request(self) -> BlindSumRequest:
        self._sent = True
        product = self._u * self._rho % self.order
        if self.backend == BlindSumBackend.TRUSTED:
            return BlindSumRequest(product, self._rho)
        return BlindSumRequest(self._encrypt(product), self._encrypt(self._rho))

    def _encrypt(self, value: int) -> int:
        r_value = self._rng.randrange(1, self._public_key.n)
        return self._public_key.encrypt(value, r_value=r_value).ciphertext(be_secure=False)

    def finish(self, reply: int) -> int:
        '''Decrypts the authority's reply and returns z for the authority.'''
        if not self._sent:
            raise ProtocolAbort("Blind sum reply received before the request was sent")
        if self.backend == BlindSumBackend.TRUSTED:
            z = reply % self.order
        else:
            n_square = self._public_key.nsquare
            if not 0 < reply < n_square:
                raise ProtocolAbort("Blind sum reply is not a valid ciphertext")
            z = self._private_key.raw_decrypt(reply) % self.order
        self._u = self._rho = None
        return z


class AuthorityBlindSum:
    '''The authority side of one blind sum; v is the authority's secret input.'''

    def __init__(self, order: int, v: int, public_n: Optional[int] = None, rng=None,
                 backend: BlindSumBackend = BlindSumBackend.HOMOMORPHIC):
        self.order = order
        self.backend = BlindSumBackend(backend)
        self._v = v % order
        self._mask = None
        self._public_key = None
        if self.backend == BlindSumBackend.HOMOMORPHIC:
            if public_n is None or public_n.bit_length() < required_modulus_bits(order):
                bits = 0 if public_n is None else public_n.bit_length()
                raise ProtocolAbort(f"Paillier modulus of {bits} bits is too small, "
                                    f"{required_modulus_bits(order)} required")
            if public_n.bit_length() > max_modulus_bits(order):
                raise ProtocolAbort(f"Paillier modulus of {public_n.bit_length()} bits is too large, "
                                    f"at most {max_modulus_bits(order)} accepted")
            self._public_key = paillier.PaillierPublicKey(n=public_n)
        self._rng = rng or default_rng()

    def reply(self, request: BlindSumRequest) -> int:
        if self._mask is not None:
            raise ProtocolAbort("Blind sum request already answered")
        if self.backend == BlindSumBackend.TRUSTED:
            self._mask = 0
            return (request.enc_product + request.enc_rho * self._v) % self.order
        n_square = self._public_key.nsquare
        for value in (request.enc_product, request.enc_rho):
            if not 0 < value < n_square:
                raise ProtocolAbort("Blind sum request holds an invalid ciphertext")
        self._mask = self._rng.randrange(0, (2 * self.order * self.order) << MASK_BITS)
        enc_product = paillier.EncryptedNumber(self._public_key, request.enc_product)
        enc_rho = paillier.EncryptedNumber(self._public_key, request.enc_rho)
        masked = enc_product + enc_rho * self._v + self._mask
        return masked.ciphertext(be_secure=True)

    def output(self, z: int) -> int:
        '''x = (v + u) * rho mod p.'''
        if self._mask is None:
            raise ProtocolAbort("Blind sum completion received before the reply was sent")
        if not 0 <= z < self.order:
            raise ProtocolAbort("Blind sum completion out of range")
        x = (z - self._mask) % self.order
        self._mask = self._v = None
        return x


def blind_sum(u: int, rho: int, v: int, order: int, backend: BlindSumBackend = BlindSumBackend.HOMOMORPHIC,
              keypair: Optional[Tuple[object, object]] = None, rng=None) -> int:
    '''Runs the three messages in-process and returns the authority's output.'''
    backend = BlindSumBackend(backend)
    public_key = private_key = None
    if backend == BlindSumBackend.HOMOMORPHIC:
        public_key, private_key = keypair or generate_keypair(order)
    user = UserBlindSum(order, u, rho, public_key, private_key, rng, backend)
    authority = AuthorityBlindSum(order, v, None if public_key is None else public_key.n, rng, backend)
    return authority.output(user.finish(authority.reply(user.request())))
