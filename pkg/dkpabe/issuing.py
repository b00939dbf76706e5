'''issuing.py: Contains the anonymous key issuing protocol as a user and an authority session state machine.

Messages, in order:
    1. IssueRequest   user -> authority: pseudonym, Psi1..Psi4, user proof, blind-sum requests
    2. BlindSumReply  authority -> user: masked homomorphic sums for x and y
    3. IssueComplete  user -> authority: z_x, z_y and the blinded bases P, Q, R
    4. BlindedKeys    authority -> user: blinded key components and the authority proof
'''

import base64
import json
import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Mapping, Optional

from .access import AccessTree, AttributeId, format_policy, share_secret
from .errors import (ConsistencyCheckFailed, DegenerateUid, DkpabeError, GrantNotFound, PokRejected,
                     ProtocolAbort, Sigma2Rejected, UnblindSanityFailed)
from .groups import SourceElement, default_rng, hash_to_scalar
from .kpabe import (AuthorityPublicKey, AuthoritySecretKey, GlobalParams, UserKeyShare, decrypt, encrypt,
                    random_message)
from .twopc import AuthorityBlindSum, BlindSumRequest, UserBlindSum, generate_keypair
from .zkp import (AUTHORITY_POK_DOMAIN, USER_POK_DOMAIN, AuthorityPokStatement, AuthorityWitness,
                  PedersenCommitment, SigmaProof, Transcript, UserPokStatement, commitment_fingerprint,
                  pedersen_commit, pok_authority_prove, pok_authority_verify, pok_user_prove, pok_user_verify)

logger = logging.getLogger(__name__)

SESSION_ID_SIZE = 16


def uid_from_gid(params: GlobalParams, gid: bytes) -> int:
    '''u = H(GID); computed once at the user and never sent.'''
    return hash_to_scalar(gid, params.order)


def create_pseudonym(params: GlobalParams, gid: bytes, rng=None) -> PedersenCommitment:
    '''A Pedersen commitment to u. The user keeps the opening and shows com to one authority.'''
    return pedersen_commit(params, uid_from_gid(params, gid), rng)


def _transcript(domain: bytes, session_id: bytes, authority_id: int) -> Transcript:
    return Transcript(domain, session_id).append(b"authority", authority_id.to_bytes(4, "big"))


@dataclass(frozen=True)
class IssueRequest:
    session_id: bytes
    authority_id: int
    statement: UserPokStatement
    proof: SigmaProof
    paillier_n: int
    request_x: BlindSumRequest
    request_y: BlindSumRequest


@dataclass(frozen=True)
class BlindSumReply:
    session_id: bytes
    reply_x: int
    reply_y: int


@dataclass(frozen=True)
class IssueComplete:
    session_id: bytes
    z_x: int
    z_y: int
    P: SourceElement
    Q: SourceElement
    R: SourceElement


@dataclass(frozen=True)
class BlindedKeys:
    session_id: bytes
    authority_id: int
    tree: AccessTree
    D: SourceElement
    D1: SourceElement
    Dj: Mapping[AttributeId, SourceElement]
    proof: SigmaProof


class _AbortOnError:
    '''Aborts the session (dropping its secrets) when a protocol step fails.'''

    def __init__(self, session):
        self._session = session

    def __enter__(self):
        return self._session

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None and issubclass(exc_type, (DkpabeError, ValueError)):
            self._session.abort()
        return False


class Phase(str, Enum):
    NEW = "new"
    AWAITING_REPLY = "awaiting-reply"
    AWAITING_COMPLETION = "awaiting-completion"
    AWAITING_KEYS = "awaiting-keys"
    DONE = "done"
    ABORTED = "aborted"


@dataclass(frozen=True)
class Grant:
    fingerprint: str
    tree: AccessTree
    policy: str = ""

    @property
    def attributes(self):
        return tuple(sorted(self.tree.leaves()))


class GrantTable:
    '''
    Pseudonym fingerprint -> granted access tree. Read-mostly and shared by every session.

    The JSON file holds rows of {fingerprint, attributes, tree (base64 encoding), policy}.
    '''

    def __init__(self, grants: Iterable[Grant] = ()):
        self._lock = threading.Lock()
        self._grants: Dict[str, Grant] = {}
        for grant in grants:
            self._grants[grant.fingerprint] = grant

    def __len__(self):
        return len(self._grants)

    def add(self, fingerprint: str, tree: AccessTree, policy: Optional[str] = None) -> Grant:
        grant = Grant(fingerprint, tree, policy or format_policy(tree))
        with self._lock:
            self._grants[fingerprint] = grant
        return grant

    def lookup(self, com: SourceElement) -> Grant:
        fingerprint = commitment_fingerprint(com)
        with self._lock:
            grant = self._grants.get(fingerprint)
        if grant is None:
            raise GrantNotFound(f"No grant for pseudonym {fingerprint[:16]}")
        return grant

    def rows(self):
        from .encoding import encode_tree

        with self._lock:
            grants = sorted(self._grants.values(), key=lambda grant: grant.fingerprint)
        return [{
            "fingerprint": grant.fingerprint,
            "attributes": [str(attribute) for attribute in grant.attributes],
            "tree": base64.b64encode(encode_tree(grant.tree)).decode("ascii"),
            "policy": grant.policy,
        } for grant in grants]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump({"grants": self.rows()}, handle, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "GrantTable":
        from .encoding import decode_tree

        try:
            with open(path, "r", encoding="utf-8") as handle:
                rows = json.load(handle).get("grants", [])
        except FileNotFoundError:
            return GrantTable()
        return GrantTable(Grant(row["fingerprint"], decode_tree(base64.b64decode(row["tree"])), row.get("policy", ""))
                          for row in rows)


class UserIssuingSession:
    '''
    The user's side of one issuance with one authority.

    Attributes:
        session_id: Fresh random id bound into both proofs.
        phase:      Advances NEW -> AWAITING_REPLY -> AWAITING_KEYS -> DONE, or ABORTED.
    '''

    def __init__(self, params: GlobalParams, pk: AuthorityPublicKey, gid: bytes,
                 pseudonym: Optional[PedersenCommitment] = None, rng=None, keypair=None,
                 session_id: Optional[bytes] = None):
        self.params = params
        self.pk = pk
        self._rng = rng or default_rng()
        self._u = uid_from_gid(params, gid)
        if pseudonym is not None and pseudonym.opening.message != self._u:
            raise ValueError("The pseudonym does not commit to this GID")
        self.pseudonym = pseudonym
        self._keypair = keypair
        self.session_id = session_id or self._rng.getrandbits(8 * SESSION_ID_SIZE).to_bytes(SESSION_ID_SIZE, "big")
        self.phase = Phase.NEW
        self._rho1 = self._rho2 = None
        self._sum_x = self._sum_y = None
        self._bases = None
        self.statement = None

    @property
    def blinded_bases(self):
        '''(P, Q, R) as sent in IssueComplete; None before the reply and after finalize.'''
        return self._bases

    def start(self) -> IssueRequest:
        self._expect(Phase.NEW)
        params, ctx = self.params, self.params.ctx
        if self.pseudonym is None:
            self.pseudonym = pedersen_commit(params, self._u, self._rng)
        self._rho1 = ctx.random_nonzero_scalar(self._rng)
        self._rho2 = ctx.random_nonzero_scalar(self._rng)
        self.statement, proof = pok_user_prove(
            params, self._u, self._rho1, self._rho2, self._rng,
            transcript=_transcript(USER_POK_DOMAIN, self.session_id, self.pk.authority_id),
            commitment=self.pseudonym)

        public_key, private_key = self._keypair or generate_keypair(params.order)
        self._sum_x = UserBlindSum(params.order, self._u, self._rho1, public_key, private_key, self._rng)
        self._sum_y = UserBlindSum(params.order, self._u, self._rho2, public_key, private_key, self._rng)
        self.phase = Phase.AWAITING_REPLY
        logger.debug("session=%s phase=start authority=%d", self.session_id.hex(), self.pk.authority_id)
        return IssueRequest(self.session_id, self.pk.authority_id, self.statement, proof, public_key.n,
                            self._sum_x.request(), self._sum_y.request())

    def handle_reply(self, message: BlindSumReply) -> IssueComplete:
        self._expect(Phase.AWAITING_REPLY, message.session_id)
        with _AbortOnError(self):
            z_x = self._sum_x.finish(message.reply_x)
            z_y = self._sum_y.finish(message.reply_y)
            self._sum_x = self._sum_y = None
            params, ctx = self.params, self.params.ctx
            P = params.g ** ctx.inverse(self._rho1 * self._rho2)
            Q = params.h ** ctx.inverse(self._rho2)
            R = params.h1 ** ctx.inverse(self._rho1)
            self._bases = (P, Q, R)
            self.phase = Phase.AWAITING_KEYS
            return IssueComplete(self.session_id, z_x, z_y, P, Q, R)

    def finalize(self, message: BlindedKeys, self_test: bool = False) -> UserKeyShare:
        '''Verifies the authority proof and unblinds every component with rho1 * rho2.'''
        self._expect(Phase.AWAITING_KEYS, message.session_id)
        with _AbortOnError(self):
            if message.authority_id != self.pk.authority_id:
                raise Sigma2Rejected(f"Keys come from authority {message.authority_id}, "
                                     f"expected {self.pk.authority_id}")
            if set(message.Dj) != message.tree.leaf_set():
                raise Sigma2Rejected("Blinded leaf components do not match the granted tree")
            P, Q, R = self._bases
            statement = AuthorityPokStatement(self.pk.Y, P, Q, R, message.D, message.D1, message.Dj)
            transcript = _transcript(AUTHORITY_POK_DOMAIN, self.session_id, self.pk.authority_id)
            if not pok_authority_verify(self.params, statement, message.proof, transcript):
                raise Sigma2Rejected(f"Proof of authority {self.pk.authority_id} does not verify")

            unblind = self._rho1 * self._rho2 % self.params.order
            share = UserKeyShare(
                authority_id=message.authority_id,
                tree=message.tree,
                D=message.D ** unblind,
                D1=message.D1 ** unblind,
                Dj={attribute: message.Dj[attribute] ** unblind for attribute in sorted(message.Dj)},
            )
            if self_test:
                self._self_test(share)
            self._wipe()
            self.phase = Phase.DONE
            logger.debug("session=%s phase=finalize authority=%d outcome=ok",
                         self.session_id.hex(), self.pk.authority_id)
            return share

    def _self_test(self, share: UserKeyShare):
        params = self.params
        m = random_message(params, self._rng)
        ciphertext = encrypt(params, [self.pk], {self.pk.authority_id: share.tree.leaf_set()}, m, self._rng)
        if decrypt(params, [share], ciphertext) != m:
            raise UnblindSanityFailed(f"Key share from authority {self.pk.authority_id} fails a trial decryption")

    def _expect(self, phase: Phase, session_id: Optional[bytes] = None):
        if self.phase != phase:
            raise ProtocolAbort(f"Session is {self.phase.value}, expected {phase.value}")
        if session_id is not None and session_id != self.session_id:
            raise ProtocolAbort("Message belongs to another session")

    def _wipe(self):
        self._rho1 = self._rho2 = None
        self._sum_x = self._sum_y = None
        self._bases = None
        self._keypair = None

    def abort(self):
        self._wipe()
        self.phase = Phase.ABORTED


def user_start(params: GlobalParams, pk: AuthorityPublicKey, gid: bytes, rng=None, pseudonym=None,
               keypair=None):
    '''Creates a user session and its first message.'''
    session = UserIssuingSession(params, pk, gid, pseudonym, rng, keypair)
    return session, session.start()


def user_finalize(session: UserIssuingSession, message: BlindedKeys, self_test: bool = False) -> UserKeyShare:
    return session.finalize(message, self_test)


class AuthorityIssuingSession:
    '''
    The authority's side of one issuance. Never sees u.

    Attributes:
        session_id: Taken from the user's request.
        phase:      NEW -> AWAITING_COMPLETION -> DONE, or ABORTED.
        created:    Monotonic creation time, used for expiry.
    '''

    def __init__(self, params: GlobalParams, pk: AuthorityPublicKey, sk: AuthoritySecretKey,
                 grants: GrantTable, rng=None):
        if pk.authority_id != sk.authority_id:
            raise ValueError("Public and secret key belong to different authorities")
        self.params = params
        self.pk = pk
        self._sk = sk
        self._grants = grants
        self._rng = rng or default_rng()
        self.session_id = None
        self.phase = Phase.NEW
        self.created = time.monotonic()
        self._grant = None
        self._r = None
        self._shares = None
        self._statement = None
        self._sum_x = self._sum_y = None

    def expired(self, ttl: float, now: Optional[float] = None) -> bool:
        return (now if now is not None else time.monotonic()) - self.created > ttl

    def handle_request(self, message: IssueRequest) -> BlindSumReply:
        if self.phase != Phase.NEW:
            raise ProtocolAbort(f"Session is {self.phase.value}, expected {Phase.NEW.value}")
        self.session_id = message.session_id
        with _AbortOnError(self):
            if message.authority_id != self.pk.authority_id:
                raise ProtocolAbort(f"Request addressed to authority {message.authority_id}")
            if message.statement.com is None:
                raise PokRejected("Request carries no pseudonym")
            self._grant = self._grants.lookup(message.statement.com)

            params, ctx = self.params, self.params.ctx
            self._r = ctx.random_nonzero_scalar(self._rng)
            self._shares = share_secret(self._grant.tree, self._r, params.order, self._rng)
            self._sum_x = AuthorityBlindSum(params.order, self._r, message.paillier_n, self._rng)
            self._sum_y = AuthorityBlindSum(params.order, self._sk.beta, message.paillier_n, self._rng)

            transcript = _transcript(USER_POK_DOMAIN, self.session_id, self.pk.authority_id)
            if not pok_user_verify(params, message.statement, message.proof, transcript):
                raise PokRejected("User proof of knowledge does not verify")
            self._statement = message.statement
            reply = BlindSumReply(self.session_id, self._sum_x.reply(message.request_x),
                                  self._sum_y.reply(message.request_y))
            self.phase = Phase.AWAITING_COMPLETION
            logger.info("session=%s phase=request authority=%d outcome=ok",
                        self.session_id.hex(), self.pk.authority_id)
            return reply

    def handle_complete(self, message: IssueComplete) -> BlindedKeys:
        if self.phase != Phase.AWAITING_COMPLETION:
            raise ProtocolAbort(f"Session is {self.phase.value}, expected {Phase.AWAITING_COMPLETION.value}")
        if message.session_id != self.session_id:
            raise ProtocolAbort("Message belongs to another session")
        with _AbortOnError(self):
            params, ctx, sk = self.params, self.params.ctx, self._sk
            x = self._sum_x.output(message.z_x)
            y = self._sum_y.output(message.z_y)
            statement = self._statement
            if params.g ** x != statement.psi1 * (statement.psi2 ** self._r):
                raise ConsistencyCheckFailed("x")
            if params.g ** y != statement.psi3 * (statement.psi4 ** sk.beta):
                raise ConsistencyCheckFailed("y")
            if x == 0 or y == 0:
                raise DegenerateUid(f"uid is degenerate for authority {sk.authority_id}")
            P, Q, R = message.P, message.Q, message.R
            for name, base in (("P", P), ("Q", Q), ("R", R)):
                if base.is_identity():
                    raise ProtocolAbort(f"Blinded base {name} is the identity")

            inv_x, inv_y = ctx.inverse(x), ctx.inverse(y)
            beta_over_x = sk.beta * inv_x % params.order
            r_over_y = self._r * inv_y % params.order
            leaf_exponents = {attribute: share * inv_y * ctx.inverse(sk.t_of(attribute)) % params.order
                              for attribute, share in sorted(self._shares.items())}
            D = (P ** (-sk.alpha)) * (Q ** beta_over_x) * (R ** r_over_y)
            D1 = Q ** inv_x
            Dj = {attribute: R ** exponent for attribute, exponent in leaf_exponents.items()}

            witness = AuthorityWitness(sk.alpha, beta_over_x, r_over_y, inv_x, leaf_exponents)
            pok_statement = AuthorityPokStatement(self.pk.Y, P, Q, R, D, D1, Dj)
            proof = pok_authority_prove(params, witness, pok_statement, self._rng,
                                        _transcript(AUTHORITY_POK_DOMAIN, self.session_id, self.pk.authority_id))
            tree = self._grant.tree
            self._wipe()
            self.phase = Phase.DONE
            logger.info("session=%s phase=complete authority=%d outcome=ok",
                        self.session_id.hex(), self.pk.authority_id)
            return BlindedKeys(self.session_id, sk.authority_id, tree, D, D1, Dj, proof)

    def _wipe(self):
        self._r = None
        self._shares = None
        self._statement = None
        self._sum_x = self._sum_y = None
        self._grant = None

    def abort(self):
        if self.phase == Phase.ABORTED:
            return
        self._wipe()
        self.phase = Phase.ABORTED
        if self.session_id is not None:
            logger.warning("session=%s phase=abort authority=%d", self.session_id.hex(), self.pk.authority_id)


def authority_round(session: AuthorityIssuingSession, request: IssueRequest, complete_with) -> BlindedKeys:
    '''
    Runs both authority steps for an in-process peer.

    complete_with maps the BlindSumReply to the user's IssueComplete.
    '''
    reply = session.handle_request(request)
    return session.handle_complete(complete_with(reply))
