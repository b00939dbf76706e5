'''zkp.py: Contains Pedersen commitments, a linear sigma-protocol engine and the two proofs of the key issuing protocol.

Every relation has the form lhs = prod_i base_i^(sign_i * w_i). A prover with nonces k
commits A = prod_i base_i^(sign_i * k_i), answers z_i = k_i - c * w_i and the verifier checks
A == prod_i base_i^(sign_i * z_i) * lhs^c.
'''

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .access import AttributeId
from .errors import MalformedProof, WitnessStatementMismatch
from .groups import Backend, Scalar, SourceElement, TargetElement, default_rng
from .kpabe import GlobalParams
from .stream import prefixed

USER_POK_DOMAIN = b"dkpabe/pok-user/v1"
AUTHORITY_POK_DOMAIN = b"dkpabe/pok-auth/v1"


@dataclass(frozen=True)
class PedersenOpening:
    message: Scalar
    blinder: Scalar


@dataclass(frozen=True)
class PedersenCommitment:
    '''com = g^message * h^blinder together with its opening.'''
    com: SourceElement
    opening: PedersenOpening

    def fingerprint(self) -> str:
        return commitment_fingerprint(self.com)


def commitment_fingerprint(com: SourceElement) -> str:
    '''Hex SHA-256 of the commitment encoding; the key of the grant table.'''
    return hashlib.sha256(com.to_bytes()).hexdigest()


def pedersen_commit(params: GlobalParams, message: Scalar, rng=None) -> PedersenCommitment:
    blinder = params.ctx.random_scalar(rng or default_rng())
    com = (params.g ** message) * (params.h ** blinder)
    return PedersenCommitment(com, PedersenOpening(message % params.order, blinder))


def pedersen_verify(params: GlobalParams, com: SourceElement, opening: PedersenOpening,
                    message: Optional[Scalar] = None) -> bool:
    '''Decommit: True iff the opening (and message, when given) recomputes com.'''
    if message is not None and (message - opening.message) % params.order != 0:
        return False
    return com == (params.g ** opening.message) * (params.h ** opening.blinder)


class Transcript:
    '''An append-only, length-prefixed byte log whose hash is the Fiat-Shamir challenge.'''

    def __init__(self, domain: bytes, session_id: bytes = b""):
        self._log = bytearray(prefixed(domain) + prefixed(session_id))

    def append(self, label: bytes, data: bytes):
        self._log += prefixed(label) + prefixed(data)
        return self

    def append_element(self, label: bytes, element):
        return self.append(label, element.to_bytes())

    def append_scalar(self, label: bytes, value: int):
        return self.append(label, value.to_bytes((value.bit_length() + 7) // 8 or 1, "big"))

    def copy(self):
        clone = Transcript.__new__(Transcript)
        clone._log = bytearray(self._log)
        return clone

    def to_bytes(self) -> bytes:
        return bytes(self._log)

    def challenge(self, ctx) -> Scalar:
        return fiat_shamir_challenge(self, ctx)


def fiat_shamir_challenge(transcript: Transcript, ctx) -> Scalar:
    return ctx.hash_to_scalar(transcript.to_bytes())


@dataclass(frozen=True)
class Term:
    base: object
    witness: str
    sign: int = 1


@dataclass(frozen=True)
class LinearRelation:
    lhs: object
    terms: Tuple[Term, ...]
    label: str = ""


@dataclass(frozen=True)
class SigmaProof:
    '''
    A sigma-protocol transcript.

    Attributes:
        commitments: One commit-round element per relation.
        challenge:   The challenge scalar.
        responses:   Witness name -> response.
    '''
    commitments: Tuple[object, ...]
    challenge: Scalar
    responses: Mapping[str, Scalar] = field(default_factory=dict)


class SigmaProtocol:
    '''An AND-composition of linear relations sharing witnesses by name.'''

    def __init__(self, ctx, relations: Sequence[LinearRelation]):
        self.ctx = ctx
        self.relations = tuple(relations)
        names = []
        for relation in self.relations:
            for term in relation.terms:
                if term.witness not in names:
                    names.append(term.witness)
        self.witness_names = tuple(names)

    def _combine(self, relation, exponents, extra=None):
        result = None
        for term in relation.terms:
            value = term.base ** (term.sign * exponents[term.witness])
            result = value if result is None else result * value
        if extra is not None:
            result = result * extra
        return result

    def holds(self, witness: Mapping[str, Scalar]) -> bool:
        return all(self._combine(relation, witness) == relation.lhs for relation in self.relations)

    def commit(self, nonces: Mapping[str, Scalar]) -> Tuple[object, ...]:
        return tuple(self._combine(relation, nonces) for relation in self.relations)

    def respond(self, nonces, witness, challenge: Scalar) -> Dict[str, Scalar]:
        p = self.ctx.order
        return {name: (nonces[name] - challenge * witness[name]) % p for name in self.witness_names}

    def check_shape(self, proof: SigmaProof):
        if len(proof.commitments) != len(self.relations):
            raise MalformedProof(f"Expected {len(self.relations)} commitments, got {len(proof.commitments)}")
        if set(proof.responses) != set(self.witness_names):
            raise MalformedProof("Proof responses do not match the statement witnesses")
        for value in list(proof.responses.values()) + [proof.challenge]:
            if not 0 <= value < self.ctx.order:
                raise MalformedProof("Proof scalar out of range")
        for commitment, relation in zip(proof.commitments, self.relations):
            if type(commitment) is not type(relation.lhs):
                raise MalformedProof(f"Commitment of {relation.label or 'relation'} has the wrong group")

    def check(self, proof: SigmaProof) -> bool:
        '''Checks the verification equations under the challenge carried by the proof.'''
        self.check_shape(proof)
        for commitment, relation in zip(proof.commitments, self.relations):
            expected = self._combine(relation, proof.responses, relation.lhs ** proof.challenge)
            if commitment != expected:
                return False
        return True

    def bind(self, transcript: Transcript):
        '''Appends the statement (every lhs and base) to the transcript.'''
        for relation in self.relations:
            transcript.append_element(b"lhs", relation.lhs)
            for term in relation.terms:
                transcript.append(b"term", term.witness.encode() + (b"+" if term.sign > 0 else b"-"))
                transcript.append_element(b"base", term.base)
        return transcript

    def statement_digest(self) -> bytes:
        return hashlib.sha256(self.bind(Transcript(b"statement")).to_bytes()).digest()

    def fiat_shamir(self, transcript: Transcript, commitments) -> Scalar:
        transcript = self.bind(transcript.copy())
        for commitment in commitments:
            transcript.append_element(b"commit", commitment)
        return transcript.challenge(self.ctx)

    def simulate(self, challenge: Scalar, responses: Optional[Mapping[str, Scalar]] = None, rng=None) -> SigmaProof:
        '''Honest-verifier simulator: responses and challenge first, then the commit round.'''
        rng = rng or default_rng()
        if responses is None:
            responses = {name: self.ctx.random_scalar(rng) for name in self.witness_names}
        commitments = tuple(self._combine(relation, responses, relation.lhs ** challenge)
                            for relation in self.relations)
        return SigmaProof(commitments, challenge % self.ctx.order, dict(responses))

    def extract(self, first: SigmaProof, second: SigmaProof) -> Dict[str, Scalar]:
        '''Special soundness: w = (z - z') / (c' - c) from two accepting proofs with one commit round.'''
        if first.commitments != second.commitments:
            raise ValueError("Extraction needs two transcripts sharing the commit round")
        p = self.ctx.order
        delta = (second.challenge - first.challenge) % p
        if delta == 0:
            raise ValueError("Extraction needs two distinct challenges")
        inv = self.ctx.inverse(delta)
        return {name: (first.responses[name] - second.responses[name]) * inv % p for name in self.witness_names}


class SigmaProver:
    '''Interactive prover: commit() then respond(challenge). Each instance answers one challenge.'''

    def __init__(self, protocol: SigmaProtocol, witness: Mapping[str, Scalar], rng=None):
        self.protocol = protocol
        self._witness = dict(witness)
        self._nonces = None
        self._commitments = None
        self._rng = rng or default_rng()

    def commit(self):
        if self._commitments is None:
            self._nonces = {name: self.protocol.ctx.random_scalar(self._rng) for name in self.protocol.witness_names}
            self._commitments = self.protocol.commit(self._nonces)
        return self._commitments

    def respond(self, challenge: Scalar) -> SigmaProof:
        if self._commitments is None:
            raise ValueError("commit() must run before respond()")
        responses = self.protocol.respond(self._nonces, self._witness, challenge)
        return SigmaProof(self._commitments, challenge % self.protocol.ctx.order, responses)


def prove_fiat_shamir(protocol: SigmaProtocol, witness, transcript: Transcript, rng=None) -> SigmaProof:
    prover = SigmaProver(protocol, witness, rng)
    commitments = prover.commit()
    return prover.respond(protocol.fiat_shamir(transcript, commitments))


def verify_sigma(protocol: SigmaProtocol, proof: SigmaProof, transcript: Optional[Transcript] = None,
                 challenge: Optional[Scalar] = None) -> bool:
    '''Interactive mode when challenge is given, Fiat-Shamir otherwise.'''
    if challenge is None:
        if transcript is None:
            raise ValueError("Fiat-Shamir verification needs a transcript")
        protocol.check_shape(proof)
        challenge = protocol.fiat_shamir(transcript, proof.commitments)
    if proof.challenge != challenge % protocol.ctx.order:
        return False
    return protocol.check(proof)


# user proof: knowledge of (u, rho1, rho2) with Psi1 = Psi2^u, Psi3 = Psi4^u

@dataclass(frozen=True)
class UserPokStatement:
    psi1: SourceElement
    psi2: SourceElement
    psi3: SourceElement
    psi4: SourceElement
    com: Optional[SourceElement] = None

    def protocol(self, params: GlobalParams) -> SigmaProtocol:
        relations = [
            LinearRelation(self.psi2, (Term(params.g, "rho1"),), "psi2"),
            LinearRelation(self.psi4, (Term(params.g, "rho2"),), "psi4"),
            LinearRelation(self.psi1, (Term(self.psi2, "u"),), "psi1"),
            LinearRelation(self.psi3, (Term(self.psi4, "u"),), "psi3"),
        ]
        if self.com is not None:
            relations.append(LinearRelation(self.com, (Term(params.g, "u"), Term(params.h, "blinder")), "com"))
        return SigmaProtocol(params.ctx, relations)


def user_statement(params: GlobalParams, u: Scalar, rho1: Scalar, rho2: Scalar,
                   commitment: Optional[PedersenCommitment] = None) -> UserPokStatement:
    if rho1 % params.order == 0 or rho2 % params.order == 0:
        raise ValueError("rho1 and rho2 must be nonzero")
    psi2 = params.g ** rho1
    psi4 = params.g ** rho2
    return UserPokStatement(psi1=psi2 ** u, psi2=psi2, psi3=psi4 ** u, psi4=psi4,
                            com=None if commitment is None else commitment.com)


def _user_witness(u, rho1, rho2, commitment):
    witness = {"u": u, "rho1": rho1, "rho2": rho2}
    if commitment is not None:
        witness["blinder"] = commitment.opening.blinder
    return witness


def user_pok_prover(params: GlobalParams, u: Scalar, rho1: Scalar, rho2: Scalar, rng=None,
                    commitment: Optional[PedersenCommitment] = None) -> Tuple[UserPokStatement, SigmaProver]:
    '''Interactive form of the user proof.'''
    statement = user_statement(params, u, rho1, rho2, commitment)
    return statement, SigmaProver(statement.protocol(params), _user_witness(u, rho1, rho2, commitment), rng)


def pok_user_prove(params: GlobalParams, u: Scalar, rho1: Scalar, rho2: Scalar, rng=None,
                   transcript: Optional[Transcript] = None,
                   commitment: Optional[PedersenCommitment] = None) -> Tuple[UserPokStatement, SigmaProof]:
    '''Fiat-Shamir user proof. The transcript defaults to the bare user domain tag.'''
    statement = user_statement(params, u, rho1, rho2, commitment)
    transcript = transcript or Transcript(USER_POK_DOMAIN)
    proof = prove_fiat_shamir(statement.protocol(params), _user_witness(u, rho1, rho2, commitment), transcript, rng)
    return statement, proof


def pok_user_verify(params: GlobalParams, statement: UserPokStatement, proof: SigmaProof,
                    transcript: Optional[Transcript] = None, challenge: Optional[Scalar] = None) -> bool:
    if challenge is None:
        transcript = transcript or Transcript(USER_POK_DOMAIN)
    return verify_sigma(statement.protocol(params), proof, transcript, challenge)


# authority proof over the blinded key components

@dataclass(frozen=True)
class AuthorityPokStatement:
    '''
    The blinded key statement:
        D~  = P^-alpha * Q^(beta/x) * R^(r/y)
        D~1 = Q^(1/x)
        D~j = R^(q_j/(y*t_j)) per leaf
        Y   = e(g,g)^alpha
    '''
    Y: TargetElement
    P: SourceElement
    Q: SourceElement
    R: SourceElement
    D: SourceElement
    D1: SourceElement
    Dj: Mapping[AttributeId, SourceElement]

    def protocol(self, params: GlobalParams) -> SigmaProtocol:
        relations = [
            LinearRelation(self.D, (Term(self.P, "alpha", -1), Term(self.Q, "beta/x"), Term(self.R, "r/y")), "D"),
            LinearRelation(self.D1, (Term(self.Q, "1/x"),), "D1"),
        ]
        for attribute in sorted(self.Dj):
            relations.append(LinearRelation(self.Dj[attribute], (Term(self.R, f"leaf:{attribute}"),), f"D{attribute}"))
        relations.append(LinearRelation(self.Y, (Term(params.egg, "alpha"),), "Y"))
        return SigmaProtocol(params.ctx, relations)


@dataclass(frozen=True, repr=False)
class AuthorityWitness:
    alpha: Scalar
    beta_over_x: Scalar
    r_over_y: Scalar
    inv_x: Scalar
    leaf_exponents: Mapping[AttributeId, Scalar]

    def as_dict(self) -> Dict[str, Scalar]:
        witness = {"alpha": self.alpha, "beta/x": self.beta_over_x, "r/y": self.r_over_y, "1/x": self.inv_x}
        for attribute, exponent in self.leaf_exponents.items():
            witness[f"leaf:{attribute}"] = exponent
        return witness

    def __repr__(self):
        return f"AuthorityWitness(leaves={len(self.leaf_exponents)})"


def authority_pok_prover(params: GlobalParams, witness: AuthorityWitness, statement: AuthorityPokStatement,
                         rng=None) -> SigmaProver:
    protocol = statement.protocol(params)
    if params.backend == Backend.TRANSPARENT and not protocol.holds(witness.as_dict()):
        raise WitnessStatementMismatch("Blinded key components do not match the witness")
    return SigmaProver(protocol, witness.as_dict(), rng)


def pok_authority_prove(params: GlobalParams, witness: AuthorityWitness, statement: AuthorityPokStatement,
                        rng=None, transcript: Optional[Transcript] = None) -> SigmaProof:
    prover = authority_pok_prover(params, witness, statement, rng)
    transcript = transcript or Transcript(AUTHORITY_POK_DOMAIN)
    commitments = prover.commit()
    return prover.respond(prover.protocol.fiat_shamir(transcript, commitments))


def pok_authority_verify(params: GlobalParams, statement: AuthorityPokStatement, proof: SigmaProof,
                         transcript: Optional[Transcript] = None, challenge: Optional[Scalar] = None) -> bool:
    if challenge is None:
        transcript = transcript or Transcript(AUTHORITY_POK_DOMAIN)
    return verify_sigma(statement.protocol(params), proof, transcript, challenge)
