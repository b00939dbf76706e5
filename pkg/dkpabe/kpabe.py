'''kpabe.py: Contains the decentralized KP-ABE scheme: global setup, authority setup, key generation, encryption and decryption.'''

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Tuple

from .access import AccessTree, AttributeId, DecryptionPlan, PlanNode, lagrange_coeff, select_satisfying, share_secret
from .errors import (DegenerateUid, EmptyAuthoritySet, ForeignLeaf, MissingLeafKey, MissingShare,
                     PolicySyntaxError, PolicyUnsatisfied, Unsatisfied, UnknownAttribute, UnsupportedParameters)
from .groups import Backend, GroupContext, Scalar, SourceElement, TargetElement, default_rng

logger = logging.getLogger(__name__)

GENERATOR_H_DST = b"dkpabe/global-setup/h/v1"
GENERATOR_H1_DST = b"dkpabe/global-setup/h1/v1"
CURVE_SECURITY_BITS = 128


class GlobalParams:
    '''
    A class that holds the public parameters shared by every authority.

    Attributes:
        ctx:   The group context (backend, order and operation counters).
        g:     The group generator.
        h, h1: Generators derived by hashing fixed strings; nobody knows their logs to base g.
        egg:   The precomputed pairing e(g, g).
    '''

    def __init__(self, ctx: GroupContext, g: SourceElement, h: SourceElement, h1: SourceElement, egg: TargetElement):
        self.ctx = ctx
        self.g = g
        self.h = h
        self.h1 = h1
        self.egg = egg

    @property
    def order(self) -> int:
        return self.ctx.order

    @property
    def backend(self) -> Backend:
        return self.ctx.kind

    def __eq__(self, other):
        return (isinstance(other, GlobalParams) and self.ctx.compatible(other.ctx)
                and self.g == other.g and self.h == other.h and self.h1 == other.h1)

    def __hash__(self):
        return hash((self.backend, self.order))

    def __repr__(self):
        return f"GlobalParams(backend={self.backend.value}, order={self.order})"


def global_setup(backend=Backend.CURVE, security_param: int = CURVE_SECURITY_BITS, order: Optional[int] = None) -> GlobalParams:
    '''Builds the bilinear group and derives g, h, h1. Deterministic for a given backend and order.'''
    backend = Backend(backend)
    if backend == Backend.CURVE and security_param > CURVE_SECURITY_BITS:
        raise UnsupportedParameters(f"BLS12-381 offers {CURVE_SECURITY_BITS}-bit security, {security_param} requested")
    ctx = GroupContext.create(backend, order)
    g = ctx.generator()
    h = ctx.hash_to_source(GENERATOR_H_DST)
    h1 = ctx.hash_to_source(GENERATOR_H1_DST)
    counter = 0
    while h1 == g or h1 == h:
        counter += 1
        h1 = ctx.hash_to_source(GENERATOR_H1_DST + counter.to_bytes(4, "big"))
    egg = ctx.pair(g, g)
    logger.debug("Global setup done backend=%s order_bits=%d", backend.value, ctx.order.bit_length())
    return GlobalParams(ctx, g, h, h1, egg)


@dataclass(frozen=True)
class AuthorityPublicKey:
    '''Y_k = e(g,g)^alpha, Z_k = g^beta and T_kj = g^t_kj plus the attribute name table.'''
    authority_id: int
    Y: TargetElement
    Z: SourceElement
    T: Tuple[SourceElement, ...]
    attribute_names: Tuple[str, ...] = ()
    name: str = ""

    @property
    def n_attributes(self) -> int:
        return len(self.T)

    def attribute(self, index: int) -> AttributeId:
        if not 1 <= index <= self.n_attributes:
            raise UnknownAttribute(f"Authority {self.authority_id} has no attribute {index}")
        return AttributeId(self.authority_id, index)

    def attribute_id(self, name: str) -> AttributeId:
        '''Resolves an attribute by name or by its 1-based index.'''
        if name in self.attribute_names:
            return AttributeId(self.authority_id, self.attribute_names.index(name) + 1)
        if name.isdigit():
            return self.attribute(int(name))
        raise UnknownAttribute(f"Authority {self.label} has no attribute named {name!r}")

    def attribute_name(self, attribute: AttributeId) -> str:
        if self.attribute_names:
            return self.attribute_names[attribute.index - 1]
        return str(attribute.index)

    def universe(self) -> FrozenSet[AttributeId]:
        return frozenset(AttributeId(self.authority_id, j) for j in range(1, self.n_attributes + 1))

    def owns(self, attribute: AttributeId) -> bool:
        return attribute.authority == self.authority_id and 1 <= attribute.index <= self.n_attributes

    @property
    def label(self) -> str:
        return self.name or str(self.authority_id)


@dataclass(frozen=True, repr=False)
class AuthoritySecretKey:
    authority_id: int
    alpha: Scalar
    beta: Scalar
    t: Tuple[Scalar, ...]

    def t_of(self, attribute: AttributeId) -> Scalar:
        if attribute.authority != self.authority_id or not 1 <= attribute.index <= len(self.t):
            raise ForeignLeaf(f"Attribute {attribute} is not managed by authority {self.authority_id}")
        return self.t[attribute.index - 1]

    def __repr__(self):
        return f"AuthoritySecretKey(authority_id={self.authority_id}, n_attributes={len(self.t)})"


def authority_setup(params: GlobalParams, authority_id: int, n_attributes: int, rng=None,
                    attribute_names: Optional[Iterable[str]] = None,
                    name: str = "") -> Tuple[AuthorityPublicKey, AuthoritySecretKey]:
    '''Creates the keys of one authority. Reads nothing but the global parameters.'''
    if n_attributes < 1:
        raise ValueError("An authority must monitor at least one attribute")
    if authority_id < 1:
        raise ValueError("Authority ids start at 1")
    names = tuple(attribute_names or ())
    if names and len(names) != n_attributes:
        raise ValueError(f"Expected {n_attributes} attribute names, got {len(names)}")
    if len(set(names)) != len(names):
        raise ValueError("Attribute names must be distinct")
    rng = rng or default_rng()
    ctx = params.ctx
    alpha = ctx.random_nonzero_scalar(rng)
    beta = ctx.random_nonzero_scalar(rng)
    t = tuple(ctx.random_nonzero_scalar(rng) for _ in range(n_attributes))

    pk = AuthorityPublicKey(
        authority_id=authority_id,
        Y=params.egg ** alpha,
        Z=params.g ** beta,
        T=tuple(params.g ** t_j for t_j in t),
        attribute_names=names,
        name=name,
    )
    logger.info("Authority %d set up with %d attributes", authority_id, n_attributes)
    return pk, AuthoritySecretKey(authority_id, alpha, beta, t)


@dataclass(frozen=True)
class UserKeyShare:
    '''
    The key share one authority issued to one user. The uid is not stored.

    Attributes:
        D:  g^-alpha * h^(beta/(r+u)) * h1^(r/(beta+u))
        D1: h^(1/(r+u))
        Dj: h1^(q_leaf(0)/((beta+u)*t_j)) per tree leaf.
    '''
    authority_id: int
    tree: AccessTree
    D: SourceElement
    D1: SourceElement
    Dj: Mapping[AttributeId, SourceElement] = field(default_factory=dict)


def _check_tree_owned(tree: AccessTree, authority_id: int, n_attributes: int):
    for attribute in tree.leaves():
        if attribute.authority != authority_id or attribute.index > n_attributes:
            raise ForeignLeaf(f"Leaf {attribute} is not an attribute of authority {authority_id}")


def keygen(params: GlobalParams, sk: AuthoritySecretKey, u: Scalar, tree: AccessTree, rng=None) -> UserKeyShare:
    '''Direct (non-blind) key generation for uid u under the given tree.'''
    ctx = params.ctx
    p = ctx.order
    _check_tree_owned(tree, sk.authority_id, len(sk.t))
    if (sk.beta + u) % p == 0:
        raise DegenerateUid(f"uid collides with the secret of authority {sk.authority_id}")
    rng = rng or default_rng()

    r = ctx.random_nonzero_scalar(rng)
    while (r + u) % p == 0:
        r = ctx.random_nonzero_scalar(rng)
    shares = share_secret(tree, r, p, rng)

    inv_ru = ctx.inverse(r + u)
    inv_bu = ctx.inverse(sk.beta + u)
    D = (params.g ** (-sk.alpha)) * (params.h ** (sk.beta * inv_ru)) * (params.h1 ** (r * inv_bu))
    D1 = params.h ** inv_ru
    Dj = {attribute: params.h1 ** (share * inv_bu * ctx.inverse(sk.t_of(attribute)))
          for attribute, share in sorted(shares.items())}
    return UserKeyShare(sk.authority_id, tree, D, D1, Dj)


@dataclass(frozen=True)
class Ciphertext:
    '''
    A ciphertext over the attribute sets of one or more authorities.

    Attributes:
        attributes: Authority id -> the attributes labelling the ciphertext for that authority.
        c1:         m * prod_k Y_k^s
        c2:         g^s
        c3:         prod_k Z_k^s
        c3_parts:   Z_k^s per authority.
        components: T_kj^s per labelled attribute.
    '''
    attributes: Mapping[int, FrozenSet[AttributeId]]
    c1: TargetElement
    c2: SourceElement
    c3: SourceElement
    c3_parts: Mapping[int, SourceElement]
    components: Mapping[AttributeId, SourceElement]

    @property
    def authorities(self) -> Tuple[int, ...]:
        return tuple(sorted(self.attributes))

    def element_count(self) -> Tuple[int, int]:
        '''(source, target) group elements carried by the serialized form.'''
        return 1 + len(self.attributes) + len(self.components), 1


def _by_authority(keys) -> Dict[int, object]:
    if isinstance(keys, Mapping):
        return dict(keys)
    return {key.authority_id: key for key in keys}


def encrypt(params: GlobalParams, pks, attr_sets: Mapping[int, Iterable[AttributeId]], m: TargetElement,
            rng=None) -> Ciphertext:
    '''Encrypts the target element m under the attribute set of every listed authority.'''
    pks = _by_authority(pks)
    if not attr_sets:
        raise EmptyAuthoritySet("At least one authority must label the ciphertext")
    attributes = {}
    for k in sorted(attr_sets):
        labels = frozenset(attr_sets[k])
        if not labels:
            raise EmptyAuthoritySet(f"Attribute set of authority {k} is empty")
        if k not in pks:
            raise UnknownAttribute(f"No public key for authority {k}")
        for attribute in labels:
            if not pks[k].owns(attribute):
                raise UnknownAttribute(f"Attribute {attribute} is not in the universe of authority {k}")
        attributes[k] = labels

    ctx = params.ctx
    s = ctx.random_nonzero_scalar(rng or default_rng())
    c1 = m
    for k in attributes:
        c1 = c1 * (pks[k].Y ** s)
    c2 = params.g ** s
    c3_parts = {k: pks[k].Z ** s for k in attributes}
    c3 = None
    for part in c3_parts.values():
        c3 = part if c3 is None else c3 * part
    components = {attribute: pks[k].T[attribute.index - 1] ** s
                  for k in attributes for attribute in sorted(attributes[k])}
    return Ciphertext(attributes, c1, c2, c3, c3_parts, components)


def decrypt_node(params: GlobalParams, node: PlanNode, share: UserKeyShare, ciphertext: Ciphertext) -> TargetElement:
    '''e(g, h1)^(s * q_node(0) / (beta + u)) for a node chosen by the decryption plan.'''
    if node.node.is_leaf:
        attribute = node.node.attribute
        if attribute not in share.Dj:
            raise MissingLeafKey(f"Key share of authority {share.authority_id} has no component for {attribute}")
        if attribute not in ciphertext.components:
            raise MissingLeafKey(f"Ciphertext has no component for {attribute}")
        return params.ctx.pair(ciphertext.components[attribute], share.Dj[attribute])

    indices = [child.index for child in node.chosen]
    result = None
    for child in node.chosen:
        value = decrypt_node(params, child, share, ciphertext)
        coefficient = lagrange_coeff(child.index, indices, 0, params.order)
        if coefficient != 1:
            value = value ** coefficient
        result = value if result is None else result * value
    return result


def decryption_plans(shares, ciphertext: Ciphertext) -> Dict[int, DecryptionPlan]:
    '''Checks share availability and policy satisfaction for every authority before any pairing.'''
    shares = _by_authority(shares)
    plans = {}
    for k in ciphertext.authorities:
        share = shares.get(k)
        if share is None:
            raise MissingShare(k)
        try:
            plans[k] = select_satisfying(share.tree, ciphertext.attributes[k])
        except Unsatisfied:
            raise PolicyUnsatisfied(k) from None
    return plans


def decrypt(params: GlobalParams, shares, ciphertext: Ciphertext) -> TargetElement:
    '''Recovers m = C1 * X / (Y * prod_k S_k).'''
    shares = _by_authority(shares)
    plans = decryption_plans(shares, ciphertext)
    ctx = params.ctx

    X = Y = S = None
    for k in ciphertext.authorities:
        share = shares[k]
        x_k = ctx.pair(ciphertext.c2, share.D)
        y_k = ctx.pair(ciphertext.c3_parts[k], share.D1)
        s_k = decrypt_node(params, plans[k].root, share, ciphertext)
        X = x_k if X is None else X * x_k
        Y = y_k if Y is None else Y * y_k
        S = s_k if S is None else S * s_k
    return ciphertext.c1 * X / (Y * S)


def random_message(params: GlobalParams, rng=None) -> TargetElement:
    '''A uniform element of the target group, used as the encapsulated key.'''
    return params.egg ** params.ctx.random_nonzero_scalar(rng or default_rng())


def policy_resolver(pks):
    '''Resolves authority:attribute leaves by authority name or id and attribute name or index.'''
    pks = _by_authority(pks)

    def resolve(authority: str, attribute: str) -> AttributeId:
        for pk in pks.values():
            if authority in (pk.name, str(pk.authority_id)):
                try:
                    return pk.attribute_id(attribute)
                except UnknownAttribute as error:
                    raise PolicySyntaxError(str(error)) from None
        raise PolicySyntaxError(f"Unknown authority {authority!r}")

    return resolve


def attribute_namer(pks):
    pks = _by_authority(pks)

    def name(attribute: AttributeId) -> str:
        pk = pks.get(attribute.authority)
        if pk is None:
            return str(attribute)
        return f"{pk.label}:{pk.attribute_name(attribute)}"

    return name
