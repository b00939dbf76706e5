'''helpers.py: Contains shared fixtures of the test suite.'''

import random
from functools import lru_cache

from dkpabe.access import AccessTree, AttributeId, leaf, satisfies, threshold_gate
from dkpabe.errors import ProtocolAbort
from dkpabe.groups import Backend
from dkpabe.kpabe import authority_setup, global_setup
from dkpabe.twopc import generate_keypair

SMALL_ORDER = 101
MEDIUM_ORDER = 1009
DEFAULT_ORDER = 2147483647
BLS_ORDER = 52435875175126190479447740508185965837690552500527637822603658699938581184513

PAILLIER_TEST_BITS = 256


def transparent_params(order: int = DEFAULT_ORDER):
    return global_setup(Backend.TRANSPARENT, order=order)


@lru_cache(maxsize=None)
def paillier_keypair(order: int = DEFAULT_ORDER):
    '''A small Paillier keypair, shared by every test that needs one.'''
    return generate_keypair(order, PAILLIER_TEST_BITS)


def make_authorities(params, count: int, n_attributes: int, seed: int = 1):
    '''[(pk, sk)] for authorities 1..count.'''
    rng = random.Random(seed)
    return [authority_setup(params, k, n_attributes, rng) for k in range(1, count + 1)]


def random_tree(authority_id: int, n_attributes: int, depth: int, rng, spare: int = 0) -> AccessTree:
    '''
    A random threshold tree with at most depth gate levels over distinct attributes of one authority.

    spare attributes of the universe are left out of the tree.
    '''
    universe = [AttributeId(authority_id, j) for j in range(1, n_attributes + 1)]
    chosen = rng.sample(universe, rng.randint(1, n_attributes - spare))

    def build(attributes, levels):
        if len(attributes) == 1:
            return leaf(attributes[0])
        if levels == 1:
            children = [leaf(attribute) for attribute in attributes]
        else:
            cuts = sorted(rng.sample(range(1, len(attributes)), rng.randint(1, min(2, len(attributes) - 1))))
            bounds = [0] + cuts + [len(attributes)]
            children = [build(attributes[lo:hi], levels - 1) for lo, hi in zip(bounds, bounds[1:])]
        return threshold_gate(rng.randint(1, len(children)), children)

    return AccessTree(build(chosen, depth))


class ScriptedRng(random.Random):
    '''A seeded Random whose first randrange calls return queued values.'''

    def __new__(cls, *args, **kwargs):
        # Python < 3.11 passes constructor args to Random.__new__, which seeds from them.
        return super().__new__(cls)

    def __init__(self, values, seed: int = 0):
        super().__init__(seed)
        self._queued = list(values)

    def randrange(self, *args, **kwargs):
        if self._queued:
            return self._queued.pop(0)
        return super().randrange(*args, **kwargs)


def satisfying_subset(tree: AccessTree, universe, rng):
    '''A random subset of universe that satisfies tree.'''
    universe = sorted(universe)
    while True:
        chosen = {attribute for attribute in universe if rng.random() < 0.6}
        if satisfies(tree, chosen):
            return chosen


def unsatisfying_subset(tree: AccessTree, universe, rng):
    '''A non-empty subset of universe that does not satisfy tree; tree must leave an attribute out.'''
    outside = sorted(set(universe) - tree.leaf_set())
    if not outside:
        raise ValueError("The tree covers the whole universe")
    chosen = {attribute for attribute in tree.leaves() if rng.random() < 0.6}
    while satisfies(tree, chosen):
        chosen.discard(rng.choice(sorted(chosen)))
    return chosen | {attribute for attribute in outside if rng.random() < 0.5} | {rng.choice(outside)}


class ClientTransport:
    '''Routes frames through a Flask test client instead of HTTP.'''

    def __init__(self, client):
        self.client = client

    def exchange(self, data: bytes) -> bytes:
        response = self.client.post("/issue", data=data, content_type="application/octet-stream")
        if response.status_code != 200:
            raise ProtocolAbort(f"Authority service answered {response.status_code}")
        return response.get_data()

    def fetch(self, path: str) -> bytes:
        return self.client.get(path).get_data()
