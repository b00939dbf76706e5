'''test_kpabe.py: Contains the set of tests for setup, key generation, encryption and decryption.'''

import itertools
import random
import unittest

from dkpabe.access import AccessTree, AttributeId, and_gate, leaf, or_gate, parse_policy, select_satisfying
from dkpabe.errors import (DegenerateUid, EmptyAuthoritySet, ForeignLeaf, MissingShare, PolicySyntaxError,
                           PolicyUnsatisfied, UnknownAttribute)
from dkpabe.groups import Backend, OpCounts
from dkpabe.kpabe import (UserKeyShare, attribute_namer, authority_setup, decrypt, decrypt_node, encrypt,
                          global_setup, keygen, policy_resolver, random_message)
from tests.helpers import (SMALL_ORDER, ScriptedRng, make_authorities, random_tree, satisfying_subset,
                           transparent_params)

POLICY_TEMPLATES = (
    "{k}:1",
    "AND({k}:1, {k}:2)",
    "OR({k}:1, {k}:2, {k}:3)",
    "THRESH(2; {k}:1, {k}:2, OR({k}:3, {k}:4))",
    "AND(OR({k}:1, {k}:4), THRESH(2; {k}:2, {k}:3, {k}:4))",
)


class TestSetup(unittest.TestCase):
    """Tests for global and authority setup."""

    def test_global_setup_is_deterministic(self) -> None:
        """Test that two setups on one backend agree."""
        self.assertEqual(transparent_params(SMALL_ORDER), transparent_params(SMALL_ORDER))

    def test_egg_is_pair_of_generator(self) -> None:
        """Test e(g, g) is precomputed."""
        params = transparent_params()
        self.assertEqual(params.egg, params.ctx.pair(params.g, params.g))

    def test_authority_keys(self) -> None:
        """Test Y = e(g,g)^alpha, Z = g^beta and T_j = g^t_j."""
        params = transparent_params()
        pk, sk = authority_setup(params, 3, 1, random.Random(1))
        self.assertEqual(pk.n_attributes, 1)
        self.assertEqual(params.ctx.dlog(pk.Y), sk.alpha)
        self.assertEqual(pk.Z, params.g ** sk.beta)
        self.assertEqual(pk.T[0], params.g ** sk.t[0])
        self.assertEqual(pk.universe(), frozenset({AttributeId(3, 1)}))

    def test_authorities_are_independent(self) -> None:
        """Test that two authorities set up alone work together."""
        params = transparent_params()
        (pk1, sk1), = make_authorities(params, 1, 2, seed=10)
        pk2, sk2 = authority_setup(params, 2, 2, random.Random(11))
        u = params.ctx.hash_to_scalar(b"carol")
        shares = [keygen(params, sk1, u, AccessTree(leaf(AttributeId(1, 2))), random.Random(1)),
                  keygen(params, sk2, u, AccessTree(leaf(AttributeId(2, 1))), random.Random(2))]
        m = random_message(params, random.Random(3))
        ciphertext = encrypt(params, [pk1, pk2], {1: pk1.universe(), 2: pk2.universe()}, m, random.Random(4))
        self.assertEqual(decrypt(params, shares, ciphertext), m)

    def test_invalid_setup_arguments(self) -> None:
        """Test attribute count, id and name validation."""
        params = transparent_params()
        with self.assertRaises(ValueError):
            authority_setup(params, 1, 0)
        with self.assertRaises(ValueError):
            authority_setup(params, 0, 2)
        with self.assertRaises(ValueError):
            authority_setup(params, 1, 2, attribute_names=["only-one"])
        with self.assertRaises(ValueError):
            authority_setup(params, 1, 2, attribute_names=["same", "same"])

    def test_attribute_names(self) -> None:
        """Test name lookup, index lookup and unknown names."""
        params = transparent_params()
        pk, _ = authority_setup(params, 2, 3, attribute_names=["doctor", "nurse", "admin"], name="hospital")
        self.assertEqual(pk.attribute_id("nurse"), AttributeId(2, 2))
        self.assertEqual(pk.attribute_id("3"), AttributeId(2, 3))
        self.assertEqual(pk.attribute_name(AttributeId(2, 1)), "doctor")
        with self.assertRaises(UnknownAttribute):
            pk.attribute_id("surgeon")
        with self.assertRaises(UnknownAttribute):
            pk.attribute(4)


class TestKeygen(unittest.TestCase):
    """Tests for direct key generation against the discrete-log oracle."""

    def setUp(self) -> None:
        self.params = transparent_params()
        self.ctx = self.params.ctx
        self.p = self.params.order
        (self.pk, self.sk), = make_authorities(self.params, 1, 3)
        self.u = self.ctx.hash_to_scalar(b"alice")
        self.H = self.ctx.dlog(self.params.h)
        self.H1 = self.ctx.dlog(self.params.h1)

    def _expected_dlogs(self, r, q, attribute):
        inverse = self.ctx.inverse
        sk, u, p = self.sk, self.u, self.p
        D = (-sk.alpha + self.H * sk.beta * inverse(r + u) + self.H1 * r * inverse(sk.beta + u)) % p
        D1 = self.H * inverse(r + u) % p
        Dj = self.H1 * q * inverse(sk.beta + u) * inverse(sk.t_of(attribute)) % p
        return D, D1, Dj

    def test_single_leaf_components(self) -> None:
        """Test the component discrete logs of a one-leaf key."""
        attribute = AttributeId(1, 2)
        share = keygen(self.params, self.sk, self.u, AccessTree(leaf(attribute)), random.Random(7))
        r = self.ctx.random_nonzero_scalar(random.Random(7))
        D, D1, Dj = self._expected_dlogs(r, r, attribute)
        self.assertEqual(self.ctx.dlog(share.D), D)
        self.assertEqual(self.ctx.dlog(share.D1), D1)
        self.assertEqual(self.ctx.dlog(share.Dj[attribute]), Dj)

    def test_r_resampled_when_it_cancels_u(self) -> None:
        """Test that r = -u is redrawn instead of dividing by zero."""
        attribute = AttributeId(1, 1)
        rng = ScriptedRng([(self.p - self.u) % self.p, 5])
        share = keygen(self.params, self.sk, self.u, AccessTree(leaf(attribute)), rng)
        D, D1, Dj = self._expected_dlogs(5, 5, attribute)
        self.assertEqual(self.ctx.dlog(share.D1), D1)
        self.assertEqual(self.ctx.dlog(share.D), D)
        self.assertEqual(self.ctx.dlog(share.Dj[attribute]), Dj)

    def test_degenerate_uid(self) -> None:
        """Test that u = -beta is refused."""
        tree = AccessTree(leaf(AttributeId(1, 1)))
        with self.assertRaises(DegenerateUid):
            keygen(self.params, self.sk, (-self.sk.beta) % self.p, tree)

    def test_foreign_leaf(self) -> None:
        """Test that a tree naming another authority's attribute is refused."""
        with self.assertRaises(ForeignLeaf):
            keygen(self.params, self.sk, self.u, AccessTree(leaf(AttributeId(2, 1))))
        with self.assertRaises(ForeignLeaf):
            keygen(self.params, self.sk, self.u, AccessTree(leaf(AttributeId(1, 4))))

    def test_same_uid_embedded_in_every_share(self) -> None:
        """Test that shares of two authorities both embed u (r recovered from D1)."""
        keys = make_authorities(self.params, 2, 2, seed=3)
        for k, (pk, sk) in enumerate(keys, start=1):
            self.sk = sk
            share = keygen(self.params, sk, self.u, AccessTree(leaf(AttributeId(k, 1))), random.Random(k))
            r = (self.H * self.ctx.inverse(self.ctx.dlog(share.D1)) - self.u) % self.p
            D, _, _ = self._expected_dlogs(r, r, AttributeId(k, 1))
            self.assertEqual(self.ctx.dlog(share.D), D)

    def test_keygen_counts(self) -> None:
        """Test (4 + n) exponentiations and 2 multiplications for an n-leaf tree."""
        tree = AccessTree(and_gate(*(leaf(AttributeId(1, j)) for j in (1, 2, 3))))
        with self.ctx.counting() as tally:
            keygen(self.params, self.sk, self.u, tree, random.Random(1))
        self.assertEqual(tally.counts, OpCounts(2, 7, 0))


class TestEncrypt(unittest.TestCase):
    """Tests for encryption."""

    def setUp(self) -> None:
        self.params = transparent_params()
        self.keys = make_authorities(self.params, 2, 3)
        self.pks = [pk for pk, _ in self.keys]

    def test_components_are_s_multiples(self) -> None:
        """Test C1, C2, C3 and C_j for one authority and one attribute."""
        params = self.params
        pk = self.pks[0]
        s = 123456
        m = random_message(params, random.Random(1))
        ciphertext = encrypt(params, [pk], {1: {AttributeId(1, 2)}}, m, ScriptedRng([s]))
        self.assertEqual(ciphertext.c1, m * (pk.Y ** s))
        self.assertEqual(ciphertext.c2, params.g ** s)
        self.assertEqual(ciphertext.c3, pk.Z ** s)
        self.assertEqual(ciphertext.components, {AttributeId(1, 2): pk.T[1] ** s})
        self.assertEqual(ciphertext.element_count(), (3, 1))

    def test_identity_message(self) -> None:
        """Test C1 = prod_k Y_k^s when m is the identity."""
        s = 99
        ciphertext = encrypt(self.params, self.pks, {1: {AttributeId(1, 1)}, 2: {AttributeId(2, 3)}},
                             self.params.ctx.target_identity(), ScriptedRng([s]))
        self.assertEqual(ciphertext.c1, (self.pks[0].Y ** s) * (self.pks[1].Y ** s))
        self.assertEqual(ciphertext.c3, ciphertext.c3_parts[1] * ciphertext.c3_parts[2])

    def test_encrypt_counts(self) -> None:
        """Test (2N - 1) multiplications and 1 + 2N + nN exponentiations at N = 2, n = 3."""
        m = random_message(self.params)
        with self.params.ctx.counting() as tally:
            encrypt(self.params, self.pks, {pk.authority_id: pk.universe() for pk in self.pks}, m)
        self.assertEqual(tally.counts, OpCounts(3, 11, 0))

    def test_invalid_attribute_sets(self) -> None:
        """Test empty, unknown and foreign attribute sets."""
        m = random_message(self.params)
        with self.assertRaises(EmptyAuthoritySet):
            encrypt(self.params, self.pks, {}, m)
        with self.assertRaises(EmptyAuthoritySet):
            encrypt(self.params, self.pks, {1: set()}, m)
        with self.assertRaises(UnknownAttribute):
            encrypt(self.params, self.pks, {1: {AttributeId(1, 9)}}, m)
        with self.assertRaises(UnknownAttribute):
            encrypt(self.params, self.pks, {1: {AttributeId(2, 1)}}, m)
        with self.assertRaises(UnknownAttribute):
            encrypt(self.params, self.pks, {3: {AttributeId(3, 1)}}, m)


class TestDecrypt(unittest.TestCase):
    """Tests for decryption and collusion behaviour."""

    def setUp(self) -> None:
        self.params = transparent_params()
        self.ctx = self.params.ctx
        self.rng = random.Random(42)

    def _shares(self, keys, u, trees):
        return [keygen(self.params, sk, u, trees[sk.authority_id], self.rng) for _, sk in keys]

    def test_round_trip_for_one_to_four_authorities(self) -> None:
        """Test m is recovered for N in 1..4 with random satisfied trees."""
        for count in range(1, 5):
            keys = make_authorities(self.params, count, 4, seed=count)
            trees = {pk.authority_id: parse_policy(self.rng.choice(POLICY_TEMPLATES).format(k=pk.authority_id))
                     for pk, _ in keys}
            u = self.ctx.hash_to_scalar(f"user-{count}".encode())
            shares = self._shares(keys, u, trees)
            attr_sets = {pk.authority_id: satisfying_subset(trees[pk.authority_id], pk.universe(), self.rng)
                         for pk, _ in keys}
            m = random_message(self.params, self.rng)
            ciphertext = encrypt(self.params, [pk for pk, _ in keys], attr_sets, m, self.rng)
            self.assertEqual(decrypt(self.params, shares, ciphertext), m)

    def test_unsatisfied_authority(self) -> None:
        """Test PolicyUnsatisfied names the failing authority."""
        keys = make_authorities(self.params, 2, 3)
        trees = {1: parse_policy("1:1"), 2: parse_policy("AND(2:1, 2:2)")}
        shares = self._shares(keys, 5, trees)
        ciphertext = encrypt(self.params, [pk for pk, _ in keys], {1: {AttributeId(1, 1)}, 2: {AttributeId(2, 1)}},
                             random_message(self.params))
        with self.assertRaises(PolicyUnsatisfied) as ctx:
            decrypt(self.params, shares, ciphertext)
        self.assertEqual(ctx.exception.authority_id, 2)

    def test_missing_share(self) -> None:
        """Test MissingShare when no share covers a labelling authority."""
        keys = make_authorities(self.params, 2, 2)
        shares = self._shares(keys[:1], 5, {1: parse_policy("1:1")})
        ciphertext = encrypt(self.params, [pk for pk, _ in keys], {1: {AttributeId(1, 1)}, 2: {AttributeId(2, 1)}},
                             random_message(self.params))
        with self.assertRaises(MissingShare) as ctx:
            decrypt(self.params, shares, ciphertext)
        self.assertEqual(ctx.exception.authority_id, 2)

    def test_decrypt_node_leaf_and_or_gate(self) -> None:
        """Test the leaf value e(C_j, D_j) and that a 1-of-2 gate equals its chosen child."""
        (pk, sk), = make_authorities(self.params, 1, 2)
        a, b = AttributeId(1, 1), AttributeId(1, 2)
        tree = AccessTree(or_gate(leaf(a), leaf(b)))
        u = 77
        share = keygen(self.params, sk, u, tree, random.Random(8))
        r = self.ctx.random_nonzero_scalar(random.Random(8))
        s = 31337
        ciphertext = encrypt(self.params, [pk], {1: {a, b}}, random_message(self.params), ScriptedRng([s]))
        plan = select_satisfying(tree, {a, b})
        leaf_value = self.ctx.pair(ciphertext.components[a], share.Dj[a])
        self.assertEqual(decrypt_node(self.params, plan.root, share, ciphertext), leaf_value)
        H1 = self.ctx.dlog(self.params.h1)
        expected = s * H1 * r * self.ctx.inverse(sk.beta + u) % self.params.order
        self.assertEqual(self.ctx.dlog(leaf_value), expected)

    def test_decrypt_pairing_counts(self) -> None:
        """Test 1 + 1 + n pairings at N = 1 and 2N + nN at N = 2."""
        for count, expected in ((1, 5), (2, 10)):
            keys = make_authorities(self.params, count, 3, seed=count)
            trees = {pk.authority_id: AccessTree(and_gate(*(leaf(attribute) for attribute in sorted(pk.universe()))))
                     for pk, _ in keys}
            shares = self._shares(keys, 11, trees)
            attr_sets = {pk.authority_id: pk.universe() for pk, _ in keys}
            ciphertext = encrypt(self.params, [pk for pk, _ in keys], attr_sets, random_message(self.params))
            with self.ctx.counting() as tally:
                decrypt(self.params, shares, ciphertext)
            self.assertEqual(tally.counts.pairings, expected)

    def test_component_swaps_between_users_never_decrypt(self) -> None:
        """Test every mix of D, D1 and leaf components of three users under one authority."""
        (pk, sk), = make_authorities(self.params, 1, 3)
        a, b, c = (AttributeId(1, j) for j in (1, 2, 3))
        trees = (AccessTree(and_gate(leaf(a), leaf(b))), AccessTree(and_gate(leaf(a), leaf(c))),
                 AccessTree(and_gate(leaf(a), leaf(b), leaf(c))))
        users = [keygen(self.params, sk, u, tree, self.rng) for u, tree in zip((1001, 2002, 3003), trees)]
        m = random_message(self.params, self.rng)
        ciphertext = encrypt(self.params, [pk], {1: {b, c}}, m, self.rng)
        for user in users:
            with self.assertRaises(PolicyUnsatisfied):
                decrypt(self.params, [user], ciphertext)

        forged_trees = (AccessTree(and_gate(leaf(b), leaf(c))), AccessTree(or_gate(leaf(b), leaf(c))),
                        AccessTree(leaf(b)), AccessTree(leaf(c)))
        trials = successes = 0
        for tree in forged_trees:
            holders = [[user for user in users if attribute in user.Dj] for attribute in tree.leaves()]
            for d_owner, d1_owner, *leaf_owners in itertools.product(users, users, *holders):
                Dj = {attribute: owner.Dj[attribute] for attribute, owner in zip(tree.leaves(), leaf_owners)}
                forged = UserKeyShare(1, tree, d_owner.D, d1_owner.D1, Dj)
                trials += 1
                successes += decrypt(self.params, [forged], ciphertext) == m
        self.assertEqual(trials, 108)
        self.assertEqual(successes, 0)

    def test_whole_shares_of_two_users_combine_across_authorities(self) -> None:
        """Test the known limitation: complete shares from different authorities pool across users."""
        keys = make_authorities(self.params, 2, 1)
        alice = keygen(self.params, keys[0][1], 1001, AccessTree(leaf(AttributeId(1, 1))), self.rng)
        bob = keygen(self.params, keys[1][1], 2002, AccessTree(leaf(AttributeId(2, 1))), self.rng)
        m = random_message(self.params, self.rng)
        ciphertext = encrypt(self.params, [pk for pk, _ in keys], {1: {AttributeId(1, 1)}, 2: {AttributeId(2, 1)}},
                             m, self.rng)
        self.assertEqual(decrypt(self.params, [alice, bob], ciphertext), m)


class RandomTrialMixin:
    """Random authorities, trees and attribute sets for end-to-end trials."""

    def run_trials(self, params, trials: int, max_authorities: int, max_attributes: int, max_depth: int,
                   seed: int) -> None:
        rng = random.Random(seed)
        for trial in range(trials):
            count = rng.randint(1, max_authorities)
            n = rng.randint(1, max_attributes)
            keys = [authority_setup(params, k, n, rng) for k in range(1, count + 1)]
            trees = {k: random_tree(k, n, rng.randint(1, max_depth), rng) for k in range(1, count + 1)}
            u = params.ctx.hash_to_scalar(f"user-{seed}-{trial}".encode())
            shares = [keygen(params, sk, u, trees[sk.authority_id], rng) for _, sk in keys]
            attr_sets = {pk.authority_id: satisfying_subset(trees[pk.authority_id], pk.universe(), rng)
                         for pk, _ in keys}
            m = random_message(params, rng)
            ciphertext = encrypt(params, [pk for pk, _ in keys], attr_sets, m, rng)
            self.assertEqual(decrypt(params, shares, ciphertext), m, f"trial {trial}: {trees}")


class TestRandomizedRoundTrips(RandomTrialMixin, unittest.TestCase):
    """Tests for decryption over random trees on the transparent backend."""

    def test_satisfied_policies_decrypt(self) -> None:
        """Test 190 trials with 1 to 4 authorities, up to 6 attributes each and up to 3 gate levels."""
        self.run_trials(transparent_params(), 190, 4, 6, 3, seed=2024)


class TestPolicyNames(unittest.TestCase):
    """Tests for named policy resolution."""

    def test_resolver_and_namer(self) -> None:
        """Test authority:attribute names in both directions."""
        params = transparent_params()
        pk, _ = authority_setup(params, 1, 2, attribute_names=["doctor", "nurse"], name="hospital")
        tree = parse_policy("OR(hospital:doctor, 1:2)", policy_resolver([pk]))
        self.assertEqual(tree.leaves(), (AttributeId(1, 1), AttributeId(1, 2)))
        namer = attribute_namer([pk])
        self.assertEqual(namer(AttributeId(1, 2)), "hospital:nurse")
        self.assertEqual(namer(AttributeId(5, 1)), "5:1")
        with self.assertRaises(PolicySyntaxError):
            parse_policy("hospital:surgeon", policy_resolver([pk]))
        with self.assertRaises(PolicySyntaxError):
            parse_policy("school:doctor", policy_resolver([pk]))


class TestCurveRoundTrip(RandomTrialMixin, unittest.TestCase):
    """End-to-end test on BLS12-381 (slow: real pairings)."""

    def test_single_authority_single_leaf(self) -> None:
        """Test that a one-leaf key decrypts on the curve."""
        params = global_setup(Backend.CURVE)
        pk, sk = authority_setup(params, 1, 1)
        share = keygen(params, sk, params.ctx.hash_to_scalar(b"alice"), AccessTree(leaf(AttributeId(1, 1))))
        m = random_message(params)
        ciphertext = encrypt(params, [pk], {1: pk.universe()}, m)
        self.assertEqual(decrypt(params, [share], ciphertext), m)

    def test_random_trials(self) -> None:
        """Test 10 random trials with up to 2 authorities and 3 attributes each."""
        self.run_trials(global_setup(Backend.CURVE), 10, 2, 3, 3, seed=7)


if __name__ == '__main__':
    unittest.main()
