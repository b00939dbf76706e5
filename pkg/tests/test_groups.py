'''test_groups.py: Contains the set of tests for the bilinear group layer.'''

import random
import unittest
from collections import Counter

from dkpabe.errors import BackendMismatch, FormatError, UnsupportedParameters
from dkpabe.groups import (Backend, GroupContext, OpCounts, counters_snapshot, exp, hash_to_scalar, pair,
                           reset_counters)
from dkpabe.kpabe import global_setup
from tests.helpers import BLS_ORDER, DEFAULT_ORDER, MEDIUM_ORDER, SMALL_ORDER, transparent_params


class TestTransparentArithmetic(unittest.TestCase):
    """Tests for group arithmetic on the discrete-log oracle backend."""

    def setUp(self) -> None:
        self.params = transparent_params(SMALL_ORDER)
        self.ctx = self.params.ctx
        self.g = self.params.g

    def test_pairing_multiplies_exponents(self) -> None:
        """Test that e(g^7, g^9) = e(g,g)^63 at p = 101."""
        value = pair(self.g ** 7, self.g ** 9)
        self.assertEqual(value, self.params.egg ** 63)
        self.assertEqual(self.ctx.dlog(value), 63)

    def test_pairing_is_bilinear(self) -> None:
        """Test e(g^a, g^b) = e(g,g)^(ab) over a grid of exponents."""
        for a in (0, 1, 2, 50, 100):
            for b in (1, 3, 99):
                self.assertEqual(pair(self.g ** a, self.g ** b), self.params.egg ** (a * b))

    def test_pairing_is_non_degenerate(self) -> None:
        """Test that e(g, g) is not the target identity."""
        self.assertFalse(self.params.egg.is_identity())

    def test_zero_exponent_pairs_to_identity(self) -> None:
        """Test that e(g^0, y) is the target identity."""
        self.assertTrue(pair(self.g ** 0, self.params.h).is_identity())

    def test_exponentiation(self) -> None:
        """Test the identity, zero and composed exponents."""
        self.assertEqual(exp(self.g, 1), self.g)
        self.assertTrue(exp(self.g, 0).is_identity())
        self.assertEqual(self.ctx.dlog(exp(self.g ** 3, 5)), 15)
        self.assertTrue((self.g ** SMALL_ORDER).is_identity())
        self.assertEqual(self.g ** -1, self.ctx.source_identity() / self.g)

    def test_division(self) -> None:
        """Test that division subtracts discrete logs."""
        self.assertEqual((self.g ** 10) / (self.g ** 3), self.g ** 7)
        self.assertEqual(self.params.egg / self.params.egg, self.ctx.target_identity())

    def test_generators_are_distinct_and_consistent(self) -> None:
        """Test that g, h, h1 differ and every mirrored element has one discrete log."""
        params = self.params
        self.assertNotEqual(params.g, params.h)
        self.assertNotEqual(params.h, params.h1)
        self.assertNotEqual(params.g, params.h1)
        for element in (params.g, params.h, params.h1, params.h ** 17 * params.g):
            self.assertTrue(self.ctx.is_consistent(element))


class TestOperationCounters(unittest.TestCase):
    """Tests for the per-context operation counters."""

    def setUp(self) -> None:
        self.params = transparent_params(MEDIUM_ORDER)
        self.ctx = self.params.ctx
        reset_counters(self.ctx)

    def test_reset(self) -> None:
        """Test that a reset context reports no operations."""
        _ = self.params.g ** 5
        reset_counters(self.ctx)
        self.assertEqual(counters_snapshot(self.ctx), OpCounts(0, 0, 0))

    def test_one_pairing(self) -> None:
        """Test that one pair() call counts one pairing and nothing else."""
        pair(self.params.g, self.params.h)
        self.assertEqual(counters_snapshot(self.ctx), OpCounts(0, 0, 1))

    def test_division_counts_one_multiplication(self) -> None:
        """Test that a / b counts as one multiplication."""
        with self.ctx.counting() as tally:
            _ = self.params.g / self.params.h
        self.assertEqual(tally.counts, OpCounts(1, 0, 0))

    def test_mixed_operations(self) -> None:
        """Test the tally of a small expression."""
        g, h = self.params.g, self.params.h
        with self.ctx.counting() as tally:
            _ = pair(g ** 2 * h, h ** 3) ** 4
        self.assertEqual(tally.counts, OpCounts(1, 3, 1))

    def test_contexts_count_independently(self) -> None:
        """Test that work in another context leaves this one untouched."""
        other = GroupContext.create(Backend.TRANSPARENT, MEDIUM_ORDER)
        _ = other.generator() ** 3
        self.assertEqual(counters_snapshot(self.ctx), OpCounts())
        self.assertEqual(counters_snapshot(other), OpCounts(0, 1, 0))


class TestHashToScalar(unittest.TestCase):
    """Tests for hashing bytes onto scalars."""

    def test_empty_input_vectors(self) -> None:
        """Test the regression vectors of the empty input."""
        self.assertEqual(hash_to_scalar(b"", DEFAULT_ORDER), 640167604)
        self.assertEqual(hash_to_scalar(b"", SMALL_ORDER), 27)
        self.assertEqual(hash_to_scalar(b"", MEDIUM_ORDER), 110)
        self.assertEqual(hash_to_scalar(b"", BLS_ORDER),
                         36837977923004598586801305053854790336569721007264186492525083490862419013340)

    def test_deterministic(self) -> None:
        """Test that equal inputs hash to equal scalars."""
        ctx = transparent_params().ctx
        self.assertEqual(ctx.hash_to_scalar(b"alice"), ctx.hash_to_scalar(b"alice"))

    def test_distinct_inputs(self) -> None:
        """Test that distinct inputs give distinct scalars."""
        values = {hash_to_scalar(f"gid-{i}".encode(), DEFAULT_ORDER) for i in range(200)}
        self.assertEqual(len(values), 200)

    def test_range(self) -> None:
        """Test that results lie in [0, p)."""
        for i in range(300):
            self.assertTrue(0 <= hash_to_scalar(bytes([i % 256]) * (i + 1), SMALL_ORDER) < SMALL_ORDER)


class TestRandomScalars(unittest.TestCase):
    """Tests for scalar sampling."""

    def setUp(self) -> None:
        self.ctx = transparent_params(SMALL_ORDER).ctx

    def test_seeded_rng_is_reproducible(self) -> None:
        """Test that a fixed seed gives a fixed sequence."""
        first_rng, second_rng = random.Random(5), random.Random(5)
        first = [self.ctx.random_scalar(first_rng) for _ in range(20)]
        second = [self.ctx.random_scalar(second_rng) for _ in range(20)]
        self.assertEqual(first, second)

    def test_uniformity(self) -> None:
        """Test a chi-square sanity bound over 10^4 draws at p = 101."""
        rng = random.Random(2024)
        draws = 10000
        counts = Counter(self.ctx.random_scalar(rng) for _ in range(draws))
        expected = draws / SMALL_ORDER
        chi_square = sum((counts.get(value, 0) - expected) ** 2 / expected for value in range(SMALL_ORDER))
        # 100 degrees of freedom; 170 is far in the tail
        self.assertLess(chi_square, 170)
        self.assertEqual(set(counts), set(range(SMALL_ORDER)))

    def test_nonzero_scalars(self) -> None:
        """Test that nonzero sampling never returns zero."""
        rng = random.Random(9)
        self.assertNotIn(0, {self.ctx.random_nonzero_scalar(rng) for _ in range(3000)})


class TestBackendSeparation(unittest.TestCase):
    """Tests for backend and parameter validation."""

    def test_mixing_contexts_raises(self) -> None:
        """Test that elements of different orders never combine."""
        small = transparent_params(SMALL_ORDER)
        medium = transparent_params(MEDIUM_ORDER)
        with self.assertRaises(BackendMismatch):
            _ = small.g * medium.g
        with self.assertRaises(BackendMismatch):
            pair(small.g, medium.g)

    def test_pairing_rejects_target_elements(self) -> None:
        """Test that only source elements can be paired."""
        params = transparent_params(SMALL_ORDER)
        with self.assertRaises(BackendMismatch):
            params.ctx.pair(params.egg, params.g)

    def test_curve_has_fixed_order(self) -> None:
        """Test that the curve backend refuses a custom order."""
        with self.assertRaises(UnsupportedParameters):
            GroupContext.create(Backend.CURVE, order=SMALL_ORDER)

    def test_transparent_needs_prime_order(self) -> None:
        """Test that composite or tiny orders are refused."""
        for order in (100, 3, 1001):
            with self.assertRaises(UnsupportedParameters):
                GroupContext.create(Backend.TRANSPARENT, order)

    def test_dlog_only_on_transparent(self) -> None:
        """Test that the discrete-log helper reports the generator's log."""
        params = transparent_params(SMALL_ORDER)
        self.assertEqual(params.ctx.dlog(params.g), 1)
        self.assertEqual(params.ctx.dlog(params.egg), 1)


class TestElementEncoding(unittest.TestCase):
    """Tests for the tagged element encoding."""

    def setUp(self) -> None:
        self.params = transparent_params(SMALL_ORDER)
        self.ctx = self.params.ctx

    def test_decode_encoded_elements(self) -> None:
        """Test that source and target elements decode to themselves."""
        for element in (self.params.g ** 42, self.params.h1, self.params.egg ** 5):
            self.assertEqual(self.ctx.element_from_bytes(element.to_bytes()), element)

    def test_wrong_backend_tag(self) -> None:
        """Test that a curve-tagged element is refused by a transparent context."""
        data = bytearray(self.params.g.to_bytes())
        data[0] = 0x01
        with self.assertRaises(BackendMismatch):
            self.ctx.element_from_bytes(bytes(data))

    def test_trailing_bytes(self) -> None:
        """Test that bytes after an element are a format error."""
        with self.assertRaises(FormatError):
            self.ctx.element_from_bytes(self.params.g.to_bytes() + b"\x00")

    def test_out_of_range_value(self) -> None:
        """Test that a value at or above p is refused."""
        data = bytearray(self.params.g.to_bytes())
        data[3] = 200
        with self.assertRaises(FormatError):
            self.ctx.element_from_bytes(bytes(data))

    def test_truncated_element(self) -> None:
        """Test that a short element is a format error."""
        with self.assertRaises(FormatError):
            self.ctx.element_from_bytes(self.params.g.to_bytes()[:-1])


class TestCurveBackend(unittest.TestCase):
    """Tests for the BLS12-381 backend (slow: real pairings)."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.params = global_setup(Backend.CURVE)

    def test_bilinearity(self) -> None:
        """Test e(g^3, h^5) = e(g, h)^15 on the curve."""
        params = self.params
        self.assertEqual(pair(params.g ** 3, params.h ** 5), pair(params.g, params.h) ** 15)

    def test_generator_is_consistent(self) -> None:
        """Test that both halves of g^7 share one discrete log."""
        self.assertTrue(self.params.ctx.is_consistent(self.params.g ** 7))

    def test_encoding(self) -> None:
        """Test that curve elements decode to themselves."""
        ctx = self.params.ctx
        for element in (self.params.g ** 11, self.params.h1):
            self.assertEqual(ctx.element_from_bytes(element.to_bytes()), element)

    def test_invalid_point(self) -> None:
        """Test that an x-coordinate above the field modulus is a format error."""
        data = bytearray(self.params.g.to_bytes())
        data[3:51] = ((1 << 383) | ((1 << 381) - 1)).to_bytes(48, "big")
        with self.assertRaises(FormatError):
            self.params.ctx.element_from_bytes(bytes(data))

    def test_rejects_over_128_bits(self) -> None:
        """Test that a higher security level is refused."""
        with self.assertRaises(UnsupportedParameters):
            global_setup(Backend.CURVE, security_param=256)


if __name__ == '__main__':
    unittest.main()
