'''test_hybrid.py: Contains the set of tests for the hybrid file format.'''

import os
import random
import tempfile
import unittest
from io import BytesIO

from dkpabe.access import AccessTree, AttributeId, leaf
from dkpabe.errors import (AuthenticationFailed, BackendMismatch, BadMagic, DecryptionMismatch, PolicyUnsatisfied)
from dkpabe.hybrid import CHUNK_SIZE, decrypt_file, hybrid_decrypt, hybrid_encrypt, read_header
from dkpabe.kpabe import authority_setup, keygen
from dkpabe.stream import Stream
from tests.helpers import (make_authorities, random_tree, satisfying_subset, transparent_params,
                           unsatisfying_subset)

SEALED_CHUNK = 4 + CHUNK_SIZE + 16


class HybridTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.params = transparent_params()
        ((self.pk, self.sk),) = make_authorities(self.params, 1, 3, seed=50)
        self.share = keygen(self.params, self.sk, 1234, AccessTree(leaf(AttributeId(1, 1))), random.Random(1))
        self.rng = random.Random(2)

    def _encrypt(self, payload: bytes, label: bytes = b"") -> bytes:
        return hybrid_encrypt(self.params, [self.pk], {1: {AttributeId(1, 1), AttributeId(1, 2)}}, payload,
                              self.rng, label)

    def _payload(self, size: int) -> bytes:
        return self.rng.randbytes(size)


class TestHybrid(HybridTestCase):
    """Tests for hybrid encryption of byte payloads."""

    def test_payload_sizes(self) -> None:
        """Test empty, exact-multiple and ragged payloads."""
        for size in (0, 1, CHUNK_SIZE, 2 * CHUNK_SIZE, 3 * CHUNK_SIZE + 17):
            payload = self._payload(size)
            self.assertEqual(hybrid_decrypt(self.params, [self.share], self._encrypt(payload)), payload)

    def test_label_is_in_header(self) -> None:
        """Test that the label is stored in the clear."""
        data = self._encrypt(b"payload", b"quarterly-report")
        with Stream.from_byte_array(data) as stream:
            self.assertEqual(read_header(stream, self.params).label, b"quarterly-report")

    def test_policy_not_satisfied(self) -> None:
        """Test that a share for another attribute cannot open the file."""
        share = keygen(self.params, self.sk, 1234, AccessTree(leaf(AttributeId(1, 3))), random.Random(3))
        with self.assertRaises(PolicyUnsatisfied):
            hybrid_decrypt(self.params, [share], self._encrypt(b"secret"))

    def test_random_unsatisfied_policies(self) -> None:
        """Test 100 random files where at least one authority's tree fails: never a plaintext."""
        rng = random.Random(77)
        for trial in range(100):
            count = rng.randint(1, 4)
            n = rng.randint(2, 6)
            keys = [authority_setup(self.params, k, n, rng) for k in range(1, count + 1)]
            failing = set(rng.sample(range(1, count + 1), rng.randint(1, count)))
            trees, attr_sets = {}, {}
            for pk, _ in keys:
                k = pk.authority_id
                if k in failing:
                    trees[k] = random_tree(k, n, rng.randint(1, 3), rng, spare=1)
                    attr_sets[k] = unsatisfying_subset(trees[k], pk.universe(), rng)
                else:
                    trees[k] = random_tree(k, n, rng.randint(1, 3), rng)
                    attr_sets[k] = satisfying_subset(trees[k], pk.universe(), rng)
            shares = [keygen(self.params, sk, 4321 + trial, trees[sk.authority_id], rng) for _, sk in keys]
            data = hybrid_encrypt(self.params, [pk for pk, _ in keys], attr_sets, rng.randbytes(rng.randrange(300)),
                                  rng)
            with self.assertRaises(PolicyUnsatisfied) as raised:
                hybrid_decrypt(self.params, shares, data)
            self.assertIn(raised.exception.authority_id, failing)

    def test_decrypt_file(self) -> None:
        """Test decryption straight from disk."""
        payload = self._payload(CHUNK_SIZE + 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "report.dkhy")
            with open(path, "wb") as handle:
                handle.write(self._encrypt(payload))
            out = BytesIO()
            self.assertEqual(decrypt_file(self.params, [self.share], path, out), len(payload))
        self.assertEqual(out.getvalue(), payload)


class TestHybridTampering(HybridTestCase):
    """Tests for damaged and manipulated hybrid files."""

    def setUp(self) -> None:
        super().setUp()
        self.payload = self._payload(2 * CHUNK_SIZE + 5)
        self.data = self._encrypt(self.payload, b"label")

    def _decrypt(self, data: bytes) -> bytes:
        return hybrid_decrypt(self.params, [self.share], data)

    def _header_size(self) -> int:
        with Stream.from_byte_array(self.data) as stream:
            return len(read_header(stream, self.params).to_bytes())

    def test_flipped_chunk_byte(self) -> None:
        """Test that any changed ciphertext byte fails authentication."""
        data = bytearray(self.data)
        data[-1] ^= 0x01
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(bytes(data))

    def test_changed_label(self) -> None:
        """Test that the label is bound to the key."""
        data = self.data.replace(b"label", b"LABEL", 1)
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(data)

    def test_changed_key_check(self) -> None:
        """Test that a wrong key check value is a decryption mismatch."""
        data = bytearray(self.data)
        data[self._header_size() - 1] ^= 0x01
        with self.assertRaises(DecryptionMismatch):
            self._decrypt(bytes(data))

    def test_truncated(self) -> None:
        """Test that a cut inside the last chunk fails."""
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(self.data[:-1])

    def test_dropped_final_chunk(self) -> None:
        """Test that removing the whole final chunk is detected."""
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(self.data[:-(4 + 5 + 16)])

    def test_reordered_chunks(self) -> None:
        """Test that swapping the two full chunks fails authentication."""
        start = self._header_size()
        first = self.data[start:start + SEALED_CHUNK]
        second = self.data[start + SEALED_CHUNK:start + 2 * SEALED_CHUNK]
        data = self.data[:start] + second + first + self.data[start + 2 * SEALED_CHUNK:]
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(data)

    def test_appended_data(self) -> None:
        """Test that bytes after the final chunk are refused."""
        with self.assertRaises(AuthenticationFailed):
            self._decrypt(self.data + b"\x00")

    def test_bad_magic(self) -> None:
        """Test that other files are reported as such."""
        with self.assertRaises(BadMagic):
            self._decrypt(b"XXXX" + self.data[4:])

    def test_other_backend(self) -> None:
        """Test that a curve-tagged file is refused."""
        data = bytearray(self.data)
        data[5] = 0x01
        with self.assertRaises(BackendMismatch):
            self._decrypt(bytes(data))


if __name__ == '__main__':
    unittest.main()
