'''checksum.py: Contains the ChecksumCalculator class used to seal key store entries and hybrid headers.'''

import hashlib

CHECKSUM_SIZE = 4


class ChecksumCalculator:
    '''A class for calculating the integrity checksum of a serialized entry (truncated BLAKE2b).'''

    def __init__(self) -> None:
        self._digest = hashlib.blake2b(digest_size=CHECKSUM_SIZE, person=b"dkpabe-entry")
        self._bytes_seen = 0

    def get_checksum(self) -> bytes:
        '''Returns the checksum of every byte added so far.'''
        return self._digest.copy().digest()

    def bytes_seen(self):
        return self._bytes_seen

    def add_bytes(self, buffer, start, end):
        '''Adds another chunk of bytes for calculating the checksum.'''
        self._digest.update(bytes(buffer[start:end]))
        self._bytes_seen += end - start

        return self.get_checksum()

    @staticmethod
    def calculate_checksum(buffer, start: int = 0, end: int = None):
        '''Calculates the checksum of a given buffer from the given starting index to the ending index.'''
        calculator = ChecksumCalculator()
        return calculator.add_bytes(buffer, start, len(buffer) if end is None else end)
