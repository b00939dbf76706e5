'''stream.py: Contains the Stream class which reads serialized dkpabe data in the following ways:
    1. From a key store or ciphertext file on disk
    2. From a Python bytes / bytearray
    3. From a Python BytesIO object
    4. From a Python BufferedReader'''

import os
from enum import Enum
from io import BufferedReader, BytesIO

from .errors import TruncatedInput


class Endianness(str, Enum):
    '''An enum class for denoting a bytes endianness (LSB or MSB)'''
    LITTLE = "little"
    BIG = "big"


class Stream:
    '''
    A class that represents a stream of serialized dkpabe data.

    Attributes:
        _buffered_reader: The buffered reader that holds the stream data.
        _stream_length:   The calculated length of the stream.
        _checksum:        The checksum calculator fed each time bytes are read.
    '''
    @staticmethod
    def from_file(filename):
        '''Creates a stream object from a given file'''
        buffered_reader = open(filename, "rb")
        return Stream.from_buffered_reader(buffered_reader, os.path.getsize(filename))

    @staticmethod
    def from_byte_array(byte_array, stream_length=None):
        '''Creates a stream object from a given byte array'''
        bytes_io = BytesIO(bytes(byte_array))
        if stream_length is None:
            stream_length = len(byte_array)

        return Stream.from_bytes_io(bytes_io, stream_length)

    @staticmethod
    def from_bytes_io(bytes_io: BytesIO, length=None):
        '''Creates a stream object from a given BytesIO object'''
        if length is None:
            length = bytes_io.getbuffer().nbytes

        return Stream.from_buffered_reader(BufferedReader(bytes_io), length)

    @staticmethod
    def from_buffered_reader(buffered_reader: BufferedReader, length=None):
        '''Creates a stream object from a given BufferedReader object'''
        if length is None:
            length = Stream.__calc_stream_size(buffered_reader)

        return Stream(buffered_reader, length)

    @staticmethod
    def __calc_stream_size(buffered_reader: BufferedReader):
        starting_position = buffered_reader.tell()
        buffered_reader.seek(0, os.SEEK_END)
        size = buffered_reader.tell()
        buffered_reader.seek(starting_position)
        return size

    def __init__(self, buffered_reader: BufferedReader, stream_length):
        self._buffered_reader = buffered_reader
        self._stream_length = stream_length
        self._checksum = None

    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.close()

    def close(self):
        '''Closes the buffered reader in the stream.'''
        self._buffered_reader.close()

    def seek(self, position: int):
        self._buffered_reader.seek(position)

    def position(self):
        '''Returns the current position in the stream.'''
        return self._buffered_reader.tell()

    def get_length(self):
        '''Returns the total length of the stream.'''
        return self._stream_length

    def remaining(self):
        return self._stream_length - self.position()

    def at_end(self):
        return self.position() >= self._stream_length

    def read_bytes(self, num_bytes: int):
        '''Reads the given amount of bytes from the stream.'''
        if num_bytes < 0 or num_bytes > self.remaining():
            raise TruncatedInput(f"Need {num_bytes} bytes at position {self.position()}, "
                                 f"only {self.remaining()} remain")

        read_bytes = self._buffered_reader.read(num_bytes)
        if len(read_bytes) != num_bytes:
            raise TruncatedInput(f"Short read at position {self.position()}")

        if self._checksum is not None:
            self._checksum.add_bytes(read_bytes, 0, num_bytes)

        return read_bytes

    def read_byte(self):
        return self.read_bytes(1)[0]

    def read_uint_16(self, endianness: Endianness = Endianness.BIG):
        return int.from_bytes(self.read_bytes(2), endianness.value)

    def read_uint_32(self, endianness: Endianness = Endianness.BIG):
        return int.from_bytes(self.read_bytes(4), endianness.value)

    def read_prefixed(self):
        '''Reads a 4-byte big-endian length followed by that many bytes.'''
        return self.read_bytes(self.read_uint_32())

    def read_string(self):
        return self.read_prefixed().decode("utf-8")

    def read_big_int(self):
        '''Reads a length-prefixed big-endian unsigned integer.'''
        return int.from_bytes(self.read_prefixed(), "big")

    def read_rest(self):
        return self.read_bytes(self.remaining())

    def get_checksum(self):
        return self._checksum

    def set_checksum(self, checksum):
        '''Sets the checksum calculator fed by every read, or None to stop feeding.'''
        self._checksum = checksum


def prefixed(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + bytes(data)


def prefixed_string(text: str) -> bytes:
    return prefixed(text.encode("utf-8"))


def prefixed_big_int(value: int) -> bytes:
    if value < 0:
        raise ValueError("Only unsigned integers can be encoded")
    return prefixed(value.to_bytes((value.bit_length() + 7) // 8 or 1, "big"))
