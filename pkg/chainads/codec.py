import struct

from chainads.errors import ChainAdsError


class Writer:
    """
    Little-endian binary writer shared by every on-disk and wire format of the package.
    """
    def __init__(self):
        self._parts = list()

    def raw(self, data):
        self._parts.append(bytes(data))
        return self

    def u8(self, value):
        return self.raw(struct.pack("<B", value))

    def u16(self, value):
        return self.raw(struct.pack("<H", value))

    def u32(self, value):
        return self.raw(struct.pack("<I", value))

    def u64(self, value):
        return self.raw(struct.pack("<Q", value))

    def blob(self, data):
        """
        Length prefixed (u32) byte string.
        """
        return self.u32(len(data)).raw(data)

    def text(self, value):
        return self.blob(value.encode("utf-8"))

    def getvalue(self):
        return b"".join(self._parts)


class Reader:
    """
    Counterpart of `Writer`. Every read past the end raises `DecodeError`.
    """
    def __init__(self, data):
        self._data = memoryview(bytes(data))
        self._offset = 0

    def raw(self, size):
        if size < 0 or self._offset + size > len(self._data):
            raise DecodeError(f"truncated input: need {size} bytes at offset {self._offset}")

        chunk = self._data[self._offset:self._offset + size].tobytes()
        self._offset += size
        return chunk

    def u8(self):
        return struct.unpack("<B", self.raw(1))[0]

    def u16(self):
        return struct.unpack("<H", self.raw(2))[0]

    def u32(self):
        return struct.unpack("<I", self.raw(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.raw(8))[0]

    def blob(self):
        return self.raw(self.u32())

    def text(self):
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError("invalid utf-8 string") from e

    def expect_magic(self, magic):
        found = self.raw(len(magic))
        if found != magic:
            raise DecodeError(f"bad magic bytes {found!r}, expected {magic!r}")

    def expect_end(self):
        if self.remaining:
            raise DecodeError(f"{self.remaining} trailing bytes")

    @property
    def remaining(self):
        return len(self._data) - self._offset


class DecodeError(ChainAdsError):
    pass
