import pytest

from chainads.codec import DecodeError, Reader, Writer


def test_fields():
    data = Writer().raw(b"MAGIC").u8(7).u16(513).u32(2 ** 31).u64(2 ** 63).blob(b"xyz").text("Benz").getvalue()
    reader = Reader(data)

    reader.expect_magic(b"MAGIC")
    assert (reader.u8(), reader.u16(), reader.u32(), reader.u64()) == (7, 513, 2 ** 31, 2 ** 63)
    assert reader.blob() == b"xyz"
    assert reader.text() == "Benz"
    assert reader.remaining == 0
    reader.expect_end()


def test_little_endian():
    assert Writer().u32(1).getvalue() == b"\x01\x00\x00\x00"


def test_errors():
    with pytest.raises(DecodeError):
        Reader(b"\x01").u16()
    with pytest.raises(DecodeError):
        Reader(b"NOPE").expect_magic(b"MAGIC")
    with pytest.raises(DecodeError):
        Reader(Writer().blob(b"\xff\xfe").getvalue()).text()
    with pytest.raises(DecodeError):
        Reader(Writer().u32(10).getvalue()).blob()
    with pytest.raises(DecodeError):
        Reader(b"\x00").expect_end()
