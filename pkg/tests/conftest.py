import pytest

from btfuzz import formats


@pytest.fixture(scope="session")
def mini():
    return formats.load_template("mini")


@pytest.fixture(scope="session")
def pnglite():
    return formats.load_template("pnglite")


@pytest.fixture(scope="session")
def magic16():
    return formats.load_template("magic16")


def build_mini_file(payloads: list[bytes]) -> bytes:
    """Build a valid MINI file from DATA payloads, independent of the engine."""
    out = bytearray(b"MINI")
    for p in payloads:
        out += b"\x01" + len(p).to_bytes(2, "little") + p
        out.append(sum(p) % 256)
    out += b"\xff"
    return bytes(out)


@pytest.fixture(scope="session")
def mini_file():
    return build_mini_file
