import pytest

from mlcrelay.modulation import qpsk_gray


@pytest.fixture(scope="session")
def qpsk():
    return qpsk_gray()
