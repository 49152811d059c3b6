import pytest
import threadpoolctl


@pytest.fixture(autouse=True, scope="session")
def single_threaded_blas():
    # the test matrices are tiny; BLAS thread spin-wait dominates otherwise
    with threadpoolctl.threadpool_limits(limits=1):
        yield
