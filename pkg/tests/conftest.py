import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("AAS_LAB_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set AAS_LAB_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _detach_stderr_log_handler():
    """Drop the package's stderr log handler after each test.

    pytest closes its per-test capture streams; a handler left pointing at one
    would fail when configure_logging re-targets it in a later test.
    """
    yield
    import logging

    from aas_lab.api import _STDERR_HANDLER

    pkg_logger = logging.getLogger("aas_lab")
    for handler in list(pkg_logger.handlers):
        if handler.get_name() == _STDERR_HANDLER:
            pkg_logger.removeHandler(handler)
