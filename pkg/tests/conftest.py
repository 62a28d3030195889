import pathlib

import pytest

from famrisk.kb import load_bundle
from famrisk.kb.io import ensure_synth_bundle


@pytest.fixture(scope="session")
def bundle_path(tmp_path_factory) -> pathlib.Path:
    cache = tmp_path_factory.mktemp("bundles")
    return ensure_synth_bundle(cache)


@pytest.fixture(scope="session")
def kb(bundle_path):
    return load_bundle(bundle_path)
