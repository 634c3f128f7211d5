import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthpipe import gateway  # noqa: E402

import world  # noqa: E402


@pytest.fixture
def world_scripts():
    gateway.register_script(world.INSTRUCTOR_SCRIPT, world.instructor_script)
    gateway.register_script(world.BASE_SCRIPT, world.base_script)
    gateway.register_embedding_script(world.EMBED_SCRIPT,
                                      world.basis_embedding)
    yield
    gateway.unregister_script(world.INSTRUCTOR_SCRIPT)
    gateway.unregister_script(world.BASE_SCRIPT)
    gateway.unregister_embedding_script(world.EMBED_SCRIPT)


@pytest.fixture
def toy_corpus_path():
    return str(resources.files("synthpipe") / "data" / "toy_corpus.jsonl")
