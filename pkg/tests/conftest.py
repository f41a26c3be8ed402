import json
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import settings

from pecan.evaluation import load_dataset
from pecan.graph import BuildConfig, Edge, HWDAG, IPNode
from pecan.ingest import load_jsonl_corpus
from pecan.providers import MockProvider
from pecan.tokenizers import WHITESPACE_PUNCT_ID, get_tokenizer

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


def _data_path(name: str) -> Path:
    return Path(str(resources.files("pecan") / "data" / "toy" / name))


@pytest.fixture(scope="session")
def tokenizer():
    return get_tokenizer(WHITESPACE_PUNCT_ID)


@pytest.fixture(scope="session")
def toy_corpus_path() -> Path:
    return _data_path("corpus.jsonl")


@pytest.fixture(scope="session")
def toy_queries_path() -> Path:
    return _data_path("queries.jsonl")


@pytest.fixture(scope="session")
def toy_corpus(toy_corpus_path):
    return load_jsonl_corpus(toy_corpus_path)


@pytest.fixture(scope="session")
def toy_dataset(toy_queries_path):
    return load_dataset(toy_queries_path)


@pytest.fixture(scope="session")
def toy_build_cfg():
    # 100-token chunks line up with the toy corpus paragraphs.
    return BuildConfig(chunk_size_tokens=100, batch_threshold_s=8000, min_levels=2)


@pytest.fixture
def mock_provider():
    return MockProvider(seed=0)


@pytest.fixture
def worked_graph():
    """The two-level fixture used throughout: top {a, b} over {c, d}.

    Ids are dense and level-major: c=0, d=1 (level 1), a=2, b=3 (level 2).
    """
    nodes = [
        IPNode(id=0, level=1, text="c text", token_count=2, source="chunk"),
        IPNode(id=1, level=1, text="d text", token_count=2, source="chunk"),
        IPNode(id=2, level=2, text="a text", token_count=2, source="generated"),
        IPNode(id=3, level=2, text="b text", token_count=2, source="generated"),
    ]
    edges = [
        Edge(src=2, dst=0, weight=0.7),
        Edge(src=2, dst=1, weight=0.3),
        Edge(src=3, dst=1, weight=1.0),
    ]
    return HWDAG(nodes, edges, meta={"doc_id": "fixture"})


@pytest.fixture(scope="session")
def toy_graph(toy_corpus, toy_build_cfg):
    from pecan.builder import build_graph

    doc = toy_corpus["harbor"]
    graph, _ = build_graph(doc, MockProvider(seed=0), toy_build_cfg)
    return graph


def load_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
