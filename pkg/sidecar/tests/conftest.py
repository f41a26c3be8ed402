"""Shared fixtures: a tiny deterministic model and one served app instance.

The model is a randomly initialized two-layer GPT-2 over a word-level
vocabulary built from the prompts and fixtures the tests exercise. Nothing
is downloaded; generations are gibberish but deterministic, which is all
the protocol checks need.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager

import pytest
import torch
import uvicorn
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from pecan.providers import templates
from pecan.providers.conformance import FIXTURE_BATCH, FIXTURE_QUERY
from pecan.providers.http import EndpointConfig, HttpProvider
from pecan_sidecar import EngineConfig, InferenceEngine, create_app

INTEGRATION_DOC = (
    "The lighthouse keeper climbed the spiral stairs every evening before dusk"
    " settled over the rocky shore. Gulls wheeled above the tower while the lamp"
    " turned slowly behind its thick glass panes. Fishing boats followed the beam"
    " home through the narrow channel between the reefs. "
    "In winter the storms threw spray over the gallery rail and the keeper logged"
    " each passing ship in a leather book. The village below kept a light burning"
    " in the chapel window as a second mark for the sailors. Supplies arrived"
    " once a month on a flat barge that moored at the stone jetty. "
    "When the fog rolled in the keeper wound the clockwork horn and its long note"
    " carried across the water for miles. Children from the village carried"
    " bread and letters up the cliff path on calm mornings. After forty years"
    " the lamp was changed for an electric one and the keeper retired to a"
    " cottage by the harbor where he still watched the beam sweep past his"
    " window every night."
)

TEST_ENGINE_SETTINGS = dict(
    window=512,
    max_sessions=8,
    summary_max_new=24,
    answer_max_new=12,
)


def _seed_words() -> list[str]:
    parts = [
        templates.get_template(tid)
        for tid in (templates.SUMMARIZE_V1, templates.DECIDE_V1, templates.ANSWER_V1)
    ]
    parts += [item.text for item in FIXTURE_BATCH]
    parts += [FIXTURE_QUERY, INTEGRATION_DOC, "Yes No Answer"]
    pieces = pre_tokenizers.Whitespace().pre_tokenize_str(" ".join(parts))
    return sorted({surface for surface, _ in pieces})


@pytest.fixture(scope="session")
def tiny_tokenizer():
    vocab = {"[PAD]": 0, "[UNK]": 1, "[EOS]": 2}
    for word in _seed_words():
        vocab.setdefault(word, len(vocab))
    core = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    core.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=core,
        unk_token="[UNK]",
        pad_token="[PAD]",
        eos_token="[EOS]",
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_tokenizer):
    torch.manual_seed(0)
    config = GPT2Config(
        vocab_size=len(tiny_tokenizer.get_vocab()),
        n_positions=512,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=2,
        eos_token_id=2,
        attn_implementation="eager",
    )
    return GPT2LMHeadModel(config).eval()


@pytest.fixture(scope="session")
def engine(tiny_model, tiny_tokenizer):
    return InferenceEngine(tiny_model, tiny_tokenizer, EngineConfig(**TEST_ENGINE_SETTINGS))


@pytest.fixture
def make_engine(tiny_model, tiny_tokenizer):
    """Engine factory for tests that need their own window or capacity."""

    def _make(**overrides):
        settings = {**TEST_ENGINE_SETTINGS, **overrides}
        return InferenceEngine(tiny_model, tiny_tokenizer, EngineConfig(**settings))

    return _make


@contextmanager
def serve(engine):
    """Run the app for this engine on an ephemeral local port."""
    config = uvicorn.Config(create_app(engine), host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("test server did not start in 15s")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)


@pytest.fixture(scope="session")
def server_url(engine):
    with serve(engine) as url:
        yield url


@pytest.fixture
def provider(server_url):
    handle = HttpProvider(EndpointConfig(base_url=server_url))
    yield handle
    handle.close()
