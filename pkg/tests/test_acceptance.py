"""Acceptance gate: one test per release criterion, run at stated tolerances.

Each test prints a single [PASS]/[FAIL] line naming its criterion, so a
verbose run reads as a checklist. Tolerances and runtime ceilings are
asserted, not aspirational.
"""

import time

import numpy as np
import pytest

from metric_oracles import FLOPS_ORACLES, METRIC_ORACLES
from pecan.builder import build_graph
from pecan.evaluation import GraphStore, run_sweep
from pecan.graph import BuildConfig, Edge, HWDAG, IPNode, dumps, save
from pecan.ingest import Document
from pecan.metrics import flops_estimate, rouge_l, token_f1
from pecan.providers import MockProvider, templates
from pecan.search import SearchConfig, retrieval_scores, run_search
from pecan.tokenizers import WHITESPACE_PUNCT_ID, get_tokenizer

Y = (1.0, 0.0)
N = (0.0, 1.0)
QUERY = "Where does the harbor master keep the tide ledger?"


def conclude(name, failures):
    if failures:
        shown = "; ".join(failures[:5])
        print(f"[FAIL] {name}: {shown}")
        pytest.fail(f"{name}: {shown}")
    print(f"[PASS] {name}")


# (label, decision script, config overrides,
#  expected decisions, expected retrievals, expected stop reason)
STOPPING_CASES = [
    ("immediate yes", [Y], dict(), 1, 0, "confident"),
    ("one no then yes", [N, Y], dict(), 2, 1, "confident"),
    ("two nos then yes", [N, N, Y], dict(), 3, 2, "confident"),
    ("three nos then yes", [N, N, N, Y], dict(), 4, 3, "confident"),
    ("patience two consecutive", [Y, Y], dict(t_n=2), 2, 1, "confident"),
    ("patience interrupted", [Y, N, Y], dict(t_n=2), 3, 2, "confident"),
    ("patience late start", [N, Y, N, Y], dict(t_n=2), 4, 3, "confident"),
    ("patience long gap", [Y, N, N, Y], dict(t_n=2), 4, 3, "confident"),
    ("patience four straight", [Y, Y, Y, Y], dict(t_n=4), 4, 3, "confident"),
    ("patience four with noes", [N, Y, Y, N, Y, Y], dict(t_n=4), 6, 5, "confident"),
    ("patience three tally", [N, Y, N, Y, Y], dict(t_n=3), 5, 4, "confident"),
    ("boundary equality continues", [(0.55, 0.45), Y], dict(t_p=0.55), 2, 1, "confident"),
    ("just above boundary stops", [(0.551, 0.449)], dict(t_p=0.55), 1, 0, "confident"),
    ("renormalized mass stops", [(0.6, 0.2)], dict(t_p=0.74), 1, 0, "confident"),
    ("renormalized mass continues", [(0.6, 0.2), Y], dict(t_p=0.76), 2, 1, "confident"),
    ("low confidence continues", [(0.51, 0.49), Y], dict(t_p=0.55), 2, 1, "confident"),
    ("zero mass reads even, stops", [(0.0, 0.0)], dict(t_p=0.4), 1, 0, "confident"),
    ("zero mass reads even, continues", [(0.0, 0.0), Y], dict(), 2, 1, "confident"),
    ("cap before confidence", [(0.9, 0.1)] * 3, dict(t_p=0.95, max_retrievals=2), 3, 2, "budget"),
    ("cap with partial patience", [Y, N], dict(t_n=2, max_retrievals=1), 2, 1, "budget"),
    ("zero cap", [Y], dict(t_n=2, max_retrievals=0), 1, 0, "budget"),
    ("fixed budget three", [N] * 4, dict(dynamic_control=False, fixed_budget=3), 0, 3, "fixed"),
    ("fixed budget zero", [N], dict(dynamic_control=False, fixed_budget=0), 0, 0, "fixed"),
]


def run_stopping_case(toy_graph, script, overrides):
    cfg = SearchConfig(**{"t_p": 0.5, **overrides})
    return run_search(toy_graph, QUERY, MockProvider(decision_script=list(script)), cfg)


VOCAB = [f"w{i}" for i in range(60)] + [
    "harbor", "ledger", "tide", "stone", "tower", "north", "lantern",
]


def random_document(rng, i):
    sentences = []
    for _ in range(int(rng.integers(8, 25))):
        words = rng.choice(VOCAB, size=int(rng.integers(4, 11)))
        sentences.append(" ".join(words) + ".")
    return Document(f"doc-{i}", " ".join(sentences))


def random_layered_graph(rng):
    sizes = [int(rng.integers(1, 18)) for _ in range(int(rng.integers(2, 4)))]
    while sum(sizes) > 50:
        sizes[int(np.argmax(sizes))] -= 1
    nodes, levels = [], []
    next_id = 0
    for level, size in enumerate(sizes, start=1):
        ids = list(range(next_id, next_id + size))
        for i in ids:
            nodes.append(
                IPNode(id=i, level=level, text=f"n{i}", token_count=1,
                       source="chunk" if level == 1 else "generated")
            )
        levels.append(ids)
        next_id += size
    edges = []
    for upper, lower in zip(levels[1:], levels[:-1]):
        for src in upper:
            k = int(rng.integers(1, len(lower) + 1))
            dsts = rng.choice(lower, size=k, replace=False)
            raw = rng.random(k) + 0.05
            for dst, w in zip(dsts, raw / raw.sum()):
                edges.append(Edge(src=src, dst=int(dst), weight=float(w)))
    return HWDAG(nodes, edges)


def test_edge_normalization():
    """200 randomized builds: every generated node's out-weights sum to 1."""
    start = time.monotonic()
    rng = np.random.default_rng(0)
    failures = []
    for i in range(200):
        doc = random_document(rng, i)
        chunk = int(rng.integers(20, 81))
        cfg = BuildConfig(
            chunk_size_tokens=chunk,
            batch_threshold_s=chunk * int(rng.integers(2, 5)),
            min_levels=2,
        )
        graph, _ = build_graph(doc, MockProvider(seed=i), cfg)
        sums = {}
        for e in graph.edges:
            sums[e.src] = sums.get(e.src, 0.0) + e.weight
        for node in graph.nodes.values():
            if node.level == 1:
                continue
            total = sums.get(node.id, 0.0)
            if abs(total - 1.0) > 1e-6:
                failures.append(f"build {i} node {node.id}: out-weight sum {total!r}")
    elapsed = time.monotonic() - start
    if elapsed >= 30.0:
        failures.append(f"runtime {elapsed:.1f}s >= 30s")
    conclude(f"edge normalization (200 builds, {elapsed:.1f}s)", failures)


def test_scoring_equivalence():
    """1000 random graphs: kernel scores match brute force and dense E^T r."""
    start = time.monotonic()
    rng = np.random.default_rng(1)
    worst = 0.0
    failures = []
    for i in range(1000):
        graph = random_layered_graph(rng)
        n = graph.num_nodes
        r = rng.random(n)
        z = retrieval_scores(graph, r)

        brute = np.zeros(n)
        for e in graph.edges:
            brute[e.dst] += r[e.src] * e.weight

        dense = np.zeros((n, n))
        for e in graph.edges:
            dense[e.src, e.dst] = e.weight
        matrix = dense.T @ r

        diff = max(np.abs(z - brute).max(), np.abs(z - matrix).max())
        worst = max(worst, diff)
        if diff >= 1e-9:
            failures.append(f"graph {i}: max abs diff {diff:.2e}")
    elapsed = time.monotonic() - start
    if elapsed >= 10.0:
        failures.append(f"runtime {elapsed:.1f}s >= 10s")
    conclude(f"scoring equivalence (1000 graphs, worst diff {worst:.2e}, {elapsed:.1f}s)", failures)


def test_worked_scoring_fixture(worked_graph):
    """r_a=0.5, r_b=0.4 over the two-level fixture gives z_c=0.35, z_d=0.55."""
    r = np.zeros(4)
    r[2], r[3] = 0.5, 0.4
    z = retrieval_scores(worked_graph, r)
    failures = []
    if abs(z[0] - 0.35) >= 1e-12:
        failures.append(f"z_c = {z[0]!r}")
    if abs(z[1] - 0.55) >= 1e-12:
        failures.append(f"z_d = {z[1]!r}")
    conclude("worked scoring fixture (z_c=0.35, z_d=0.55 @ 1e-12)", failures)


def test_stopping_semantics(toy_graph):
    """Scripted decision matrix: exact retrieval counts in every case."""
    failures = []
    for label, script, overrides, n_decisions, n_retrievals, stop in STOPPING_CASES:
        result = run_stopping_case(toy_graph, script, overrides)
        got = (len(result.decisions), result.retrievals, result.stop_reason)
        if got != (n_decisions, n_retrievals, stop):
            failures.append(f"{label}: expected {(n_decisions, n_retrievals, stop)}, got {got}")
    conclude(f"stopping semantics ({len(STOPPING_CASES)} scripted cases)", failures)


def test_kv_cache_accounting(toy_graph, toy_corpus, toy_dataset, toy_build_cfg):
    """Every search's new-token total decomposes exactly, nothing twice."""
    tokenizer = get_tokenizer(WHITESPACE_PUNCT_ID)
    searches = []
    for label, script, overrides, *_ in STOPPING_CASES:
        searches.append((label, toy_graph, QUERY, run_stopping_case(toy_graph, script, overrides)))
    store = GraphStore(toy_corpus, MockProvider(seed=0), toy_build_cfg)
    for ex in toy_dataset:
        graph = store.get(ex.doc_id)
        for seed in (0, 7):
            result = run_search(graph, ex.query, MockProvider(seed=seed), SearchConfig(t_p=0.6))
            searches.append((f"{ex.id}/seed{seed}", graph, ex.query, result))

    failures = []
    for label, graph, query, result in searches:
        ledger = result.ledger
        if len(set(result.visited)) != len(result.visited):
            failures.append(f"{label}: node visited twice")
        expected_appended = sum(graph.nodes[i].token_count for i in result.visited)
        if ledger.appended != expected_appended:
            failures.append(f"{label}: appended {ledger.appended} != Σ visited {expected_appended}")
        parts = (
            ledger.session_prompt + ledger.appended + ledger.decide_scaffold
            + ledger.decide_generated + ledger.answer_prompt + ledger.answer_generated
        )
        if result.tokens_processed != parts:
            failures.append(f"{label}: total {result.tokens_processed} != parts {parts}")
        prompt = tokenizer.count(templates.render_decide_prefix(query))
        if ledger.session_prompt != prompt:
            failures.append(f"{label}: session prompt {ledger.session_prompt} != {prompt}")
    conclude(f"kv-cache token accounting ({len(searches)} searches audited)", failures)


def test_determinism(toy_corpus, toy_dataset, toy_build_cfg, tmp_path):
    """Two full toy-corpus runs: identical graph bytes and search traces."""
    failures = []
    graphs = {}
    for doc_id, doc in sorted(toy_corpus.items()):
        a, _ = build_graph(doc, MockProvider(seed=0), toy_build_cfg)
        b, _ = build_graph(doc, MockProvider(seed=0), toy_build_cfg)
        if dumps(a) != dumps(b):
            failures.append(f"{doc_id}: graph dumps differ between runs")
        pa, pb = tmp_path / f"{doc_id}.a.json", tmp_path / f"{doc_id}.b.json"
        save(a, pa)
        save(b, pb)
        if pa.read_bytes() != pb.read_bytes():
            failures.append(f"{doc_id}: graph files differ byte-for-byte")
        graphs[doc_id] = a
    for ex in toy_dataset:
        graph = graphs[ex.doc_id]
        cfg = SearchConfig(t_p=0.6)
        first = run_search(graph, ex.query, MockProvider(seed=0), cfg).to_json()
        second = run_search(graph, ex.query, MockProvider(seed=0), cfg).to_json()
        if first != second:
            failures.append(f"{ex.id}: retrieval traces differ between runs")
    conclude("determinism (5 docs rebuilt, 10 queries re-searched)", failures)


def test_metric_oracles():
    """Hand-computed F1/ROUGE-L pairs and FLOPs values match to 1e-9."""
    failures = []
    for pred, refs, want_f1, want_rouge in METRIC_ORACLES:
        got_f1 = token_f1(pred, refs)
        got_rouge = rouge_l(pred, refs)
        if abs(got_f1 - want_f1) >= 1e-9:
            failures.append(f"f1({pred!r}) = {got_f1!r}, want {want_f1!r}")
        if abs(got_rouge - want_rouge) >= 1e-9:
            failures.append(f"rouge({pred!r}) = {got_rouge!r}, want {want_rouge!r}")
    for tokens, params, want in FLOPS_ORACLES:
        got = flops_estimate(tokens, params)
        if abs(got - want) >= 1e-9:
            failures.append(f"flops({tokens}, {params}) = {got!r}, want {want!r}")
    conclude(f"metric oracles ({len(METRIC_ORACLES)} text pairs, {len(FLOPS_ORACLES)} flops)", failures)


def test_tradeoff_trend(toy_corpus, toy_dataset, toy_build_cfg):
    """Raising patience t_n raises mean retrieved nodes and mean TFLOPs."""
    start = time.monotonic()
    store = GraphStore(toy_corpus, MockProvider(seed=0), toy_build_cfg)
    rows = run_sweep(
        toy_dataset, store, lambda: MockProvider(seed=3),
        SearchConfig(t_p=0.5), "t_n", [1, 2, 4, 8],
    )
    retrieved = [row.mean_nodes_retrieved for row in rows]
    tflops = [row.mean_tflops for row in rows]
    elapsed = time.monotonic() - start
    failures = []
    if any(b < a for a, b in zip(retrieved, retrieved[1:])):
        failures.append(f"mean retrieved not nondecreasing: {retrieved}")
    if any(b < a for a, b in zip(tflops, tflops[1:])):
        failures.append(f"mean TFLOPs not nondecreasing: {tflops}")
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.1f}s >= 60s")
    detail = ", ".join(f"t_n={t}: {r:.1f} nodes" for t, r in zip([1, 2, 4, 8], retrieved))
    conclude(f"trade-off trend ({detail}, {elapsed:.1f}s)", failures)


def test_ablation_modes(toy_corpus, toy_dataset, toy_build_cfg):
    """All four ablations run end-to-end and change the retrieval traces."""

    def traces(search_cfg, ip_graph=True):
        store = GraphStore(toy_corpus, MockProvider(seed=0), toy_build_cfg, ip_graph=ip_graph)
        out = []
        for ex in toy_dataset:
            graph = store.get(ex.doc_id)
            out.append(run_search(graph, ex.query, MockProvider(seed=3), search_cfg).visited)
        return out

    base = dict(t_p=0.8, t_n=2)
    full = traces(SearchConfig(**base))
    ablations = {
        "no attention retrieval": traces(SearchConfig(**base, attention_retrieval=False)),
        "no embedding similarity": traces(SearchConfig(**base, embedding_similarity=False)),
        "no dynamic control": traces(SearchConfig(**base, dynamic_control=False, fixed_budget=10)),
        "tree instead of graph": traces(SearchConfig(**base), ip_graph=False),
    }
    failures = [name for name, trace in ablations.items() if trace == full]
    conclude("ablation modes (4 flags, trace-level distinct)", failures)
