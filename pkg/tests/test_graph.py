import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pecan.graph import (
    BuildConfig,
    ChecksumMismatch,
    Edge,
    GraphSchemaError,
    HWDAG,
    InvalidGraph,
    IPNode,
    UnknownFormatVersion,
    WEIGHT_SUM_TOL,
    dumps,
    load,
    loads,
    save,
    validate,
)


def make_node(nid, level, source=None, token_count=3):
    if source is None:
        source = "chunk" if level == 1 else "generated"
    return IPNode(id=nid, level=level, text=f"node {nid}", token_count=token_count, source=source)


class TestStructure:
    def test_levels_grouped_in_id_order(self, worked_graph):
        assert worked_graph.levels == {1: [0, 1], 2: [2, 3]}
        assert worked_graph.max_level == 2
        assert worked_graph.top_level_ids() == [2, 3]

    def test_token_count_of_level(self, worked_graph):
        assert worked_graph.token_count_of_level(1) == 4
        assert worked_graph.token_count_of_level(2) == 4

    def test_adjacency_matrix_matches_edges(self, worked_graph):
        E = worked_graph.adjacency_matrix()
        assert E.shape == (4, 4)
        assert E[2, 0] == pytest.approx(0.7)
        assert E[2, 1] == pytest.approx(0.3)
        assert E[3, 1] == pytest.approx(1.0)
        assert E.sum() == pytest.approx(2.0)

    def test_csr_matches_adjacency(self, worked_graph):
        indptr, indices, weights = worked_graph.csr_arrays()
        E = worked_graph.adjacency_matrix()
        dense = np.zeros_like(E)
        for src in range(worked_graph.num_nodes):
            for k in range(indptr[src], indptr[src + 1]):
                dense[src, indices[k]] = weights[k]
        np.testing.assert_allclose(dense, E)


class TestValidate:
    def test_valid_fixture(self, worked_graph):
        assert validate(worked_graph).valid

    def test_normalization_violation(self):
        nodes = [make_node(0, 1), make_node(1, 2)]
        g = HWDAG(nodes, [Edge(1, 0, 0.5)])
        assert "normalization" in validate(g).codes()

    def test_normalization_within_tolerance(self):
        nodes = [make_node(0, 1), make_node(1, 2)]
        g = HWDAG(nodes, [Edge(1, 0, 1.0 + WEIGHT_SUM_TOL / 2)])
        codes = validate(g).codes()
        assert "normalization" not in codes

    def test_dangling_edge(self):
        g = HWDAG([make_node(0, 1)], [Edge(5, 0, 1.0)])
        assert "dangling-edge" in validate(g).codes()

    def test_non_adjacent_levels(self):
        nodes = [make_node(0, 1), make_node(1, 2), make_node(2, 3)]
        g = HWDAG(nodes, [Edge(2, 0, 1.0), Edge(1, 0, 1.0)])
        assert "non-adjacent-levels" in validate(g).codes()

    def test_negative_weight(self):
        nodes = [make_node(0, 1), make_node(1, 1), make_node(2, 2)]
        g = HWDAG(nodes, [Edge(2, 0, -0.2), Edge(2, 1, 1.2)])
        codes = validate(g).codes()
        assert "negative-weight" in codes
        assert "weight-above-one" in codes

    def test_non_finite_weight(self):
        nodes = [make_node(0, 1), make_node(1, 2)]
        g = HWDAG(nodes, [Edge(1, 0, math.nan)])
        assert "non-finite-weight" in validate(g).codes()

    def test_level_source_mismatch(self):
        bad_chunk = make_node(0, 2, source="chunk")
        bad_gen = make_node(1, 1, source="generated")
        g = HWDAG([bad_chunk, bad_gen], [])
        assert validate(g).codes().count("level-source-mismatch") == 2

    def test_bad_token_count_and_level(self):
        node = IPNode(id=0, level=0, text="x", token_count=0, source="chunk")
        codes = validate(HWDAG([node], [])).codes()
        assert "bad-level" in codes
        assert "bad-token-count" in codes


class TestPersistence:
    def test_roundtrip_identity(self, worked_graph):
        clone = loads(dumps(worked_graph))
        assert dumps(clone) == dumps(worked_graph)
        assert clone.nodes == worked_graph.nodes
        assert clone.edges == worked_graph.edges
        assert clone.meta == worked_graph.meta

    def test_weights_survive_exactly(self, worked_graph):
        clone = loads(dumps(worked_graph))
        for a, b in zip(sorted(worked_graph.edges, key=lambda e: (e.src, e.dst)),
                        sorted(clone.edges, key=lambda e: (e.src, e.dst))):
            assert a.weight == b.weight  # bit-exact, not approx

    def test_save_load_file(self, worked_graph, tmp_path):
        path = tmp_path / "g.json"
        save(worked_graph, path)
        assert dumps(load(path)) == dumps(worked_graph)

    def test_save_refuses_invalid(self, tmp_path):
        g = HWDAG([make_node(0, 1), make_node(1, 2)], [Edge(1, 0, 0.4)])
        with pytest.raises(InvalidGraph):
            save(g, tmp_path / "bad.json")

    def test_checksum_detects_tamper(self, worked_graph):
        doc = json.loads(dumps(worked_graph))
        doc["nodes"][0]["text"] = "tampered"
        with pytest.raises(ChecksumMismatch):
            loads(json.dumps(doc))

    def test_unknown_version(self, worked_graph):
        doc = json.loads(dumps(worked_graph))
        doc["version"] = 99
        with pytest.raises(UnknownFormatVersion):
            loads(json.dumps(doc))

    def test_malformed_json(self):
        with pytest.raises(GraphSchemaError):
            loads("{not json")

    def test_missing_field(self, worked_graph):
        doc = json.loads(dumps(worked_graph))
        del doc["nodes"][0]["level"]
        with pytest.raises((GraphSchemaError, ChecksumMismatch)):
            loads(json.dumps(doc))

    def test_duplicate_node_ids_rejected(self):
        with pytest.raises(GraphSchemaError):
            HWDAG([make_node(0, 1), make_node(0, 1)], [])


class TestBuildConfig:
    def test_defaults(self):
        cfg = BuildConfig()
        assert cfg.chunk_size_tokens == 300
        assert cfg.batch_threshold_s == 8000
        assert cfg.min_levels == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            BuildConfig(chunk_size_tokens=0)
        with pytest.raises(ValueError):
            BuildConfig(chunk_size_tokens=100, batch_threshold_s=50)
        with pytest.raises(ValueError):
            BuildConfig(min_levels=0)

    def test_hash_stable_and_sensitive(self):
        a = BuildConfig()
        b = BuildConfig()
        c = BuildConfig(chunk_size_tokens=299)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()


# -- property tests ---------------------------------------------------------

@st.composite
def random_graphs(draw):
    n_bottom = draw(st.integers(min_value=1, max_value=5))
    n_top = draw(st.integers(min_value=1, max_value=5))
    nodes = [make_node(i, 1) for i in range(n_bottom)]
    nodes += [make_node(n_bottom + i, 2) for i in range(n_top)]
    edges = []
    for t in range(n_top):
        k = draw(st.integers(min_value=1, max_value=n_bottom))
        dsts = draw(
            st.lists(
                st.integers(min_value=0, max_value=n_bottom - 1),
                min_size=k, max_size=k, unique=True,
            )
        )
        raw = draw(
            st.lists(
                st.floats(min_value=0.05, max_value=1.0, allow_nan=False),
                min_size=k, max_size=k,
            )
        )
        total = sum(raw)
        for dst, w in zip(dsts, raw):
            edges.append(Edge(src=n_bottom + t, dst=dst, weight=w / total))
    return HWDAG(nodes, edges, meta={"doc_id": "prop"})


@given(random_graphs())
@settings(max_examples=60)
def test_random_normalized_graphs_validate_and_roundtrip(g):
    assert validate(g).valid
    clone = loads(dumps(g))
    assert dumps(clone) == dumps(g)


@given(random_graphs(), st.data())
@settings(max_examples=60)
def test_single_weight_mutation_caught(g, data):
    if not g.edges:
        return
    idx = data.draw(st.integers(min_value=0, max_value=len(g.edges) - 1))
    bump = data.draw(st.floats(min_value=0.01, max_value=0.5))
    mutated = list(g.edges)
    e = mutated[idx]
    mutated[idx] = Edge(e.src, e.dst, e.weight + bump)
    bad = HWDAG(list(g.nodes.values()), mutated, meta=g.meta)
    assert "normalization" in validate(bad).codes()
