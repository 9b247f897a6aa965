import json
import math

import pytest

from fatgraph.fields import EdgeFields
from fatgraph.graph import lasso, star
from fatgraph.io import (GraphFileError, config_hash, graph_document, load_graph, parse_graph,
                         read_csv, save_graph, write_csv)

LASSO_DOC = {"vertices": [{"id": 0}],
             "edges": [{"id": 0, "from": 0, "to": 0, "length": 1.0, "a": [0.2, 0.4], "q": 1.5},
                       {"id": 1, "from": 0, "to": None, "length": "inf"}],
             "l0": 0.5}


def test_parse_lasso_document():
    g, f = parse_graph(LASSO_DOC)
    assert g.vertices == (0,) and len(g.edges) == 2
    assert g.edge(1).external and math.isinf(g.edge(1).length)
    assert list(f.a[0].values) == [0.2, 0.4] and list(f.q[0].values) == [1.5]
    assert g.l0 == 0.5


def test_round_trip(tmp_path):
    g = lasso(1.3, 0.4)
    f = EdgeFields.from_values(g, a={0: 0.7}, q={0: [1.0, 2.0, 3.0]})
    path = save_graph(tmp_path / "g.json", g, f)
    g2, f2 = load_graph(path)
    assert graph_document(g2, f2) == graph_document(g, f)
    g3, _ = load_graph(save_graph(tmp_path / "s.json", star(3, 4)))
    assert graph_document(g3) == graph_document(star(3, 4))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("edges"),
    lambda d: d["edges"][1].update(length=2.0),
    lambda d: d["edges"][0].update(to=None),
    lambda d: d["edges"][0].update(length="long"),
    lambda d: d["edges"][0].update(a=[]),
    lambda d: d["edges"][0].update(q=True),
    lambda d: d["edges"][0].pop("from"),
])
def test_malformed_documents(mutate):
    doc = json.loads(json.dumps(LASSO_DOC))
    mutate(doc)
    with pytest.raises(GraphFileError):
        parse_graph(doc)


def test_unreadable_files(tmp_path):
    with pytest.raises(GraphFileError):
        load_graph(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(GraphFileError):
        load_graph(bad)


def test_csv_header_rows_and_trailer(tmp_path):
    cfg = {"a": 1, "b": [0.1, 0.2]}
    path = write_csv(tmp_path / "t.csv", ["x", "y", "ok"], [(0.1, None, True), (1 / 3, "s", False)],
                     cfg, 7, summary=["note"])
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,ok"
    assert lines[-1] == f"# config_sha256={config_hash(cfg)} seed=7"
    assert lines[-2] == "# note"
    header, rows = read_csv(path)
    assert header == ["x", "y", "ok"] and rows[0] == ["0.10000000000000001", "", "1"]
    assert float(rows[1][0]) == 1 / 3


def test_config_hash_is_order_free():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
