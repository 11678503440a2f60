"""Tests for instance, mechanism and report files."""

from __future__ import annotations

import typing as typ

import msgspec.json as msjson
import numpy as np
import pytest

from bamlab.approx import three_approx
from bamlab.errors import BadHistoryError, InstanceFormatError
from bamlab.io import (
    bam_to_file,
    decode_instance,
    decode_mechanism,
    dump_instance,
    dump_mechanism,
    encode_line,
    load_instance,
)
from tests.conftest import posted_price_mechanism

if typ.TYPE_CHECKING:
    from pathlib import Path

    from bamlab.model import Instance

INSTANCE_JSON = """
{"stages": [
  {"kind": "discrete", "support": [[0.0], [1.0], [2.0]], "probs": [0.25, 0.5, 0.25]},
  {"kind": "equal_revenue", "v_max": 7.5}
]}
"""


def test_decode_instance_with_both_stage_kinds() -> None:
    """Stages are tagged by ``kind``."""
    instance = decode_instance(INSTANCE_JSON)
    assert instance.horizon == 2, "two stages"
    assert instance.stages[0].size == 3, "three support points"
    assert not instance.stages[1].is_discrete, "second stage is equal-revenue"


@pytest.mark.parametrize(
    "document",
    [
        '{"stages": [{"kind": "uniform", "low": 0}]}',
        '{"stages": [{"kind": "equal_revenue", "v_max": 3, "extra": 1}]}',
        '{"stages": "none"}',
        "not json",
    ],
)
def test_malformed_instances_are_format_errors(document: str) -> None:
    """Unknown kinds, unknown fields and broken JSON are rejected."""
    with pytest.raises(InstanceFormatError):
        decode_instance(document)


def test_dumped_instance_loads_back(tmp_path: Path, single_stage: Instance) -> None:
    """Written instance files are readable by :func:`load_instance`."""
    path = tmp_path / "instance.json"
    path.write_bytes(dump_instance(single_stage))
    loaded = load_instance(path)
    (original,) = single_stage.stages
    np.testing.assert_array_equal(loaded.stages[0].support, original.support)
    np.testing.assert_array_equal(loaded.stages[0].probs, original.probs)


def test_mechanism_nodes_are_ordered_and_checked(two_stage: Instance) -> None:
    """Nodes are written by depth and re-read against the instance."""
    mech = posted_price_mechanism(two_stage, [1.0, 2.0])
    document = msjson.decode(dump_mechanism(mech))
    histories = [node["history"] for node in document["nodes"]]
    assert histories[:3] == [[0], [1], [0, 0]], "depth-first by length"
    loaded = decode_mechanism(dump_mechanism(mech), two_stage)
    assert loaded.pay((1, 1)) == pytest.approx(2.0), "payments survive"


def test_mechanism_with_unknown_history_is_rejected(two_stage: Instance) -> None:
    """Histories must lie in the instance tree."""
    document = '{"nodes": [{"history": [5], "alloc": [1.0], "pay": 0.0}]}'
    with pytest.raises(BadHistoryError):
        decode_mechanism(document, two_stage)


def test_mechanism_with_wrong_arity_is_rejected(two_stage: Instance) -> None:
    """Allocation vectors must match the number of items."""
    document = '{"nodes": [{"history": [0], "alloc": [1.0, 0.0], "pay": 0.0}]}'
    with pytest.raises(InstanceFormatError):
        decode_mechanism(document, two_stage)


def test_bam_file_tabulates_every_node(two_stage: Instance) -> None:
    """The BAM table lists one account record per node."""
    table = bam_to_file(three_approx(two_stage), two_stage)
    assert table.name == "three_approx", "mechanism name is kept"
    assert len(table.nodes) == two_stage.node_count, "one record per node"


def test_encode_line_sorts_keys_and_converts_numpy() -> None:
    """Records are deterministic JSON lines."""
    line = encode_line({"b": np.float64(1.5), "a": np.array([1, 2])})
    assert line == b'{"a":[1,2],"b":1.5}\n', "sorted keys, plain numbers"
