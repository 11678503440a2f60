"""JSON instance, mechanism and report files.

Instances are ``{"stages": [...]}`` with each stage tagged by ``kind``;
mechanisms are tables of ``{"history", "alloc", "pay"}`` nodes. Reports are
written as one JSON object per line with sorted keys, so repeated runs give
byte-identical output.
"""

from __future__ import annotations

import typing as typ

import msgspec
import msgspec.json as msjson
import numpy as np

from bamlab.bam_engine import tabulate_bam
from bamlab.errors import InstanceFormatError
from bamlab.model import (
    DirectMechanism,
    EqualRevenue,
    Instance,
    StageDistribution,
    StageOutcome,
)

if typ.TYPE_CHECKING:
    from pathlib import Path

    from bamlab.bam_engine import BankAccountMechanism


class DiscreteStage(
    msgspec.Struct, tag="discrete", tag_field="kind", forbid_unknown_fields=True
):
    """Finite support of valuation vectors with probabilities."""

    support: list[list[float]]
    probs: list[float]


class EqualRevenueStage(
    msgspec.Struct, tag="equal_revenue", tag_field="kind", forbid_unknown_fields=True
):
    """Equal-revenue stage capped at ``v_max``."""

    v_max: float


StageSpec = DiscreteStage | EqualRevenueStage


class InstanceFile(msgspec.Struct, forbid_unknown_fields=True):
    """Top level of an instance file."""

    stages: list[StageSpec]


class MechanismNode(msgspec.Struct, forbid_unknown_fields=True):
    """Outcome of a direct mechanism at one history."""

    history: list[int]
    alloc: list[float]
    pay: float


class MechanismFile(msgspec.Struct, forbid_unknown_fields=True):
    """Tabular direct mechanism."""

    nodes: list[MechanismNode]


class BamNode(msgspec.Struct, forbid_unknown_fields=True):
    """Account state and outcome of a BAM at one history."""

    history: list[int]
    bal: float
    z: list[float]
    q: float
    d: float
    s: float


class BamFile(msgspec.Struct, forbid_unknown_fields=True):
    """Tabulated execution of a BAM over a discrete instance."""

    name: str
    nodes: list[BamNode]


def _enc_hook(obj: object) -> object:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    msg = f"Cannot encode objects of type {type(obj).__name__}."
    raise NotImplementedError(msg)


_ENCODER = msjson.Encoder(enc_hook=_enc_hook, order="deterministic")


def _decode[T](data: bytes | str, kind: type[T], what: str) -> T:
    try:
        return msjson.decode(data, type=kind)
    except msgspec.DecodeError as exc:
        msg = f"Malformed {what} file: {exc}"
        raise InstanceFormatError(msg) from exc


def decode_instance(data: bytes | str) -> Instance:
    """Parse instance JSON into an :class:`~bamlab.model.Instance`."""
    document = _decode(data, InstanceFile, "instance")
    stages = []
    for spec in document.stages:
        if isinstance(spec, EqualRevenueStage):
            stages.append(StageDistribution.equal_revenue(spec.v_max))
        else:
            stages.append(StageDistribution.discrete(spec.support, spec.probs))
    return Instance(tuple(stages))


def load_instance(path: Path) -> Instance:
    """Read an instance file."""
    return decode_instance(path.read_bytes())


def instance_to_file(instance: Instance) -> InstanceFile:
    """Struct form of ``instance``."""
    specs: list[StageSpec] = []
    for stage in instance.stages:
        if isinstance(stage.kind, EqualRevenue):
            specs.append(EqualRevenueStage(stage.kind.v_max))
        else:
            specs.append(DiscreteStage(stage.support.tolist(), stage.probs.tolist()))
    return InstanceFile(specs)


def dump_instance(instance: Instance) -> bytes:
    """Encode ``instance`` as JSON."""
    return _ENCODER.encode(instance_to_file(instance))


def decode_mechanism(data: bytes | str, instance: Instance) -> DirectMechanism:
    """Parse a tabular mechanism and check its histories against ``instance``."""
    document = _decode(data, MechanismFile, "mechanism")
    nodes: dict[tuple[int, ...], StageOutcome] = {}
    for node in document.nodes:
        history = tuple(node.history)
        if not history or history in nodes:
            msg = f"Mechanism nodes need distinct non-empty histories; got {history}."
            raise InstanceFormatError(msg)
        instance.validate_history(history)
        items = instance.stages[len(history) - 1].items
        if len(node.alloc) != items:
            msg = f"Node {history} allocates {len(node.alloc)} items, not {items}."
            raise InstanceFormatError(msg)
        nodes[history] = StageOutcome(np.array(node.alloc), node.pay)
    return DirectMechanism(nodes)


def load_mechanism(path: Path, instance: Instance) -> DirectMechanism:
    """Read a mechanism file written for ``instance``."""
    return decode_mechanism(path.read_bytes(), instance)


def mechanism_to_file(mech: DirectMechanism) -> MechanismFile:
    """Struct form of ``mech`` with nodes ordered by depth, then history."""
    ordered = sorted(mech.nodes, key=lambda h: (len(h), h))
    return MechanismFile(
        [
            MechanismNode(list(h), mech.alloc(h).tolist(), float(mech.pay(h)))
            for h in ordered
        ]
    )


def dump_mechanism(mech: DirectMechanism) -> bytes:
    """Encode ``mech`` as JSON."""
    return _ENCODER.encode(mechanism_to_file(mech))


def bam_to_file(bam: BankAccountMechanism, instance: Instance) -> BamFile:
    """Tabulate ``bam`` at every node of a discrete instance."""
    records = tabulate_bam(bam, instance)
    ordered = sorted(records, key=lambda h: (len(h), h))
    return BamFile(
        bam.name,
        [
            BamNode(
                list(h),
                records[h].bal,
                np.asarray(records[h].z, dtype=float).tolist(),
                records[h].q,
                records[h].d,
                records[h].s,
            )
            for h in ordered
        ],
    )


def dump_bam(bam: BankAccountMechanism, instance: Instance) -> bytes:
    """Encode the tabulated ``bam`` as JSON."""
    return _ENCODER.encode(bam_to_file(bam, instance))


def encode_line(record: object) -> bytes:
    """One JSON-lines record with sorted keys and a trailing newline."""
    return _ENCODER.encode(record) + b"\n"


__all__ = [
    "BamFile",
    "BamNode",
    "DiscreteStage",
    "EqualRevenueStage",
    "InstanceFile",
    "MechanismFile",
    "MechanismNode",
    "StageSpec",
    "bam_to_file",
    "decode_instance",
    "decode_mechanism",
    "dump_bam",
    "dump_instance",
    "dump_mechanism",
    "encode_line",
    "instance_to_file",
    "load_instance",
    "load_mechanism",
    "mechanism_to_file",
]
