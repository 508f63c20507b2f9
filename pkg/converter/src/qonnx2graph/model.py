"""A hand-decoded subset of the ONNX protobuf schema.

Covers exactly the messages the converter needs: ModelProto, GraphProto,
NodeProto, AttributeProto, TensorProto, and the ValueInfo/TypeProto chain
used for input/output shapes. Both directions (decode and encode) are
implemented so tests can script model files without an ONNX dependency.

Field numbers follow onnx.proto3; unknown fields are ignored on decode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import prod
from typing import Optional, Union

from . import wire

# TensorProto.DataType values we understand.
FLOAT = 1
UINT8 = 2
INT8 = 3
INT32 = 6
INT64 = 7

# AttributeProto.AttributeType values.
ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7

AttrValue = Union[int, float, str, "TensorP", list[int], list[float]]


@dataclass
class TensorP:
    """TensorProto: an initializer (weights, scales, bit-widths...)."""

    name: str = ""
    dims: list[int] = field(default_factory=list)
    data_type: int = FLOAT
    raw_data: bytes = b""
    float_data: list[float] = field(default_factory=list)
    int_data: list[int] = field(default_factory=list)

    @property
    def num_elements(self) -> int:
        return prod(self.dims) if self.dims else 1

    def values(self) -> list[float | int]:
        if self.raw_data:
            fmt = {FLOAT: "f", UINT8: "B", INT8: "b", INT32: "i", INT64: "q"}[
                self.data_type
            ]
            count = len(self.raw_data) // struct.calcsize(fmt)
            return list(struct.unpack(f"<{count}{fmt}", self.raw_data))
        if self.data_type == FLOAT:
            return list(self.float_data)
        return list(self.int_data)

    def scalar(self) -> float | int:
        vals = self.values()
        if len(vals) != 1:
            raise ValueError(f"tensor {self.name!r} is not a scalar")
        return vals[0]

    def encode(self) -> bytes:
        out = bytearray()
        for d in self.dims:
            out += wire.varint_field(1, d)
        out += wire.varint_field(2, self.data_type)
        for v in self.float_data:
            out += wire.tag(4, wire.FIXED32) + struct.pack("<f", v)
        for v in self.int_data:
            fieldno = 7 if self.data_type == INT64 else 5
            out += wire.varint_field(fieldno, v)
        if self.name:
            out += wire.string_field(8, self.name)
        if self.raw_data:
            out += wire.bytes_field(9, self.raw_data)
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> "TensorP":
        t = cls()
        for fno, wtype, value in wire.iter_fields(data):
            if fno == 1:
                if wtype == wire.LENGTH:
                    t.dims += [wire.to_signed64(v) for v in wire.unpack_varints(value)]
                else:
                    t.dims.append(wire.to_signed64(value))
            elif fno == 2:
                t.data_type = value
            elif fno == 4:
                if wtype == wire.LENGTH:
                    count = len(value) // 4
                    t.float_data += list(struct.unpack(f"<{count}f", value))
                else:
                    t.float_data.append(struct.unpack("<f", value)[0])
            elif fno in (5, 7):
                if wtype == wire.LENGTH:
                    t.int_data += [wire.to_signed64(v) for v in wire.unpack_varints(value)]
                else:
                    t.int_data.append(wire.to_signed64(value))
            elif fno == 8:
                t.name = value.decode("utf-8")
            elif fno == 9:
                t.raw_data = value
        return t


def _encode_attr(name: str, value: AttrValue) -> bytes:
    out = bytearray(wire.string_field(1, name))
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        out += wire.varint_field(3, value)
        out += wire.varint_field(20, ATTR_INT)
    elif isinstance(value, float):
        out += wire.float_field(2, value)
        out += wire.varint_field(20, ATTR_FLOAT)
    elif isinstance(value, str):
        out += wire.string_field(4, value)
        out += wire.varint_field(20, ATTR_STRING)
    elif isinstance(value, TensorP):
        out += wire.bytes_field(5, value.encode())
        out += wire.varint_field(20, ATTR_TENSOR)
    elif isinstance(value, list) and all(isinstance(v, int) for v in value):
        for v in value:
            out += wire.varint_field(8, v)
        out += wire.varint_field(20, ATTR_INTS)
    elif isinstance(value, list):
        for v in value:
            out += wire.float_field(7, v)
        out += wire.varint_field(20, ATTR_FLOATS)
    else:
        raise TypeError(f"unsupported attribute value {value!r}")
    return bytes(out)


def _decode_attr(data: bytes) -> tuple[str, AttrValue]:
    name = ""
    atype = 0
    f_val = 0.0
    i_val = 0
    s_val = ""
    t_val: Optional[TensorP] = None
    floats: list[float] = []
    ints: list[int] = []
    for fno, wtype, value in wire.iter_fields(data):
        if fno == 1:
            name = value.decode("utf-8")
        elif fno == 2:
            f_val = struct.unpack("<f", value)[0]
        elif fno == 3:
            i_val = wire.to_signed64(value)
        elif fno == 4:
            s_val = value.decode("utf-8")
        elif fno == 5:
            t_val = TensorP.decode(value)
        elif fno == 7:
            floats.append(struct.unpack("<f", value)[0])
        elif fno == 8:
            if wtype == wire.LENGTH:
                ints += [wire.to_signed64(v) for v in wire.unpack_varints(value)]
            else:
                ints.append(wire.to_signed64(value))
        elif fno == 20:
            atype = value
    by_type: dict[int, AttrValue] = {
        ATTR_FLOAT: f_val, ATTR_INT: i_val, ATTR_STRING: s_val,
        ATTR_FLOATS: floats, ATTR_INTS: ints,
    }
    if atype == ATTR_TENSOR:
        return name, t_val if t_val is not None else TensorP()
    if atype in by_type:
        return name, by_type[atype]
    # Untyped attribute (older writers): guess from populated fields.
    if ints:
        return name, ints
    if floats:
        return name, floats
    return name, i_val


@dataclass
class NodeP:
    op_type: str
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    name: str = ""
    attrs: dict[str, AttrValue] = field(default_factory=dict)

    def encode(self) -> bytes:
        out = bytearray()
        for t in self.inputs:
            out += wire.string_field(1, t)
        for t in self.outputs:
            out += wire.string_field(2, t)
        if self.name:
            out += wire.string_field(3, self.name)
        out += wire.string_field(4, self.op_type)
        for aname, aval in self.attrs.items():
            out += wire.bytes_field(5, _encode_attr(aname, aval))
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> "NodeP":
        n = cls(op_type="")
        for fno, _, value in wire.iter_fields(data):
            if fno == 1:
                n.inputs.append(value.decode("utf-8"))
            elif fno == 2:
                n.outputs.append(value.decode("utf-8"))
            elif fno == 3:
                n.name = value.decode("utf-8")
            elif fno == 4:
                n.op_type = value.decode("utf-8")
            elif fno == 5:
                aname, aval = _decode_attr(value)
                n.attrs[aname] = aval
        return n


@dataclass
class ValueInfoP:
    """ValueInfoProto restricted to dense tensor types.

    ``dims`` entries are ints for fixed dimensions and ``None`` for symbolic
    (``dim_param``) ones.
    """

    name: str
    dims: list[Optional[int]] = field(default_factory=list)
    elem_type: int = FLOAT

    def encode(self) -> bytes:
        shape = bytearray()
        for d in self.dims:
            if d is None:
                dim = wire.string_field(2, "N")
            else:
                dim = wire.varint_field(1, d)
            shape += wire.bytes_field(1, dim)
        tensor_type = wire.varint_field(1, self.elem_type) + wire.bytes_field(2, bytes(shape))
        type_proto = wire.bytes_field(1, tensor_type)
        return wire.string_field(1, self.name) + wire.bytes_field(2, type_proto)

    @classmethod
    def decode(cls, data: bytes) -> "ValueInfoP":
        vi = cls(name="")
        for fno, _, value in wire.iter_fields(data):
            if fno == 1:
                vi.name = value.decode("utf-8")
            elif fno == 2:
                for tno, _, tval in wire.iter_fields(value):
                    if tno != 1:  # TypeProto.tensor_type
                        continue
                    for eno, _, eval_ in wire.iter_fields(tval):
                        if eno == 1:
                            vi.elem_type = eval_
                        elif eno == 2:  # TensorShapeProto
                            for dno, _, dval in wire.iter_fields(eval_):
                                if dno != 1:
                                    continue
                                entry: Optional[int] = None
                                for kno, _, kval in wire.iter_fields(dval):
                                    if kno == 1:
                                        entry = wire.to_signed64(kval)
                                vi.dims.append(entry)
        return vi


@dataclass
class GraphP:
    name: str = ""
    nodes: list[NodeP] = field(default_factory=list)
    initializers: list[TensorP] = field(default_factory=list)
    inputs: list[ValueInfoP] = field(default_factory=list)
    outputs: list[ValueInfoP] = field(default_factory=list)
    value_infos: list[ValueInfoP] = field(default_factory=list)

    def encode(self) -> bytes:
        out = bytearray()
        for n in self.nodes:
            out += wire.bytes_field(1, n.encode())
        if self.name:
            out += wire.string_field(2, self.name)
        for t in self.initializers:
            out += wire.bytes_field(5, t.encode())
        for vi in self.inputs:
            out += wire.bytes_field(11, vi.encode())
        for vi in self.outputs:
            out += wire.bytes_field(12, vi.encode())
        for vi in self.value_infos:
            out += wire.bytes_field(13, vi.encode())
        return bytes(out)

    @classmethod
    def decode(cls, data: bytes) -> "GraphP":
        g = cls()
        for fno, _, value in wire.iter_fields(data):
            if fno == 1:
                g.nodes.append(NodeP.decode(value))
            elif fno == 2:
                g.name = value.decode("utf-8")
            elif fno == 5:
                g.initializers.append(TensorP.decode(value))
            elif fno == 11:
                g.inputs.append(ValueInfoP.decode(value))
            elif fno == 12:
                g.outputs.append(ValueInfoP.decode(value))
            elif fno == 13:
                g.value_infos.append(ValueInfoP.decode(value))
        return g


@dataclass
class ModelP:
    graph: GraphP
    ir_version: int = 8
    opset_version: int = 13
    opset_domain: str = ""

    def encode(self) -> bytes:
        opset = bytearray()
        if self.opset_domain:
            opset += wire.string_field(1, self.opset_domain)
        opset += wire.varint_field(2, self.opset_version)
        return (
            wire.varint_field(1, self.ir_version)
            + wire.bytes_field(7, self.graph.encode())
            + wire.bytes_field(8, bytes(opset))
        )

    @classmethod
    def decode(cls, data: bytes) -> "ModelP":
        m = cls(graph=GraphP())
        saw_graph = False
        for fno, _, value in wire.iter_fields(data):
            if fno == 1:
                m.ir_version = value
            elif fno == 7:
                m.graph = GraphP.decode(value)
                saw_graph = True
            elif fno == 8:
                for ono, _, oval in wire.iter_fields(value):
                    if ono == 1:
                        m.opset_domain = oval.decode("utf-8")
                    elif ono == 2:
                        m.opset_version = oval
        if not saw_graph:
            raise wire.WireError("model has no graph")
        return m
