"""QONNX/ONNX to native JSON graph converter."""

from .convert import (
    ConversionReport,
    MalformedModel,
    UnsupportedOp,
    convert,
    convert_graph,
    load_model,
    roundtrip_check,
)
from .model import GraphP, ModelP, NodeP, TensorP, ValueInfoP

__version__ = "0.1.0"

__all__ = [
    "ConversionReport",
    "MalformedModel",
    "UnsupportedOp",
    "convert",
    "convert_graph",
    "load_model",
    "roundtrip_check",
    "GraphP",
    "ModelP",
    "NodeP",
    "TensorP",
    "ValueInfoP",
]
