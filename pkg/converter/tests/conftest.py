import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from onnx_fixtures import float_tensor, quant_node  # noqa: E402

from qonnx2graph.model import GraphP, ModelP, NodeP, ValueInfoP  # noqa: E402


@pytest.fixture
def chain5_model() -> ModelP:
    """Quant -> Conv -> Relu -> Quant -> Gemm on an 8x8x3 input."""
    q_in, q_in_inits = quant_node("q_in", "x", "xq", 4)
    q_mid, q_mid_inits = quant_node("q_mid", "act", "actq", 4)
    conv = NodeP(
        op_type="Conv", name="conv0",
        inputs=["xq", "conv0_w"], outputs=["acc"],
        attrs={"kernel_shape": [3, 3], "strides": [1, 1],
               "pads": [0, 0, 0, 0], "group": 1},
    )
    relu = NodeP(op_type="Relu", name="relu0", inputs=["acc"], outputs=["act"])
    gemm = NodeP(
        op_type="Gemm", name="fc", inputs=["actq", "fc_w"], outputs=["y"],
        attrs={"transB": 1},
    )
    graph = GraphP(
        name="chain5",
        nodes=[q_in, conv, relu, q_mid, gemm],
        initializers=(
            q_in_inits + q_mid_inits
            + [
                float_tensor("conv0_w", [8, 3, 3, 3], [0.0] * (8 * 3 * 3 * 3)),
                float_tensor("fc_w", [10, 288], [0.0] * 2880),
            ]
        ),
        inputs=[ValueInfoP("x", [1, 3, 8, 8])],
        outputs=[ValueInfoP("y", [1, 10])],
    )
    return ModelP(graph=graph)


@pytest.fixture
def chain5_path(chain5_model, tmp_path):
    path = tmp_path / "chain5.onnx"
    path.write_bytes(chain5_model.encode())
    return path
