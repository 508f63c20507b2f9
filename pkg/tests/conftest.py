import pytest

from qnnperf import synth
from qnnperf.graph import parse_graph, serialize
from qnnperf.platform import PlatformSpec


@pytest.fixture
def chain5():
    """Conv -> Quant -> Act -> Gemm -> Quant with a matching config."""
    g, cfg = synth.small_conv_chain()
    return g, cfg


@pytest.fixture
def chain5_text(chain5):
    return serialize(chain5[0])


@pytest.fixture
def chain5_roundtrip(chain5_text):
    return parse_graph(chain5_text)


@pytest.fixture
def cluster8():
    """The 8-core / 16-bank / 64 kB L1 / 512 kB L2 reference platform."""
    return PlatformSpec(num_cores=8, num_banks=16,
                        l1_bytes=64 * 1024, l2_bytes=512 * 1024)


@pytest.fixture
def tiny_platform():
    """A 2-core platform with chunk-granular allocation, convenient for
    hand-sized tiling arithmetic."""
    return PlatformSpec(num_cores=2, num_banks=1, l1_bytes=600, l2_bytes=4096,
                        chunk_bytes=1, dma_setup_cycles=0)
