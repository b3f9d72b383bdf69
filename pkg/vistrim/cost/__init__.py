"""Package implementing the FLOPs cost model"""
from .flops import CostParams
from .flops import CostReport
from .flops import decode_step_flops
from .flops import prefill_layer_flops
from .flops import prune_overhead_flops
from .flops import run_cost
from .flops import text_len_for_dense_flops
from .flops import tflops

export = [prefill_layer_flops, prune_overhead_flops, decode_step_flops,
          run_cost]

__all__ = [
    "CostParams",
    "CostReport",
    "decode_step_flops",
    "prefill_layer_flops",
    "prune_overhead_flops",
    "run_cost",
    "text_len_for_dense_flops",
    "tflops"
]
