"""Walkthrough: low-rank adapter arithmetic on a frozen linear layer.

The adapted forward pass routes the update through the rank bottleneck,
y = W x + s * A (B x), and merging folds s * A @ B into the weights so a
plain product gives the same answer. Both scaling conventions are shown:
unit (s = 1) and the conventional alpha / rank.
"""

import numpy as np

from ragpipes import (
    LinearLayer,
    LoraAdapter,
    ScalingMode,
    lora_forward,
    merge_adapter,
    parameter_reduction,
    scaling_factor,
)

rng = np.random.RandomState(42)
d, k, r = 8, 6, 2

layer = LinearLayer(rng.standard_normal((d, k)).astype(np.float32))
adapter = LoraAdapter(
    A=(rng.standard_normal((d, r)) * 0.3).astype(np.float32),
    B=(rng.standard_normal((r, k)) * 0.3).astype(np.float32),
    rank=r,
    alpha=32.0,
    dropout=0.05,  # recorded from training; inert at inference
)
x = rng.standard_normal(k)

print(f"layer W: {d}x{k}, adapter rank {r}, alpha {adapter.alpha}")
print(f"scaling s: unit={scaling_factor(adapter, ScalingMode.UNIT)}, "
      f"alpha/rank={scaling_factor(adapter, ScalingMode.ALPHA_OVER_RANK)}")

for mode in (ScalingMode.UNIT, ScalingMode.ALPHA_OVER_RANK):
    via_bottleneck = lora_forward(x, layer, adapter, mode)
    s = scaling_factor(adapter, mode)
    dense = layer.W.astype(np.float64) + s * (
        adapter.A.astype(np.float64) @ adapter.B.astype(np.float64)
    )
    err_dense = np.max(np.abs(via_bottleneck - dense @ x))
    merged = merge_adapter(layer, adapter, mode)
    err_merge = np.max(np.abs(merged.forward(x) - via_bottleneck))
    print(f"\n{mode.name}:")
    print(f"  bottleneck vs explicit dense (W + sAB)x : max err {err_dense:.2e}")
    print(f"  merged-layer forward vs adapter forward : max err {err_merge:.2e}")

# Trainable-parameter savings of adapting a whole stack of layers at r=2:
# four square attention projections plus the two MLP matrices per block.
block = [(256, 256)] * 4 + [(1024, 256), (256, 1024)]
shapes = block * 12
reduction = parameter_reduction(shapes, r=2)
print(f"\nadapting {len(shapes)} layers at rank 2 trains "
      f"{100 * (1 - reduction):.2f}% of the dense parameters "
      f"({100 * reduction:.2f}% reduction)")
print(f"square-layer boundary: at d=k=10, rank 1 already saves only "
      f"{100 * parameter_reduction([(10, 10)], 1):.0f}%")
