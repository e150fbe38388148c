"""Anatomy of the detector forward pass: backbone -> FPN -> attention heads.

Run from the repository root:  python3 demos/03_forward_pass.py
"""

import time

import numpy as np

from maskdet import (ModelConfig, backbone_forward, build_model,
                     context_attention_forward, fpn_forward, generate_anchors,
                     init_reference_weights, model_forward, weight_manifest)

config = ModelConfig(input_size=640)
manifest = weight_manifest(config)
print(f"architecture needs {len(manifest)} named tensors, e.g.:")
for name in list(manifest)[:4] + list(manifest)[-2:]:
    print(f"  {name:<28} {manifest[name]}")

# Kaiming-initialized weights stand in for trained ones; the manifest is
# validated at construction, so a missing or misshapen tensor fails fast.
store = init_reference_weights(config, seed=7)
model = build_model(config, store)

rng = np.random.default_rng(0)
image = rng.uniform(-128, 127, (1, 3, 640, 640)).astype(np.float32)

start = time.time()
taps = backbone_forward(model, image)
print("\nbackbone taps (strides 8/16/32):", [t.shape for t in taps])

pyramid = fpn_forward(model, taps)
print("FPN outputs:", [p.shape for p in pyramid])

refined = context_attention_forward(model, pyramid[0], level=0)
print("context-attention head keeps the shape:", refined.shape)

pred = model_forward(model, image)
elapsed = time.time() - start
print(f"\nfull forward in {elapsed:.2f}s")
print("predictions: loc", pred.loc.shape, "cls", pred.cls.shape)
print("row count equals anchor count:",
      pred.count == len(generate_anchors(config)))
