"""Tour of the NCHW tensor kernels the whole detector is built from.

Run from the repository root:  python3 demos/01_tensor_kernels.py
"""

import numpy as np

from maskdet import ConvParams, activate, concat_channels, conv2d, global_pool, pool2d, upsample_nearest

rng = np.random.default_rng(0)

# A "tensor" is just a float32 numpy array in (batch, channel, height, width)
# order.  Here is a single 3-channel 8x8 image.
x = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
print("input:", x.shape)

# Standard convolution: 5 output channels, 3x3 kernel, padding 1 keeps the
# spatial extent, stride 2 halves it (with the usual floor formula).
kernel = rng.standard_normal((5, 3, 3, 3)).astype(np.float32)
bias = np.zeros(5, dtype=np.float32)
y = conv2d(x, ConvParams(kernel, bias, stride=2, padding=1))
print("conv 3x3 stride 2:", y.shape)

# Depthwise convolution (groups == channels) filters each channel on its
# own; this is the workhorse of the reference backbone.
dw = rng.standard_normal((3, 1, 3, 3)).astype(np.float32)
z = conv2d(x, ConvParams(dw, padding=1, groups=3))
print("depthwise conv:", z.shape)

# A 1x1 convolution with an identity matrix over channels is a no-op:
eye = np.eye(3, dtype=np.float32).reshape(3, 3, 1, 1)
assert np.allclose(conv2d(x, ConvParams(eye)), x, atol=1e-6)
print("1x1 identity conv reproduces the input")

# Pooling and activations.
print("max pool 2x2:", pool2d(x, "max", 2, 2).shape)
print("global avg:", global_pool(x, "avg").reshape(-1))
print("relu(-1, 2) ->", activate(np.array([[[[-1.0, 2.0]]]], dtype=np.float32),
                                 "relu").ravel())
print("sigmoid(0) ->", activate(np.zeros((1, 1, 1, 1), dtype=np.float32),
                                "sigmoid").ravel())

# Nearest-neighbor upsampling replicates values into factor x factor blocks;
# sampling every factor-th pixel afterwards recovers the original exactly.
up = upsample_nearest(x, 2)
assert np.array_equal(up[:, :, ::2, ::2], x)
print("upsample 2x:", up.shape, "(strided sampling inverts it)")

# Channel concatenation glues feature maps side by side.
both = concat_channels([x, z])
print("concat channels:", both.shape)
