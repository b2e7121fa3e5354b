"""Fit a tiny logistic regression with the tape, then check one gradient by hand.

Everything the fader needs is built from a handful of primitives recorded on a
``Tape``. Leaves carry names; ``backward`` returns gradients keyed by those names.
"""

import numpy as np

from voxfader import nn_core as nn

rng = np.random.default_rng(0)
x = rng.normal(size=(200, 3))
y = (x @ np.array([1.5, -2.0, 0.5]) + 0.3 > 0).astype(float).reshape(-1, 1)

params = nn.ParameterSet({"W": np.zeros((1, 3)), "b": np.zeros(1)})
opt = nn.sgd_momentum(params, lr=0.1, momentum=0.9)

for step in range(101):
    tape = nn.Tape()
    p = params.attach(tape)
    loss = nn.bce_from_logit(nn.affine(p["W"], p["b"], x), y)
    grads = nn.backward(tape, loss)
    params = nn.optimizer_step(opt, params, grads)
    if step % 25 == 0:
        print(f"step {step:3d}  loss {float(loss.value):.4f}")

# the analytic gradient should agree with a central difference
tape = nn.Tape()
p = params.attach(tape)
loss = nn.bce_from_logit(nn.affine(p["W"], p["b"], x), y)
g = nn.backward(tape, loss)["W"][0, 1]

def loss_at(w01):
    W = params["W"].copy()
    W[0, 1] = w01
    z = x @ W.T + params["b"]
    return float(np.mean(np.logaddexp(0, z) - y * z))

h = 1e-6
fd = (loss_at(params["W"][0, 1] + h) - loss_at(params["W"][0, 1] - h)) / (2 * h)
print(f"dL/dW[0,1]: tape {g:.8f}  finite difference {fd:.8f}")
print("learned direction:", np.round(params["W"][0] / np.linalg.norm(params["W"][0]), 3))
