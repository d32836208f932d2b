"""Forward and backward passes with every weight product routed through a backend.

Activations, pooling, the loss and all deltas are computed digitally; only
the matrix products touch the weight backends.
"""

from __future__ import annotations

import numpy as np

from .functional import activate, activation_grad, sigmoid, softmax
from .im2col import col2im, im2col, maxpool2, maxpool2_backward
from .spec import ConvAsMatrix, FullyConnected, LSTMBlock, NetworkSpec


def _with_bias(x):
    if x.ndim == 1:
        return np.append(x, 1.0)
    return np.vstack([x, np.ones((1, x.shape[1]))])


class FeedForwardNet:
    """Fully connected and convolutional layers in sequence, softmax output."""

    def __init__(self, spec: NetworkSpec, backends):
        if spec.is_recurrent:
            raise ValueError("use LSTMNet for recurrent specs")
        if len(backends) != len(spec.layers):
            raise ValueError("one backend per layer required")
        self.spec = spec
        self.backends = list(backends)

    def forward(self, x, rng=None, count=True):
        """Return output probabilities and the per-layer cache for one sample."""
        a = np.asarray(x, dtype=float)
        cache = []
        for layer, backend in zip(self.spec.layers, self.backends):
            if isinstance(layer, ConvAsMatrix):
                a_in = a.reshape(layer.in_ch, *layer.input_shape)
                X = _with_bias(im2col(a_in, layer.kernel))
                Z = backend.forward(X, rng, count)
                act = activate(layer.activation, Z.reshape(layer.out_ch, *layer.conv_shape))
                if layer.pooling:
                    a, mask = maxpool2(act)
                else:
                    a, mask = act, None
                cache.append((X, act, mask, a_in.shape))
            else:
                X = _with_bias(a.reshape(-1))
                z = backend.forward(X, rng, count)
                a = activate(layer.activation, z)
                cache.append((X, a, None, None))
        return a, cache

    def predict_batch(self, xs, rng=None) -> np.ndarray:
        """Class probabilities for a batch of fully connected inputs (columns), not counted as training."""
        if any(isinstance(layer, ConvAsMatrix) for layer in self.spec.layers):
            return np.stack([self.forward(x, rng, count=False)[0] for x in xs.T], axis=1)
        a = np.asarray(xs, dtype=float)
        for layer, backend in zip(self.spec.layers, self.backends):
            z = backend.forward(_with_bias(a), rng, count=False)
            a = softmax(z, axis=0) if layer.activation == "softmax" else activate(layer.activation, z)
        return a

    def backward(self, probs, label: int, cache, rng=None, count=True):
        """Backpropagate the softmax cross-entropy delta.

        Returns ``[(X, D), ...]`` per layer: the forward input and the
        pre-activation delta, whose outer product is the weight gradient.
        """
        layers = self.spec.layers
        delta = probs.copy()
        delta[label] -= 1.0
        pairs = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            X, _, _, in_shape = cache[i]
            pairs[i] = (X, delta)
            grad_x = self.backends[i].backward(delta, rng, count)
            if i == 0:
                break
            grad_x = grad_x[:-1]
            layer = layers[i]
            if isinstance(layer, ConvAsMatrix):
                grad_a = col2im(grad_x, in_shape, layer.kernel)
            else:
                grad_a = grad_x
            prev = layers[i - 1]
            _, prev_act, prev_mask, _ = cache[i - 1]
            if isinstance(prev, ConvAsMatrix):
                grad_a = grad_a.reshape(prev.output_shape)
                if prev.pooling:
                    grad_a = maxpool2_backward(grad_a, prev_mask, prev_act.shape)
                delta = (grad_a * activation_grad(prev.activation, prev_act)).reshape(prev.out_ch, -1)
            else:
                delta = grad_a.reshape(-1) * activation_grad(prev.activation, prev_act)
        return pairs

    def gradients(self, pairs):
        grads = []
        for X, D in pairs:
            grads.append(np.outer(D, X) if X.ndim == 1 else D @ X.T)
        return grads


class LSTMNet:
    """Stacked LSTM blocks followed by a softmax read-out, trained with truncated BPTT.

    Gate rows of each block matrix are ordered input, forget, cell, output;
    columns are [input, previous hidden, bias].
    """

    def __init__(self, spec: NetworkSpec, backends):
        if not spec.is_recurrent:
            raise ValueError("LSTMNet needs LSTM blocks")
        self.spec = spec
        self.backends = list(backends)
        self.blocks = [layer for layer in spec.layers if isinstance(layer, LSTMBlock)]
        self.vocab = spec.layers[-1].outputs
        self.reset_state()

    def reset_state(self):
        self.state = [(np.zeros(b.hidden), np.zeros(b.hidden)) for b in self.blocks]

    def forward(self, inputs, targets, rng=None, count=True, state=None):
        """Run one unrolled chunk. ``inputs``/``targets`` are integer symbol sequences.

        Returns (summed cross-entropy, cache).  The final hidden state is kept
        for the next chunk.
        """
        state = list(state if state is not None else self.state)
        steps = []
        loss = 0.0
        for sym, target in zip(inputs, targets):
            a = np.zeros(self.vocab)
            a[sym] = 1.0
            step = []
            for li, block in enumerate(self.blocks):
                h_prev, c_prev = state[li]
                xh = np.concatenate([a, h_prev, [1.0]])
                z = self.backends[li].forward(xh, rng, count)
                hdim = block.hidden
                i = sigmoid(z[:hdim])
                f = sigmoid(z[hdim:2 * hdim])
                g = np.tanh(z[2 * hdim:3 * hdim])
                o = sigmoid(z[3 * hdim:])
                c = f * c_prev + i * g
                tc = np.tanh(c)
                h = o * tc
                step.append((xh, i, f, g, o, c_prev, tc))
                state[li] = (h, c)
                a = h
            xo = np.append(a, 1.0)
            p = softmax(self.backends[-1].forward(xo, rng, count))
            loss -= float(np.log(max(p[target], 1e-12)))
            steps.append((step, xo, p, target))
        self.state = state
        return loss, steps

    def backward(self, steps, rng=None, count=True):
        """BPTT through the chunk; returns per-backend (X, D) matrices over time."""
        n_blocks = len(self.blocks)
        T = len(steps)
        xs = [[] for _ in self.backends]
        ds = [[] for _ in self.backends]
        dh_next = [np.zeros(b.hidden) for b in self.blocks]
        dc_next = [np.zeros(b.hidden) for b in self.blocks]
        for t in range(T - 1, -1, -1):
            step, xo, p, target = steps[t]
            dy = p.copy()
            dy[target] -= 1.0
            xs[-1].append(xo)
            ds[-1].append(dy)
            dh_above = self.backends[-1].backward(dy, rng, count)[:-1]
            for li in range(n_blocks - 1, -1, -1):
                xh, i, f, g, o, c_prev, tc = step[li]
                hdim = self.blocks[li].hidden
                dh = dh_above + dh_next[li]
                do = dh * tc * o * (1.0 - o)
                dc = dh * o * (1.0 - tc * tc) + dc_next[li]
                di = dc * g * i * (1.0 - i)
                dg = dc * i * (1.0 - g * g)
                df = dc * c_prev * f * (1.0 - f)
                dc_next[li] = dc * f
                dz = np.concatenate([di, df, dg, do])
                xs[li].append(xh)
                ds[li].append(dz)
                dxh = self.backends[li].backward(dz, rng, count)
                n_in = xh.shape[0] - hdim - 1
                dh_next[li] = dxh[n_in:n_in + hdim]
                dh_above = dxh[:n_in]
        # columns in forward time order
        return [(np.stack(x[::-1], axis=1), np.stack(d[::-1], axis=1)) for x, d in zip(xs, ds)]

    def gradients(self, pairs):
        return [D @ X.T for X, D in pairs]
