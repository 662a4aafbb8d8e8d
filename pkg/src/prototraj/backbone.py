"""Recurrent backbone: stacked LSTM plus a sigmoid classification head.

Forward and backward passes are written out by hand in double precision so
gradients can be verified against finite differences. The head consumes
the concatenation of every layer's final hidden state (for the default two
layers of 128 this is the 256-wide fully connected input), applies an
affine map and an elementwise sigmoid; outputs live in [0, 1]^C to match
multi-hot labels and the square loss.

Gate layout inside the stacked weight rows: input, forget, candidate,
output (4H rows). Inverted dropout before the head is active only when a
training-mode RNG is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LSTMLayerParams:
    w_x: np.ndarray  # (4H, input_dim)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]


@dataclass
class BackboneParams:
    layers: list[LSTMLayerParams]
    head_w: np.ndarray  # (C, L*H)
    head_b: np.ndarray  # (C,)

    @property
    def input_size(self) -> int:
        return self.layers[0].w_x.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_classes(self) -> int:
        return self.head_w.shape[0]


def init_backbone(
    input_size: int,
    hidden_size: int,
    num_layers: int,
    num_classes: int,
    rng: np.random.Generator,
) -> BackboneParams:
    """Uniform(-0.1, 0.1) init with the forget-gate bias lifted by +1."""
    layers = []
    in_dim = input_size
    h = hidden_size
    for _ in range(num_layers):
        w_x = rng.uniform(-0.1, 0.1, size=(4 * h, in_dim))
        w_h = rng.uniform(-0.1, 0.1, size=(4 * h, h))
        b = rng.uniform(-0.1, 0.1, size=4 * h)
        b[h : 2 * h] += 1.0
        layers.append(LSTMLayerParams(w_x, w_h, b))
        in_dim = h
    head_w = rng.uniform(-0.1, 0.1, size=(num_classes, num_layers * h))
    head_b = rng.uniform(-0.1, 0.1, size=num_classes)
    return BackboneParams(layers, head_w, head_b)


@dataclass
class LayerTrace:
    """Per-time-step values of one LSTM layer kept for BPTT."""

    inputs: np.ndarray  # (T, input_dim)
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class ForwardCache:
    traces: list[LayerTrace]
    features: np.ndarray  # concatenated final hidden states, pre-dropout
    dropout_mask: np.ndarray | None
    logits: np.ndarray
    y_hat: np.ndarray


def forward(
    S: np.ndarray,
    params: BackboneParams,
    dropout_rate: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
) -> ForwardCache:
    """Run the stacked LSTM over the T x K input and produce y_hat in [0,1]^C.

    Dropout applies to the head features only when both a positive rate and
    an RNG are given (training mode); evaluation passes omit the RNG.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] < 1:
        raise NumericError("backbone input must be a T x K matrix with T >= 1")
    if S.shape[1] != params.input_size:
        raise NumericError(
            f"backbone input width {S.shape[1]} != configured {params.input_size}"
        )

    T = S.shape[0]
    x = S
    traces = []
    for layer in params.layers:
        H = layer.hidden_size
        i_t = np.empty((T, H))
        f_t = np.empty((T, H))
        g_t = np.empty((T, H))
        o_t = np.empty((T, H))
        c_t = np.empty((T, H))
        tanh_c = np.empty((T, H))
        h_t = np.empty((T, H))
        h_prev = np.zeros(H)
        c_prev = np.zeros(H)
        for t in range(T):
            z = layer.w_x @ x[t] + layer.w_h @ h_prev + layer.b
            i = sigmoid(z[:H])
            f = sigmoid(z[H : 2 * H])
            g = np.tanh(z[2 * H : 3 * H])
            o = sigmoid(z[3 * H :])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            i_t[t], f_t[t], g_t[t], o_t[t] = i, f, g, o
            c_t[t], tanh_c[t], h_t[t] = c, tc, h
            h_prev, c_prev = h, c
        traces.append(LayerTrace(x, i_t, f_t, g_t, o_t, c_t, tanh_c, h_t))
        x = h_t

    features = np.concatenate([trace.h[-1] for trace in traces])
    if dropout_rate > 0.0 and dropout_rng is not None:
        keep = 1.0 - dropout_rate
        mask = (dropout_rng.random(features.shape[0]) < keep) / keep
        dropped = features * mask
    else:
        mask = None
        dropped = features
    logits = params.head_w @ dropped + params.head_b
    return ForwardCache(traces, features, mask, logits, sigmoid(logits))


@dataclass
class BackboneGrads:
    layers: list[LSTMLayerParams]
    head_w: np.ndarray
    head_b: np.ndarray


def backward(cache: ForwardCache, params: BackboneParams, d_y: np.ndarray):
    """Backpropagation through time.

    ``d_y`` is dLoss/dy_hat. Returns (BackboneGrads, dS) where dS is the
    gradient on the input matrix, letting the prototype layer continue the
    chain.
    """
    y = cache.y_hat
    d_logits = np.asarray(d_y, dtype=np.float64) * y * (1.0 - y)

    dropped = cache.features if cache.dropout_mask is None else cache.features * cache.dropout_mask
    g_head_w = np.outer(d_logits, dropped)
    g_head_b = d_logits.copy()
    d_feat = params.head_w.T @ d_logits
    if cache.dropout_mask is not None:
        d_feat = d_feat * cache.dropout_mask

    L = params.num_layers
    H = params.hidden_size
    T = cache.traces[0].h.shape[0]

    # Gradient flowing into each layer's hidden outputs: the head piece at
    # the final step, plus (for lower layers) the upper layer's input grads.
    d_hidden = [np.zeros((T, H)) for _ in range(L)]
    for l in range(L):
        d_hidden[l][-1] += d_feat[l * H : (l + 1) * H]

    layer_grads: list[LSTMLayerParams | None] = [None] * L
    d_input = None
    for l in range(L - 1, -1, -1):
        trace = cache.traces[l]
        layer = params.layers[l]
        up = d_hidden[l]
        gw_x = np.zeros_like(layer.w_x)
        gw_h = np.zeros_like(layer.w_h)
        gb = np.zeros_like(layer.b)
        d_input = np.zeros_like(trace.inputs)
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(T - 1, -1, -1):
            dh = up[t] + dh_next
            i, f, g, o = trace.i[t], trace.f[t], trace.g[t], trace.o[t]
            tc = trace.tanh_c[t]
            dc = dc_next + dh * o * (1.0 - tc * tc)
            do = dh * tc
            di = dc * g
            dg = dc * i
            c_prev = trace.c[t - 1] if t > 0 else np.zeros(H)
            df = dc * c_prev
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ]
            )
            h_prev = trace.h[t - 1] if t > 0 else np.zeros(H)
            gw_x += np.outer(dz, trace.inputs[t])
            gw_h += np.outer(dz, h_prev)
            gb += dz
            d_input[t] = layer.w_x.T @ dz
            dh_next = layer.w_h.T @ dz
            dc_next = dc * f
        layer_grads[l] = LSTMLayerParams(gw_x, gw_h, gb)
        if l > 0:
            d_hidden[l - 1] += d_input

    return BackboneGrads(layer_grads, g_head_w, g_head_b), d_input
