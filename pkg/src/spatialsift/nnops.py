"""Small neural-network primitives shared by the inference modules."""

import numpy as np
from scipy.special import expit


def sigmoid(x):
    return expit(x)


def elu(x, alpha=1.0):
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def lstm_forward(x, w_input, w_recurrent, bias):
    """Single-direction LSTM over a (T, D) sequence, zero initial state.

    Weights follow the gate order (input, forget, cell, output) stacked
    along the first axis: w_input (4H, D), w_recurrent (4H, H), bias (4H).

    Returns:
        hidden states (T, H).
    """
    four_h = w_input.shape[0]
    hidden = four_h // 4
    if w_recurrent.shape != (four_h, hidden) or bias.shape != (four_h,):
        raise ValueError(
            f"inconsistent LSTM weight shapes: input {w_input.shape}, "
            f"recurrent {w_recurrent.shape}, bias {bias.shape}"
        )
    T = x.shape[0]
    dtype = x.dtype
    h = np.zeros(hidden, dtype=dtype)
    c = np.zeros(hidden, dtype=dtype)
    pre_in = x @ w_input.T + bias  # (T, 4H)
    out = np.empty((T, hidden), dtype=dtype)
    for t in range(T):
        gates = pre_in[t] + w_recurrent @ h
        i = sigmoid(gates[:hidden])
        f = sigmoid(gates[hidden : 2 * hidden])
        g = np.tanh(gates[2 * hidden : 3 * hidden])
        o = sigmoid(gates[3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out
