import numpy as np

PROB_FLOOR = 1e-12


def logsumexp(logits, axis=-1):
    m = np.max(logits, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(logits - m), axis=axis))


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_backward(probs, grad, axis=-1):
    """Gradient wrt logits given probs = softmax(logits) and dL/dprobs."""
    return probs * (grad - np.sum(grad * probs, axis=axis, keepdims=True))


def floored(probs, floor=PROB_FLOOR, axis=-1):
    """Mix in a floor while keeping rows normalized: (1 - K*floor) * p + floor."""
    k = probs.shape[axis]
    return (1.0 - k * floor) * probs + floor


def floored_scale(k, floor=PROB_FLOOR):
    return 1.0 - k * floor


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def entropy(probs, axis=-1):
    return -np.sum(probs * np.log(probs), axis=axis)
