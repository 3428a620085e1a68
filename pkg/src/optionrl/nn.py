"""Dense tanh MLPs with hand-written backward passes, and a flat text checkpoint format.

Checkpoint grammar (one record per line, whitespace separated)::

    optionrl-checkpoint 1
    meta <key> <value>                # zero or more
    net <name> <n_layers>
    layer <out_dim> <in_dim>          # n_layers times, each followed by:
    W <out_dim*in_dim floats, row-major>
    b <out_dim floats>
    end

Floats are written with ``repr`` so a save/load round trip is bit-exact.
"""
import numpy as np

from .exceptions import ConfigurationError

MAGIC = "optionrl-checkpoint"
VERSION = 1


def orthogonal(shape, gain, rng):
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


class Mlp:
    """y = W_k tanh(... tanh(W_0 x + b_0) ...) + b_k, weights stored as (out, in)."""

    def __init__(self, sizes, rng=None, hidden_gain=1.0, output_gain=1.0):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigurationError(f"bad layer sizes {sizes}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = output_gain if k == len(sizes) - 2 else hidden_gain
            self.weights.append(orthogonal((n_out, n_in), gain, rng))
            self.biases.append(np.zeros(n_out))

    @classmethod
    def from_arrays(cls, weights, biases):
        net = cls.__new__(cls)
        net.weights = [np.array(w, dtype=np.float64) for w in weights]
        net.biases = [np.array(b, dtype=np.float64) for b in biases]
        net._check_dims()
        return net

    def _check_dims(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigurationError("weights and biases must pair up")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigurationError(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ConfigurationError(f"layer {k} input dim does not match layer {k - 1}")

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    @property
    def sizes(self):
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    @property
    def params(self):
        """Flat list [W0, b0, W1, b1, ...] aliasing the live arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return Mlp.from_arrays([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ConfigurationError(f"input dim {x.shape[-1]} != {self.in_dim}")
        return x

    def forward(self, x):
        x = self._check_input(x)
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < last:
                h = np.tanh(h)
        return h

    def forward_cached(self, x):
        """Forward pass that also returns the per-layer inputs needed by `backward`."""
        x = self._check_input(x)
        inputs = []
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w.T + b
            if k < last:
                h = np.tanh(h)
        return h, inputs

    def backward(self, inputs, grad_out):
        """Returns (param grads aligned with `params`, grad wrt the network input).

        Works for a single vector or a batch (leading axis summed over).
        """
        g = np.asarray(grad_out, dtype=np.float64)
        if g.shape[-1] != self.out_dim:
            raise ConfigurationError(f"upstream gradient dim {g.shape[-1]} != {self.out_dim}")
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            x = inputs[k]
            if g.ndim == 1:
                grads[2 * k] = np.outer(g, x)
                grads[2 * k + 1] = g.copy()
            else:
                grads[2 * k] = g.T @ x
                grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k]
            if k > 0:
                g = g * (1.0 - x * x)  # x is tanh output of the layer below
        return grads, g


def mlp_forward(net, x):
    return net.forward(x)


def mlp_backward(net, x, grad_out):
    _, inputs = net.forward_cached(x)
    return net.backward(inputs, grad_out)


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_checkpoint(path, nets, meta=None):
    lines = [f"{MAGIC} {VERSION}"]
    for key, value in (meta or {}).items():
        text = str(value)
        if not text or any(c.isspace() for c in text):
            raise ConfigurationError(f"meta value for {key!r} must be a non-empty token")
        lines.append(f"meta {key} {text}")
    for name, net in nets.items():
        lines.append(f"net {name} {len(net.weights)}")
        for w, b in zip(net.weights, net.biases):
            lines.append(f"layer {w.shape[0]} {w.shape[1]}")
            lines.append("W " + _fmt(w))
            lines.append("b " + _fmt(b))
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Returns (nets dict, meta dict of strings)."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0] != [MAGIC, str(VERSION)]:
        raise ConfigurationError(f"{path}: not a version {VERSION} checkpoint")
    meta, nets = {}, {}
    i = 1
    while lines[i][0] != "end":
        tag = lines[i][0]
        if tag == "meta":
            meta[lines[i][1]] = lines[i][2]
            i += 1
        elif tag == "net":
            name, n_layers = lines[i][1], int(lines[i][2])
            i += 1
            weights, biases = [], []
            for _ in range(n_layers):
                n_out, n_in = int(lines[i][1]), int(lines[i][2])
                w = np.array([float(v) for v in lines[i + 1][1:]]).reshape(n_out, n_in)
                b = np.array([float(v) for v in lines[i + 2][1:]])
                weights.append(w)
                biases.append(b)
                i += 3
            nets[name] = Mlp.from_arrays(weights, biases)
        else:
            raise ConfigurationError(f"{path}: unknown record {tag!r}")
    return nets, meta
