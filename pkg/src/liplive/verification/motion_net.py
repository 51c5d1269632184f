"""Recurrent + convolutional lip-motion verifier in plain numpy (float64).

Input is a (6, 128) fragment: I_g/Q_g of three carriers over 128 resampled
time steps.  The convolutional branch treats the six channels as rows and
slides 1-D kernels along time with weights shared across rows; the final
6x1 convolution mixes the rows.  The recurrent branch reads the 128 steps as
a sequence of 6-vectors through two stacked LSTM layers and keeps the last
hidden state.  Both outputs are concatenated and mapped to two logits
(0 = not a lip, 1 = lip).

Shapes of the convolutional branch, (rows, time, channels):
    6x128 -> conv 9/2 x32 -> 6x64x32 -> pool -> 6x32x32 -> conv 3 x64 -> 6x32x64
    -> conv 3 x128 -> 6x32x128 -> pool -> 6x16x128 -> conv 6x1 x128 -> 1x16x128
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ARCH_TAG = "lstm2x64-cnn6x128-v1"
N_ROWS, N_STEPS, HIDDEN = 6, 128, 64
CNN_OUT = 16 * 128


class MotionDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layers; activations are laid out (batch, rows, time, channels)


def _same_pad(length: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-length // stride)
    total = max((out - 1) * stride + k - length, 0)
    return out, total // 2, total - total // 2


def conv_forward(x, w, b, stride):
    """x (B,R,L,Ci), w (k,Ci,Co) -> (B,R,Lo,Co); 'same' padding along time."""
    k = w.shape[0]
    lo, pl, pr = _same_pad(x.shape[2], k, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr), (0, 0)))
    cols = sliding_window_view(xp, k, axis=2)[:, :, ::stride][:, :, :lo]   # (B,R,Lo,Ci,k)
    cols = cols.transpose(0, 1, 2, 4, 3).reshape(-1, k * x.shape[3])
    y = cols @ w.reshape(k * x.shape[3], -1) + b
    return y.reshape(x.shape[0], x.shape[1], lo, -1), (cols, xp.shape, pl, stride, lo, x.shape[2])


def conv_backward(dy, w, cache):
    """-> (dx, dw, db) for ``conv_forward``."""
    cols, xp_shape, pl, stride, lo, length = cache
    k, ci, co = w.shape
    d2 = dy.reshape(-1, co)
    dw = (cols.T @ d2).reshape(k, ci, co)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(k * ci, co).T).reshape(dy.shape[0], dy.shape[1], lo, k, ci)
    dxp = np.zeros(xp_shape)
    for j in range(k):
        dxp[:, :, j: j + stride * (lo - 1) + 1: stride] += dcols[:, :, :, j]
    return dxp[:, :, pl: pl + length], dw, db


def pool_forward(x):
    """Max pool 2/2 along time."""
    B, R, L, C = x.shape
    v = x[:, :, : L // 2 * 2].reshape(B, R, L // 2, 2, C)
    arg = v.argmax(axis=3)
    return np.take_along_axis(v, arg[:, :, :, None], axis=3)[:, :, :, 0], (arg, x.shape)


def pool_backward(dy, cache):
    arg, shape = cache
    B, R, L, C = shape
    dv = np.zeros((B, R, L // 2, 2, C))
    np.put_along_axis(dv, arg[:, :, :, None], dy[:, :, :, None], axis=3)
    dx = np.zeros(shape)
    dx[:, :, : L // 2 * 2] = dv.reshape(B, R, L // 2 * 2, C)
    return dx


def _sigmoid(z):
    return 0.5 * (1 + np.tanh(0.5 * z))


def lstm_forward(xs, w, b, hidden):
    """xs (T,B,D); w (D+H, 4H) gate order i,f,g,o -> hs (T,B,H)."""
    T, B, _ = xs.shape
    h = np.zeros((B, hidden))
    c = np.zeros((B, hidden))
    hs = np.empty((T, B, hidden))
    caches = []
    for t in range(T):
        xh = np.concatenate([xs[t], h], axis=1)
        z = xh @ w + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = _sigmoid(z[:, 3 * hidden:])
        c_prev = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[t] = h
        caches.append((xh, i, f, g, o, c_prev, tc))
    return hs, caches


def lstm_backward(dhs, w, caches, hidden):
    """dhs (T,B,H) gradient on every hidden output -> (dxs, dw, db)."""
    T, B, _ = dhs.shape
    D = w.shape[0] - hidden
    dw = np.zeros_like(w)
    db = np.zeros(w.shape[1])
    dxs = np.empty((T, B, D))
    dh_next = np.zeros((B, hidden))
    dc_next = np.zeros((B, hidden))
    for t in range(T - 1, -1, -1):
        xh, i, f, g, o, c_prev, tc = caches[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dh * o * (1 - tc * tc) + dc_next
        di, df, dg = dc * g, dc * c_prev, dc * i
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g),
                             do * o * (1 - o)], axis=1)
        dw += xh.T @ dz
        db += dz.sum(axis=0)
        dxh = dz @ w.T
        dxs[t] = dxh[:, :D]
        dh_next = dxh[:, D:]
        dc_next = dc * f
    return dxs, dw, db


# ---------------------------------------------------------------------------
# model

_CONV_SPECS = (("conv1", 9, 1, 32, 2), ("conv2", 3, 32, 64, 1), ("conv3", 3, 64, 128, 1))


def init_params(seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    for name, k, ci, co, _ in _CONV_SPECS:
        p[name + ".w"] = rng.standard_normal((k, ci, co)) * np.sqrt(2.0 / (k * ci))
        p[name + ".b"] = np.zeros(co)
    p["conv4.w"] = rng.standard_normal((N_ROWS * 128, 128)) * np.sqrt(2.0 / (N_ROWS * 128))
    p["conv4.b"] = np.zeros(128)
    for layer, d in (("lstm1", N_ROWS), ("lstm2", HIDDEN)):
        s = 1.0 / np.sqrt(HIDDEN)
        p[layer + ".w"] = rng.uniform(-s, s, (d + HIDDEN, 4 * HIDDEN))
        b = np.zeros(4 * HIDDEN)
        b[HIDDEN:2 * HIDDEN] = 1.0                       # forget-gate bias
        p[layer + ".b"] = b
    p["fc.w"] = rng.standard_normal((HIDDEN + CNN_OUT, 2)) * np.sqrt(1.0 / (HIDDEN + CNN_OUT))
    p["fc.b"] = np.zeros(2)
    return p


def cnn_shapes(batch: int = 1) -> list[tuple]:
    """Activation shapes of the convolutional branch for a (batch, 6, 128) input."""
    x = np.zeros((batch, N_ROWS, N_STEPS, 1))
    p = init_params(0)
    out = [x.shape[1:3]]
    feats = _cnn_forward(x, p)[1]
    out += [a.shape[1:] for a in feats]
    return out


def _cnn_forward(x, p):
    caches, acts = [], []
    h = x
    for name, k, ci, co, stride in _CONV_SPECS:
        z, cc = conv_forward(h, p[name + ".w"], p[name + ".b"], stride)
        h = np.maximum(z, 0.0)
        caches.append(("conv", name, cc, z))
        acts.append(h)
        if name in ("conv1", "conv3"):
            h, pc = pool_forward(h)
            caches.append(("pool", name, pc, None))
            acts.append(h)
    B, R, L, C = h.shape
    flat_in = h.transpose(0, 2, 1, 3).reshape(B * L, R * C)     # mixes rows per time step
    z = flat_in @ p["conv4.w"] + p["conv4.b"]
    out = np.maximum(z, 0.0).reshape(B, 1, L, 128)
    caches.append(("rows", "conv4", (flat_in, (B, R, L, C)), z))
    acts.append(out)
    return out.reshape(B, -1), acts, caches


def _cnn_backward(dflat, p, caches, grads):
    kind, name, (flat_in, (B, R, L, C)), z = caches[-1]
    dz = dflat.reshape(B * L, 128) * (z > 0)
    grads["conv4.w"] = flat_in.T @ dz
    grads["conv4.b"] = dz.sum(axis=0)
    dh = (dz @ p["conv4.w"].T).reshape(B, L, R, C).transpose(0, 2, 1, 3)
    for kind, name, cc, z in reversed(caches[:-1]):
        if kind == "pool":
            dh = pool_backward(dh, cc)
        else:
            dz = dh * (z > 0)
            dh, grads[name + ".w"], grads[name + ".b"] = conv_backward(dz, p[name + ".w"], cc)
    return dh


def forward(p, x, keep_cache: bool = False):
    """x (B, 6, 128) -> logits (B, 2)."""
    x = np.asarray(x, dtype=np.float64)
    B = x.shape[0]
    cnn_flat, _, cnn_cache = _cnn_forward(x[..., None], p)
    xs = x.transpose(2, 0, 1)                                   # (T, B, 6)
    h1, c1 = lstm_forward(xs, p["lstm1.w"], p["lstm1.b"], HIDDEN)
    h2, c2 = lstm_forward(h1, p["lstm2.w"], p["lstm2.b"], HIDDEN)
    feat = np.concatenate([h2[-1], cnn_flat], axis=1)
    logits = feat @ p["fc.w"] + p["fc.b"]
    if keep_cache:
        return logits, (x, cnn_cache, h1, c1, h2, c2, feat, B)
    return logits


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(p, x, y):
    """Mean cross-entropy and its gradient with respect to every parameter."""
    logits, (x, cnn_cache, h1, c1, h2, c2, feat, B) = forward(p, x, keep_cache=True)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(B), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    g: dict[str, np.ndarray] = {}
    g["fc.w"] = feat.T @ dlogits
    g["fc.b"] = dlogits.sum(axis=0)
    dfeat = dlogits @ p["fc.w"].T
    dh2 = np.zeros_like(h2)
    dh2[-1] = dfeat[:, :HIDDEN]
    dh1, g["lstm2.w"], g["lstm2.b"] = lstm_backward(dh2, p["lstm2.w"], c2, HIDDEN)
    _, g["lstm1.w"], g["lstm1.b"] = lstm_backward(dh1, p["lstm1.w"], c1, HIDDEN)
    _cnn_backward(dfeat[:, HIDDEN:], p, cnn_cache, g)
    return loss, g


# ---------------------------------------------------------------------------
# training / inference


@dataclass
class MotionVerifierModel:
    params: dict
    hyper: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    arch: str = ARCH_TAG

    def logits(self, fragments) -> np.ndarray:
        return forward(self.params, prepare(fragments))

    def probabilities(self, fragments) -> np.ndarray:
        return softmax(self.logits(fragments))[:, 1]

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def to_dict(self) -> dict:
        return {"arch": self.arch, "hyper": self.hyper, "history": self.history,
                "params": {k: {"shape": list(v.shape),
                               "data": base64.b64encode(
                                   np.ascontiguousarray(v, dtype="<f8").tobytes()).decode()}
                           for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "MotionVerifierModel":
        if d.get("arch") != ARCH_TAG:
            raise MotionDataError(f"unsupported architecture {d.get('arch')!r}")
        params = {k: np.frombuffer(base64.b64decode(v["data"]), dtype="<f8")
                  .astype(np.float64).reshape(v["shape"]) for k, v in d["params"].items()}
        return cls(params, d.get("hyper", {}), d.get("history", []), d["arch"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "MotionVerifierModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def prepare(fragments) -> np.ndarray:
    """Stack fragments (MotionFragment or arrays) to (B, 6, 128), each scaled to unit RMS."""
    arrs = [getattr(f, "channels", f) for f in fragments]
    if not arrs:
        return np.zeros((0, N_ROWS, N_STEPS))
    x = np.stack([np.asarray(a, dtype=np.float64) for a in arrs])
    if x.shape[1:] != (N_ROWS, N_STEPS):
        raise MotionDataError(f"fragments must be {N_ROWS}x{N_STEPS}, got {x.shape[1:]}")
    rms = np.sqrt((x * x).mean(axis=(1, 2), keepdims=True))
    return x / np.where(rms > 0, rms, 1.0)


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps, self.t = lr, b1, b2, eps, 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g


def train_motion_verifier(positives, negatives, lr: float = 0.001, max_iter: int = 500,
                          seed: int = 0, batch_size: int = 16, optimizer: str = "sgd",
                          target_loss: float = 0.02, patience: int = 10,
                          log=None) -> MotionVerifierModel:
    """Minibatch training of the verifier; ``max_iter`` counts epochs.

    Stops early once the epoch-mean loss drops below ``target_loss`` or has
    not improved for ``patience`` epochs.
    """
    xp, xn = prepare(positives), prepare(negatives)
    if len(xp) == 0 or len(xn) == 0:
        raise MotionDataError("both classes need at least one fragment")
    x = np.concatenate([xp, xn])
    y = np.concatenate([np.ones(len(xp), dtype=int), np.zeros(len(xn), dtype=int)])
    rng = np.random.default_rng(seed)
    params = init_params(int(rng.integers(2**31)))
    opt = {"adam": _Adam, "sgd": _SGD}[optimizer](params, lr)
    history: list[float] = []
    best, stale = np.inf, 0
    for epoch in range(max_iter):
        order = rng.permutation(len(y))
        tot = 0.0
        for s in range(0, len(y), batch_size):
            idx = order[s:s + batch_size]
            loss, grads = loss_and_grads(params, x[idx], y[idx])
            opt.step(params, grads)
            tot += loss * len(idx)
        history.append(tot / len(y))
        if log:
            log(f"epoch {epoch + 1}: loss {history[-1]:.5f}")
        if history[-1] < best - 1e-6:
            best, stale = history[-1], 0
        else:
            stale += 1
        if history[-1] < target_loss or stale >= patience:
            break
    hyper = {"lr": lr, "max_iter": max_iter, "seed": seed, "batch_size": batch_size,
             "optimizer": optimizer, "target_loss": target_loss, "patience": patience,
             "epochs_run": len(history)}
    return MotionVerifierModel(params, hyper, history)


@dataclass
class MotionDecision:
    passed: bool
    scores: list
    n_valid: int
    expected_count: int


def verify_motion(model: MotionVerifierModel, fragments, expected_count: int,
                  threshold: float = 0.5) -> MotionDecision:
    """Pass iff strictly more than half of ``expected_count`` fragments look like lips."""
    if not fragments:
        return MotionDecision(False, [], 0, expected_count)
    probs = model.probabilities(fragments)
    n_valid = int(np.sum(probs > threshold))
    return MotionDecision(2 * n_valid > expected_count, [float(v) for v in probs],
                          n_valid, expected_count)
