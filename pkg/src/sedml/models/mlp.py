"""Fully connected feed-forward classifier trained by backpropagation.

Hidden blocks are ``affine -> [batch norm] -> activation -> [dropout]``;
the output layer is affine followed by softmax cross-entropy.  Dropout is
inverted (activations are rescaled at train time, identity at inference).
Batch norm uses batch statistics in training and running averages at
inference.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class NumericalFailure(FloatingPointError):
    pass


@dataclass
class NetworkArchitecture:
    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    dropout_rate: float = 0.0
    batch_norm: bool = False
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 32
    l2: float = 0.0
    output_gain: float = 0.1

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("layer_sizes needs >= 2 entries, all >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z, a):
    return 1.0 - a * a


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


def init_params(arch: NetworkArchitecture, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """He-normal hidden weights, zero biases, unit BN scale.

    The output layer uses LeCun scaling times ``output_gain`` so the initial
    softmax is close to uniform.
    """
    params = {}
    sizes = arch.layer_sizes
    L = len(sizes) - 1
    for l in range(L):
        fan_in, fan_out = sizes[l], sizes[l + 1]
        if l < L - 1:
            std = np.sqrt(2.0 / fan_in)
        else:
            std = arch.output_gain * np.sqrt(1.0 / fan_in)
        params[f"W{l}"] = rng.normal(0.0, std, (fan_in, fan_out))
        params[f"b{l}"] = np.zeros(fan_out)
        if arch.batch_norm and l < L - 1:
            params[f"gamma{l}"] = np.ones(fan_out)
            params[f"beta{l}"] = np.zeros(fan_out)
    return params


def _softmax_xent(logits, y_idx):
    Z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    logp = Z - logsum[:, None]
    n = logits.shape[0]
    loss = -logp[np.arange(n), y_idx].mean()
    P = np.exp(logp)
    d = P.copy()
    d[np.arange(n), y_idx] -= 1.0
    return loss, P, d / n


def forward(params, arch, X, train, running=None, rng=None, y_idx=None):
    """Run the network; returns (logits, cache).

    ``running`` holds batch-norm running statistics; in train mode they are
    updated in place when supplied.
    """
    act, _ = ACTIVATIONS[arch.activation]
    L = len(arch.layer_sizes) - 1
    h = X
    cache = []
    for l in range(L - 1):
        z = h @ params[f"W{l}"] + params[f"b{l}"]
        entry = {"h_in": h, "z": z}
        if arch.batch_norm:
            if train:
                mu, var = z.mean(axis=0), z.var(axis=0)
                if running is not None:
                    running[f"mean{l}"] = (1 - BN_MOMENTUM) * running[f"mean{l}"] + BN_MOMENTUM * mu
                    running[f"var{l}"] = (1 - BN_MOMENTUM) * running[f"var{l}"] + BN_MOMENTUM * var
            else:
                mu, var = running[f"mean{l}"], running[f"var{l}"]
            inv = 1.0 / np.sqrt(var + BN_EPS)
            zhat = (z - mu) * inv
            entry.update(zhat=zhat, inv=inv)
            u = params[f"gamma{l}"] * zhat + params[f"beta{l}"]
        else:
            u = z
        a = act(u)
        entry.update(u=u, a=a)
        if train and arch.dropout_rate > 0:
            keep = 1.0 - arch.dropout_rate
            m = (rng.random(a.shape) < keep) / keep
            entry["drop"] = m
            a = a * m
        cache.append(entry)
        h = a
    logits = h @ params[f"W{L - 1}"] + params[f"b{L - 1}"]
    cache.append({"h_in": h})
    return logits, cache


def backward(params, arch, cache, dlogits):
    _, act_grad = ACTIVATIONS[arch.activation]
    L = len(arch.layer_sizes) - 1
    grads = {}
    top = cache[-1]
    grads[f"W{L - 1}"] = top["h_in"].T @ dlogits
    grads[f"b{L - 1}"] = dlogits.sum(axis=0)
    dh = dlogits @ params[f"W{L - 1}"].T
    for l in range(L - 2, -1, -1):
        e = cache[l]
        if "drop" in e:
            dh = dh * e["drop"]
        du = dh * act_grad(e["u"], e["a"])
        if arch.batch_norm:
            zhat, inv = e["zhat"], e["inv"]
            grads[f"gamma{l}"] = (du * zhat).sum(axis=0)
            grads[f"beta{l}"] = du.sum(axis=0)
            dzhat = du * params[f"gamma{l}"]
            n = dzhat.shape[0]
            dz = (inv / n) * (n * dzhat - dzhat.sum(axis=0) - zhat * (dzhat * zhat).sum(axis=0))
        else:
            dz = du
        grads[f"W{l}"] = e["h_in"].T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        dh = dz @ params[f"W{l}"].T
    return grads


def loss_and_grads(params, arch, X, y_idx, train=True, rng=None, running=None):
    logits, cache = forward(params, arch, X, train, running=running, rng=rng)
    loss, _, d = _softmax_xent(logits, y_idx)
    grads = backward(params, arch, cache, d)
    if arch.l2 > 0:
        for k in params:
            if k.startswith("W"):
                loss += 0.5 * arch.l2 * float((params[k] ** 2).sum())
                grads[k] = grads[k] + arch.l2 * params[k]
    return loss, grads


class _Optimizer:
    def __init__(self, kind, lr, params):
        self.kind, self.lr, self.t = kind, lr, 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            if self.kind == "sgd":
                params[k] -= self.lr * g
            elif self.kind == "momentum":
                self.m[k] = 0.9 * self.m[k] - self.lr * g
                params[k] += self.m[k]
            else:
                b1, b2 = 0.9, 0.999
                self.m[k] = b1 * self.m[k] + (1 - b1) * g
                self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
                mhat = self.m[k] / (1 - b1**self.t)
                vhat = self.v[k] / (1 - b2**self.t)
                params[k] -= self.lr * mhat / (np.sqrt(vhat) + 1e-8)


@dataclass
class TrainingHistory:
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)


class MLPClassifier:
    """Network engine behind both the single-hidden-layer MLP and the DNN.

    ``hidden_layers`` lists hidden widths; input and output widths come
    from the data at fit time.
    """

    def __init__(
        self,
        hidden_layers=(100,),
        activation="relu",
        dropout_rate=0.0,
        batch_norm=False,
        optimizer="adam",
        learning_rate=1e-3,
        epochs=60,
        batch_size=32,
        l2=0.0,
        seed=0,
    ):
        self.hidden_layers = tuple(int(h) for h in hidden_layers)
        self.activation = activation
        self.dropout_rate = dropout_rate
        self.batch_norm = batch_norm
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2 = l2
        self.seed = seed

    def architecture(self, n_features, n_classes) -> NetworkArchitecture:
        return NetworkArchitecture(
            (n_features, *self.hidden_layers, n_classes),
            activation=self.activation,
            dropout_rate=self.dropout_rate,
            batch_norm=self.batch_norm,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            l2=self.l2,
        )

    def fit(self, X, y_idx, n_classes, eval_set=None):
        X = np.asarray(X, dtype=np.float64)
        y_idx = np.asarray(y_idx, dtype=np.int64)
        self.arch_ = arch = self.architecture(X.shape[1], n_classes)
        rng = np.random.default_rng(self.seed)
        params = init_params(arch, rng)
        running = {}
        if arch.batch_norm:
            for l, width in enumerate(arch.layer_sizes[1:-1]):
                running[f"mean{l}"] = np.zeros(width)
                running[f"var{l}"] = np.ones(width)
        opt = _Optimizer(arch.optimizer, arch.learning_rate, params)
        self.params_, self.running_ = params, running
        self.history_ = hist = TrainingHistory()
        n = X.shape[0]
        for epoch in range(arch.epochs):
            order = rng.permutation(n)
            total = 0.0
            for s in range(0, n, arch.batch_size):
                batch = order[s : s + arch.batch_size]
                if arch.batch_norm and batch.size < 2 and n >= 2:
                    continue  # single-row batches have no batch variance
                loss, grads = loss_and_grads(params, arch, X[batch], y_idx[batch], True, rng, running)
                if not np.isfinite(loss):
                    raise NumericalFailure(f"non-finite loss at epoch {epoch + 1}")
                opt.step(params, grads)
                total += loss * batch.size
            hist.loss.append(total / n)
            hist.train_accuracy.append(float(np.mean(self.predict_index(X) == y_idx)))
            if eval_set is not None:
                Xe, ye = eval_set
                hist.test_accuracy.append(float(np.mean(self.predict_index(Xe) == ye)))
        return self

    def decision_function(self, X):
        logits, _ = forward(self.params_, self.arch_, np.asarray(X, dtype=np.float64), False, running=self.running_)
        return logits

    def predict_proba(self, X):
        Z = self.decision_function(X)
        Z = Z - Z.max(axis=1, keepdims=True)
        E = np.exp(Z)
        return E / E.sum(axis=1, keepdims=True)

    def predict_index(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def get_state(self):
        a = self.arch_
        return {
            "architecture": {
                "layer_sizes": list(a.layer_sizes),
                "activation": a.activation,
                "dropout_rate": a.dropout_rate,
                "batch_norm": a.batch_norm,
            },
            "params": {k: v.tolist() for k, v in self.params_.items()},
            "running": {k: v.tolist() for k, v in self.running_.items()},
            "history": {
                "loss": self.history_.loss,
                "train_accuracy": self.history_.train_accuracy,
                "test_accuracy": self.history_.test_accuracy,
            },
        }

    def set_state(self, st):
        self.arch_ = NetworkArchitecture(**st["architecture"])
        self.params_ = {k: np.asarray(v, dtype=np.float64) for k, v in st["params"].items()}
        self.running_ = {k: np.asarray(v, dtype=np.float64) for k, v in st["running"].items()}
        self.history_ = TrainingHistory(**st.get("history", {}))
        return self


def mlp_gradient_check(arch: NetworkArchitecture, X, y_idx, seed: int = 0, step: float = 1e-5, params=None):
    """Largest relative gap between backprop and central-difference gradients.

    Dropout is switched off; batch norm, when enabled, runs in training mode
    on the fixed batch so the loss is a deterministic function of the
    parameters.  Relative error is ``|a - n| / max(|a| + |n|, 1e-6)``.  The
    floor sits above central-difference roundoff, so exactly-zero gradients
    (biases feeding batch norm) are compared in absolute terms.  Without
    ``params`` the weights come from the usual initialiser while biases and
    batch-norm shifts are drawn from N(0, 0.1^2); with zero shifts a sample
    whose previous layer is fully inactive sits exactly on the ReLU kink.
    """
    arch = NetworkArchitecture(**{**arch.__dict__, "dropout_rate": 0.0})
    X = np.asarray(X, dtype=np.float64)
    y_idx = np.asarray(y_idx, dtype=np.int64)
    if params is None:
        rng = np.random.default_rng(seed)
        params = init_params(arch, rng)
        for k in params:
            if k.startswith("b"):
                params[k] = 0.1 * rng.standard_normal(params[k].shape)
    params = {k: v.copy() for k, v in params.items()}
    _, grads = loss_and_grads(params, arch, X, y_idx, train=True)
    worst = 0.0
    for k, P in params.items():
        it = np.nditer(P, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = P[ix]
            P[ix] = orig + step
            lp, _ = loss_and_grads(params, arch, X, y_idx, train=True)
            P[ix] = orig - step
            lm, _ = loss_and_grads(params, arch, X, y_idx, train=True)
            P[ix] = orig
            num = (lp - lm) / (2 * step)
            ana = grads[k][ix]
            worst = max(worst, abs(ana - num) / max(abs(ana) + abs(num), 1e-6))
    return worst
