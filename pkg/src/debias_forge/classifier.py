"""Small feed-forward classifier: hashing featurizer, forward pass, analytic
gradients with a finite-difference check, and SGD/Adam updates.

Feature space layout for dimension D over vocabulary V (requires D > 2V):
    [0, V)      bag of tokens in segment_a
    [V, 2V)     bag of tokens in segment_b (the bias token, when present,
                therefore owns a dedicated dimension)
    [2V, D)     hashed ordered (a-token, b-token) co-occurrence counts
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, NumericError, SchemaError

LOG_EPS = 1e-12


# ---------------------------------------------------------------------------
# featurization

@dataclass(frozen=True)
class Featurizer:
    vocab_size: int
    dim: int

    def __post_init__(self):
        if self.dim <= 2 * self.vocab_size:
            raise ConfigError(
                f"feature dim {self.dim} must exceed 2*vocab_size "
                f"({2 * self.vocab_size}) to leave room for pair hashes"
            )

    def _pair_dim(self, a: int, b: int) -> int:
        n_hash = self.dim - 2 * self.vocab_size
        h = ((a * 1_000_003 + b) * 2_654_435_761) % (1 << 32)
        return 2 * self.vocab_size + h % n_hash

    def featurize(self, example) -> dict:
        """Sparse map dimension -> count; deterministic."""
        feats = {}
        for t in example.segment_a:
            feats[t] = feats.get(t, 0.0) + 1.0
        for t in example.segment_b:
            d = self.vocab_size + t
            feats[d] = feats.get(d, 0.0) + 1.0
        for a in example.segment_a:
            for b in example.segment_b:
                d = self._pair_dim(a, b)
                feats[d] = feats.get(d, 0.0) + 1.0
        return feats

    def matrix(self, examples) -> sp.csr_matrix:
        """Stack featurize() over examples into an (n, dim) CSR matrix."""
        data, indices, indptr = [], [], [0]
        for ex in examples:
            feats = self.featurize(ex)
            for d in sorted(feats):
                indices.append(d)
                data.append(feats[d])
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(examples), self.dim),
        )


# ---------------------------------------------------------------------------
# parameters

@dataclass
class ModelParams:
    W1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, K)
    b2: np.ndarray  # (K,)

    @property
    def shape(self):
        D, H = self.W1.shape
        return D, H, self.W2.shape[1]

    def copy(self):
        return ModelParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def arrays(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def init_params(D: int, H: int, K: int, rng: np.random.Generator) -> ModelParams:
    """Symmetric uniform init scaled by fan-in (biases included, which also
    keeps ReLU pre-activations off the kink for degenerate inputs)."""
    s1 = 1.0 / np.sqrt(D)
    s2 = 1.0 / np.sqrt(H)
    return ModelParams(
        W1=rng.uniform(-s1, s1, size=(D, H)),
        b1=rng.uniform(-s1, s1, size=H),
        W2=rng.uniform(-s2, s2, size=(H, K)),
        b2=rng.uniform(-s2, s2, size=K),
    )


# ---------------------------------------------------------------------------
# forward / loss / gradients

def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _as_matrix(X):
    if sp.issparse(X):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _logits(params: ModelParams, X):
    X = _as_matrix(X)
    z1 = X @ params.W1 + params.b1
    a1 = np.maximum(z1, 0.0)
    logits = a1 @ params.W2 + params.b2
    return z1, a1, logits


def forward(params: ModelParams, X) -> np.ndarray:
    """Softmax probabilities, shape (n, K); max-subtraction stabilized."""
    z1, _, logits = _logits(params, X)
    if not np.all(np.isfinite(z1)):
        raise NumericError("non-finite activations in hidden layer")
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in output layer")
    return _softmax(logits)


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    clamped: int = 0

    def arrays(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def loss_and_grad(params: ModelParams, X, targets, weights, logit_offset=None):
    """Weighted soft-target cross-entropy over a batch.

    loss_i = -weights[i] * sum_j targets[i,j] * log p[i,j], with
    p = softmax(logits + logit_offset). Returns (per-example losses,
    gradients of mean(loss_i)). The optional per-example logit_offset is how
    a fixed log-probability expert is folded into the same gradient path.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    weights = np.atleast_1d(np.asarray(weights, dtype=np.float64))
    if np.any(weights < 0):
        raise DataError("negative example weight")
    z1, a1, logits = _logits(params, X)
    if logit_offset is not None:
        logits = logits + np.atleast_2d(np.asarray(logit_offset, dtype=np.float64))
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits in output layer")
    p = _softmax(logits)

    logp = np.log(np.maximum(p, LOG_EPS))
    clamped = int(np.count_nonzero((p < LOG_EPS) & (targets > 0)))
    losses = -weights * np.einsum("ij,ij->i", targets, logp)

    dlogits = (p - targets) * weights[:, None] / n
    dW2 = a1.T @ dlogits
    db2 = dlogits.sum(axis=0)
    da1 = dlogits @ params.W2.T
    dz1 = da1 * (z1 > 0)
    dW1 = (X.T @ dz1) if sp.issparse(X) else X.T @ dz1
    if sp.issparse(dW1):
        dW1 = np.asarray(dW1.todense())
    db1 = dz1.sum(axis=0)
    return losses, Gradients(np.asarray(dW1), db1, dW2, db2, clamped)


def grad_check(params: ModelParams, X, targets, weights, eps: float = 1e-5,
               rng: np.random.Generator | None = None, coords_per_layer: int = 50,
               logit_offset=None) -> float:
    """Central finite differences on a random coordinate subsample per layer;
    returns the worst relative error."""
    if eps <= 0:
        raise ConfigError("eps must be positive")
    rng = rng or np.random.default_rng(0)

    def mean_loss(p):
        losses, _ = loss_and_grad(p, X, targets, weights, logit_offset)
        return float(losses.mean())

    _, grads = loss_and_grad(params, X, targets, weights, logit_offset)
    worst = 0.0
    for name, arr in params.arrays().items():
        flat_g = grads.arrays()[name].ravel()
        size = arr.size
        idxs = np.arange(size) if size <= coords_per_layer else rng.choice(size, coords_per_layer, replace=False)
        for i in idxs:
            orig = arr.flat[i]
            arr.flat[i] = orig + eps
            lp = mean_loss(params)
            arr.flat[i] = orig - eps
            lm = mean_loss(params)
            arr.flat[i] = orig
            num = (lp - lm) / (2 * eps)
            ana = flat_g[i]
            denom = max(abs(num) + abs(ana), 1e-8)
            worst = max(worst, abs(num - ana) / denom)
    return worst


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class OptState:
    learning_rate: float
    mode: str = "sgd"  # "sgd" | "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer mode {self.mode!r}")


def opt_step(params: ModelParams, grads: Gradients, state: OptState):
    """One in-place update; returns (params, state). Aborts on non-finite grads."""
    garrs = grads.arrays()
    for name, g in garrs.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}; step aborted")
    state.step += 1
    lr = state.learning_rate
    parrs = params.arrays()
    if state.mode == "sgd":
        for name, g in garrs.items():
            parrs[name] -= lr * g
    else:
        t = state.step
        for name, g in garrs.items():
            if name not in state.m:
                state.m[name] = np.zeros_like(g)
                state.v[name] = np.zeros_like(g)
            state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
            state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
            mhat = state.m[name] / (1 - state.beta1 ** t)
            vhat = state.v[name] / (1 - state.beta2 ** t)
            parrs[name] -= lr * mhat / (np.sqrt(vhat) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# model wrapper and checkpoint I/O

@dataclass
class Model:
    params: ModelParams
    featurizer: Featurizer
    num_labels: int
    meta: dict = field(default_factory=dict)

    def predict_proba(self, examples) -> np.ndarray:
        X = self.featurizer.matrix(examples)
        return forward(self.params, X)

    def predict(self, examples) -> np.ndarray:
        return np.argmax(self.predict_proba(examples), axis=1)


def save_checkpoint(model: Model, path, step: int = 0, config_digest: str = ""):
    D, H, K = model.params.shape
    obj = {
        "meta": {
            "D": D,
            "H": H,
            "K": K,
            "step": step,
            "config_digest": config_digest,
            "vocab_size": model.featurizer.vocab_size,
            **model.meta,
        },
        "W1": model.params.W1.tolist(),
        "b1": model.params.b1.tolist(),
        "W2": model.params.W2.tolist(),
        "b2": model.params.b2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_checkpoint(path) -> Model:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: parse error at offset {e.pos}: {e.msg}") from e
    try:
        meta = obj["meta"]
        D, H, K = meta["D"], meta["H"], meta["K"]
        params = ModelParams(
            W1=np.array(obj["W1"], dtype=np.float64),
            b1=np.array(obj["b1"], dtype=np.float64),
            W2=np.array(obj["W2"], dtype=np.float64),
            b2=np.array(obj["b2"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: malformed checkpoint: {e}") from e
    if params.W1.shape != (D, H) or params.b1.shape != (H,) \
            or params.W2.shape != (H, K) or params.b2.shape != (K,):
        raise SchemaError(
            f"{path}: shape mismatch: meta says D={D} H={H} K={K}, arrays are "
            f"{params.W1.shape}/{params.b1.shape}/{params.W2.shape}/{params.b2.shape}"
        )
    feat = Featurizer(vocab_size=meta["vocab_size"], dim=D)
    extra = {k: v for k, v in meta.items()
             if k not in ("D", "H", "K", "step", "config_digest", "vocab_size")}
    return Model(params=params, featurizer=feat, num_labels=K, meta=extra)
