"""MLP classifier with a compact feature bottleneck.

The model is a composition C(x) = h(g(x)). The extractor g maps inputs
through tanh layers down to a small feature vector z, and the head h is a
single linear layer plus row softmax. After training the model is frozen
and g doubles as the conditioning-feature extractor for the generative
flow: z keeps what matters for the class label and discards the rest.
"""

from __future__ import annotations

import warnings
from collections import OrderedDict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ContractError, DomainError, ShapeError
from .numerics import Adam, Mlp, Tensor

# Probability floor inside the loss; keeps log finite under saturated softmax.
PROB_FLOOR = 1e-12


def cross_entropy(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-probability of the true class.

    ``probs`` must be N rows on the simplex; ``labels`` integer class ids.
    Probabilities below PROB_FLOOR are clamped (clamped entries get zero
    gradient); the count is exposed on the returned node as ``n_clamped``.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != probs.rows:
        raise ShapeError(f"{probs.rows} probability rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.cols):
        raise DomainError(f"labels must lie in [0, {probs.cols}), got range "
                          f"[{labels.min()}, {labels.max()}]")
    logp = probs.pick(labels).log(clamp_min=PROB_FLOOR)
    loss = logp.sum().scale(-1.0 / probs.rows)
    loss.n_clamped = logp.n_clamped
    return loss


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class PreferenceClassifier(BaseEstimator, ClassifierMixin, TransformerMixin):
    """Bottlenecked MLP classifier trained with minibatch Adam.

    Parameters
    ----------
    hidden_sizes : widths of the extractor's hidden tanh layers.
    dim_z : bottleneck width; must be strictly below the input width.
    epochs, batch_size, lr, beta1, beta2, eps : training hyperparameters.
    weight_decay : decoupled L2 factor; bounds weight norms so the learned
        map stays smooth even when training long enough to fit the
        training set closely.
    n_classes : fixed class count. When None it is inferred as max(y) + 1;
        pass it explicitly when the training labels may not cover every
        class (rebalanced synthetic sets can miss the majority class).
    random_state : seed for initialization and batch shuffling.
    """

    def __init__(self, hidden_sizes=(64, 32), dim_z=8, epochs=30, batch_size=64,
                 lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0,
                 n_classes=None, random_state=0):
        self.hidden_sizes = hidden_sizes
        self.dim_z = dim_z
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.n_classes = n_classes
        self.random_state = random_state

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y, validation=None):
        """Train on (X, y); optional ``validation=(X_val, y_val)`` is scored
        once per epoch for the history and never touches the gradients."""
        if getattr(self, "frozen_", False):
            raise ContractError("classifier is frozen; parameters are immutable")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] == 0:
            raise ContractError("training set is empty")
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.isfinite(X).all():
            raise DomainError("X contains non-finite values")
        if y.min() < 0:
            raise DomainError("labels must be non-negative integers")

        k = int(y.max()) + 1 if self.n_classes is None else int(self.n_classes)
        if k < 2:
            raise ContractError(f"need at least 2 classes, got {k}")
        if y.max() >= k:
            raise DomainError(f"label {y.max()} out of range for {k} classes")
        d_in = X.shape[1]
        if self.dim_z >= d_in:
            raise ContractError(
                f"dim_z={self.dim_z} must be strictly below the input width {d_in}")

        rng = np.random.default_rng(self.random_state)
        self._g = Mlp([d_in, *self.hidden_sizes, self.dim_z], rng)
        self._h = Mlp([self.dim_z, k], rng)
        self.n_features_in_ = d_in
        self.classes_ = np.arange(k)
        self.frozen_ = False
        self.n_clamped_ = 0
        self.history_ = {"train_loss": []}
        if validation is not None:
            self.history_["val_loss"] = []
            self.history_["val_accuracy"] = []

        opt = Adam(self._g.params + self._h.params, lr=self.lr,
                   beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                   weight_decay=self.weight_decay)
        n = X.shape[0]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            batch_losses = []
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                probs = self._forward_probs(Tensor(X[idx]))
                loss = cross_entropy(probs, y[idx])
                self.n_clamped_ += loss.n_clamped
                opt.zero_grad()
                loss.backward()
                opt.step()
                batch_losses.append(loss.item())
            self.history_["train_loss"].append(float(np.mean(batch_losses)))
            if validation is not None:
                vl, va = self._score_validation(*validation)
                self.history_["val_loss"].append(vl)
                self.history_["val_accuracy"].append(va)

        if self.n_clamped_:
            warnings.warn(f"cross-entropy clamped {self.n_clamped_} probabilities "
                          f"at {PROB_FLOOR:g} during training", RuntimeWarning)
        return self

    def _forward_probs(self, x: Tensor) -> Tensor:
        return self._h(self._g(x)).softmax_rows()

    def _score_validation(self, X_val, y_val) -> tuple[float, float]:
        probs = self.predict_proba(X_val)
        y_val = np.asarray(y_val, dtype=np.int64).reshape(-1)
        picked = np.maximum(probs[np.arange(len(y_val)), y_val], PROB_FLOOR)
        loss = float(-np.log(picked).mean()) if len(y_val) else float("nan")
        acc = float((probs.argmax(axis=1) == y_val).mean()) if len(y_val) else float("nan")
        return loss, acc

    # -- freezing ----------------------------------------------------------

    def freeze(self):
        """Mark parameters immutable. Idempotent; returns self."""
        self._require_fitted()
        self.frozen_ = True
        return self

    # -- inference ---------------------------------------------------------

    def transform(self, X) -> np.ndarray:
        """Feature vectors z = g(x), one row per input row. Pure function of
        the current weights; allowed before and after freezing."""
        self._require_fitted()
        X = self._check_input(X)
        return self._g.forward_np(X)

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        X = self._check_input(X)
        return _softmax_np(self._h.forward_np(self._g.forward_np(X)))

    def predict(self, X) -> np.ndarray:
        # argmax takes the lowest index on ties
        return self.predict_proba(X).argmax(axis=1)

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected shape (N, {self.n_features_in_}), got {X.shape}")
        if not np.isfinite(X).all():
            raise DomainError("X contains non-finite values")
        return X

    def _require_fitted(self) -> None:
        if not hasattr(self, "_g"):
            raise NotFittedError("classifier is not fitted; call fit first")

    # -- checkpoint plumbing -------------------------------------------------

    def parameter_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Named weight/bias arrays in a stable order."""
        self._require_fitted()
        out: OrderedDict[str, np.ndarray] = OrderedDict()
        for prefix, net in (("g", self._g), ("h", self._h)):
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out[f"{prefix}.w{i}"] = w.data.copy()
                out[f"{prefix}.b{i}"] = b.data.copy()
        return out

    def restore_arrays(self, d_in: int, k: int, arrays: dict, frozen: bool = True):
        """Rebuild the network from named arrays (inverse of parameter_arrays)."""
        rng = np.random.default_rng(0)
        self._g = Mlp([d_in, *self.hidden_sizes, self.dim_z], rng)
        self._h = Mlp([self.dim_z, k], rng)
        for prefix, net in (("g", self._g), ("h", self._h)):
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                for name, param in ((f"{prefix}.w{i}", w), (f"{prefix}.b{i}", b)):
                    if name not in arrays:
                        raise ContractError(f"missing parameter {name!r}")
                    arr = np.asarray(arrays[name], dtype=np.float64)
                    if arr.shape != param.data.shape:
                        raise ShapeError(f"parameter {name!r}: expected shape "
                                         f"{param.data.shape}, got {arr.shape}")
                    param.data = arr.copy()
        self.n_features_in_ = d_in
        self.classes_ = np.arange(k)
        self.frozen_ = bool(frozen)
        self.n_clamped_ = 0
        self.history_ = {"train_loss": []}
        return self
