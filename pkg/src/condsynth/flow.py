"""Conditional normalizing flow built from affine coupling layers.

The flow is a bijection nu = f(x, z) between data x and a latent nu, with
the conditioning vector z (class features from the frozen classifier) fed
into every coupling layer. Training maximizes exact likelihood through the
change-of-variables formula; generation runs the inverse map on fresh
standard-normal latents.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dataset import dequantize_onehot
from .errors import ContractError, DomainError, ShapeError
from .numerics import Adam, Mlp, Tensor, concat_cols

LN_2PI = float(np.log(2.0 * np.pi))


class CouplingLayer:
    """One conditional affine coupling transform.

    The first d = floor(D/2) coordinates pass through unchanged; together
    with z they drive two networks that scale and shift the rest:

        y[:d] = x[:d]
        y[d:] = s(x[:d], z) * x[d:] + b(x[:d], z),   s = exp(alpha * tanh(raw))

    Bounding the log-scale in [-alpha, alpha] keeps the layer stably
    invertible, and the zero-initialized final network layers make a fresh
    layer the identity map. The per-row log|det| of the Jacobian is the sum
    of the log-scales.
    """

    def __init__(self, dim_x: int, dim_z: int, hidden_sizes, alpha: float,
                 rng: np.random.Generator):
        if dim_x < 2:
            raise ContractError(f"coupling needs dim_x >= 2, got {dim_x}")
        if alpha <= 0:
            raise ContractError(f"alpha must be positive, got {alpha}")
        self.dim_x = dim_x
        self.dim_z = dim_z
        self.d = dim_x // 2
        self.alpha = float(alpha)
        sizes = [self.d + dim_z, *hidden_sizes, dim_x - self.d]
        self.s_net = Mlp(sizes, rng, zero_last=True)
        self.b_net = Mlp(sizes, rng, zero_last=True)

    @property
    def params(self) -> list[Tensor]:
        return self.s_net.params + self.b_net.params

    def _log_scale_np(self, x1: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inp = np.concatenate([x1, z], axis=1)
        logs = self.alpha * np.tanh(self.s_net.forward_np(inp))
        return logs, self.b_net.forward_np(inp)

    def forward_np(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = x[:, :self.d], x[:, self.d:]
        logs, b = self._log_scale_np(x1, z)
        y2 = np.exp(logs) * x2 + b
        return np.concatenate([x1, y2], axis=1), logs.sum(axis=1)

    def inverse_np(self, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        y1, y2 = y[:, :self.d], y[:, self.d:]
        logs, b = self._log_scale_np(y1, z)
        x2 = (y2 - b) * np.exp(-logs)
        return np.concatenate([y1, x2], axis=1)

    def forward_tape(self, x: Tensor, z: Tensor) -> tuple[Tensor, Tensor]:
        """Differentiable forward pass; returns (y, per-row logdet (N, 1))."""
        x1 = x.cols_slice(0, self.d)
        x2 = x.cols_slice(self.d, self.dim_x)
        inp = concat_cols(x1, z)
        logs = self.s_net(inp).tanh().scale(self.alpha)
        b = self.b_net(inp)
        y2 = logs.exp().mul(x2).add(b)
        return concat_cols(x1, y2), logs.sum_rows()


class ConditionalFlow(BaseEstimator):
    """Stack of conditional coupling layers with feature reversal between
    them, trained by maximum likelihood with minibatch Adam.

    The model follows the density-estimator idiom: ``fit(X, Z)`` trains,
    ``score_samples`` returns per-row log-density, ``sample`` inverts fresh
    latents. ``forward``/``inverse`` expose the raw bijection. ``build``
    initializes an untrained (identity) flow for a given width, which
    ``fit`` also does internally.

    ``lr`` is constant unless ``lr_final`` is set, in which case the rate
    follows a cosine schedule from ``lr`` down to ``lr_final`` over the
    epochs. Long aggressive schedules can squeeze latent variance well
    below 1 on small datasets, so the default stays constant.
    """

    def __init__(self, n_layers=8, hidden_sizes=(64, 64), alpha=2.0, epochs=30,
                 batch_size=128, lr=1e-3, lr_final=None, beta1=0.9, beta2=0.999,
                 eps=1e-8, random_state=0):
        self.n_layers = n_layers
        self.hidden_sizes = hidden_sizes
        self.alpha = alpha
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_final = lr_final
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.random_state = random_state

    # -- construction --------------------------------------------------------

    def _init_layers(self, dim_x: int, dim_z: int, rng: np.random.Generator) -> None:
        if self.n_layers < 2:
            raise ContractError(f"need at least 2 coupling layers, got {self.n_layers}")
        if dim_x < 2:
            raise ContractError(f"need dim_x >= 2, got {dim_x}")
        if dim_z < 0:
            raise ContractError(f"dim_z must be non-negative, got {dim_z}")
        self.layers_ = [CouplingLayer(dim_x, dim_z, self.hidden_sizes, self.alpha, rng)
                        for _ in range(self.n_layers)]
        self.dim_x_ = dim_x
        self.dim_z_ = dim_z
        self.n_features_in_ = dim_x
        self.history_ = {"nll": []}

    def build(self, dim_x: int, dim_z: int):
        """Initialize an untrained flow (the identity map) for these widths."""
        self._init_layers(dim_x, dim_z, np.random.default_rng(self.random_state))
        return self

    # -- bijection -------------------------------------------------------------

    def forward(self, X, Z) -> tuple[np.ndarray, np.ndarray]:
        """Map data to latents; returns (nu, per-row total log|det J|)."""
        X, Z = self._check_pair(X, Z)
        logdet = np.zeros(X.shape[0])
        h = X
        last = len(self.layers_) - 1
        for i, layer in enumerate(self.layers_):
            h, ld = layer.forward_np(h, Z)
            logdet += ld
            if i < last:
                h = h[:, ::-1]
        return h, logdet

    def inverse(self, Nu, Z) -> np.ndarray:
        """Exact inverse of ``forward``: latents back to data space."""
        Nu, Z = self._check_pair(Nu, Z)
        h = Nu
        last = len(self.layers_) - 1
        for i in range(last, -1, -1):
            if i < last:
                h = h[:, ::-1]  # feature reversal is its own inverse
            h = self.layers_[i].inverse_np(h, Z)
        return h

    def nll_loss(self, x: Tensor, z: Tensor) -> Tensor:
        """Differentiable mean negative log-likelihood of a batch."""
        if x.rows == 0:
            raise ContractError("nll needs at least one row")
        if x.rows != z.rows:
            raise ShapeError(f"{x.rows} data rows but {z.rows} conditioning rows")
        if x.cols != self.dim_x_ or z.cols != self.dim_z_:
            raise ShapeError(f"expected widths ({self.dim_x_}, {self.dim_z_}), "
                             f"got ({x.cols}, {z.cols})")
        reversal = list(range(self.dim_x_))[::-1]
        h = x
        logdet = None
        last = len(self.layers_) - 1
        for i, layer in enumerate(self.layers_):
            h, ld = layer.forward_tape(h, z)
            logdet = ld if logdet is None else logdet.add(ld)
            if i < last:
                h = h.permute_cols(reversal)
        half_sq = h.square().sum_rows().scale(0.5)
        per_row = half_sq.sub(logdet)
        return per_row.sum().scale(1.0 / x.rows).add_scalar(0.5 * self.dim_x_ * LN_2PI)

    # -- density-estimator surface ----------------------------------------------

    def fit(self, X, Z, schema=None):
        """Train on data X conditioned on Z (row-aligned). When ``schema`` is
        given, one-hot blocks are dequantized with fresh uniform noise per
        batch so the continuous density is well-defined; Z stays clean."""
        X = np.asarray(X, dtype=np.float64)
        Z = np.asarray(Z, dtype=np.float64)
        if X.ndim != 2 or Z.ndim != 2 or X.shape[0] != Z.shape[0]:
            raise ShapeError(f"X and Z must be row-aligned 2-D arrays, got "
                             f"{X.shape} and {Z.shape}")
        if X.shape[0] == 0:
            raise ContractError("training set is empty")
        if not (np.isfinite(X).all() and np.isfinite(Z).all()):
            raise DomainError("training inputs contain non-finite values")
        if schema is not None and schema.encoded_width != X.shape[1]:
            raise ShapeError(f"schema encodes width {schema.encoded_width}, "
                             f"data has width {X.shape[1]}")

        if self.lr_final is not None and self.lr_final <= 0:
            raise ContractError(f"lr_final must be positive, got {self.lr_final}")

        rng = np.random.default_rng(self.random_state)
        self._init_layers(X.shape[1], Z.shape[1], rng)
        opt = Adam(self._all_params(), lr=self.lr, beta1=self.beta1,
                   beta2=self.beta2, eps=self.eps)
        n = X.shape[0]
        for epoch in range(self.epochs):
            if self.lr_final is not None and self.epochs > 1:
                frac = epoch / (self.epochs - 1)
                opt.lr = self.lr_final + 0.5 * (self.lr - self.lr_final) * (
                    1.0 + np.cos(np.pi * frac))
            order = rng.permutation(n)
            batch_losses = []
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                xb = X[idx]
                if schema is not None:
                    xb = dequantize_onehot(xb, schema, rng)
                try:
                    loss = self.nll_loss(Tensor(xb), Tensor(Z[idx]))
                    opt.zero_grad()
                    loss.backward()
                    opt.step()
                except DomainError as exc:
                    raise DomainError(f"non-finite value in epoch {epoch}, batch "
                                      f"starting at row {start}: {exc}") from exc
                batch_losses.append(loss.item())
            self.history_["nll"].append(float(np.mean(batch_losses)))
        return self

    def score_samples(self, X, Z) -> np.ndarray:
        """Per-row log-density log p(x | z)."""
        nu, logdet = self.forward(X, Z)
        return -0.5 * (nu ** 2).sum(axis=1) - 0.5 * self.dim_x_ * LN_2PI + logdet

    def nll(self, X, Z) -> float:
        """Mean negative log-likelihood; matches ``nll_loss`` numerically."""
        scores = self.score_samples(X, Z)
        if scores.size == 0:
            raise ContractError("nll needs at least one row")
        return float(-scores.mean())

    def sample(self, Z, random_state) -> np.ndarray:
        """One synthetic row per conditioning row, from fresh N(0, I) latents."""
        self._require_built()
        Z = np.asarray(Z, dtype=np.float64)
        rng = np.random.default_rng(random_state) if not isinstance(
            random_state, np.random.Generator) else random_state
        nu = rng.standard_normal((Z.shape[0], self.dim_x_))
        return self.inverse(nu, Z)

    # -- plumbing -----------------------------------------------------------------

    def _all_params(self) -> list[Tensor]:
        out = []
        for layer in self.layers_:
            out.extend(layer.params)
        return out

    def _check_pair(self, X, Z) -> tuple[np.ndarray, np.ndarray]:
        self._require_built()
        X = np.asarray(X, dtype=np.float64)
        Z = np.asarray(Z, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim_x_:
            raise ShapeError(f"expected data shape (N, {self.dim_x_}), got {X.shape}")
        if Z.ndim != 2 or Z.shape[1] != self.dim_z_:
            raise ShapeError(f"expected conditioning shape (N, {self.dim_z_}), got {Z.shape}")
        if X.shape[0] != Z.shape[0]:
            raise ShapeError(f"{X.shape[0]} data rows but {Z.shape[0]} conditioning rows")
        return X, Z

    def _require_built(self) -> None:
        if not hasattr(self, "layers_"):
            raise NotFittedError("flow is not built; call fit or build first")

    def parameter_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Named weight/bias arrays in a stable order."""
        self._require_built()
        out: OrderedDict[str, np.ndarray] = OrderedDict()
        for li, layer in enumerate(self.layers_):
            for tag, net in (("s", layer.s_net), ("b", layer.b_net)):
                for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                    out[f"layer{li}.{tag}.w{i}"] = w.data.copy()
                    out[f"layer{li}.{tag}.b{i}"] = b.data.copy()
        return out

    def restore_arrays(self, dim_x: int, dim_z: int, arrays: dict):
        """Rebuild the flow from named arrays (inverse of parameter_arrays)."""
        self._init_layers(dim_x, dim_z, np.random.default_rng(0))
        for li, layer in enumerate(self.layers_):
            for tag, net in (("s", layer.s_net), ("b", layer.b_net)):
                for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                    for name, param in ((f"layer{li}.{tag}.w{i}", w),
                                        (f"layer{li}.{tag}.b{i}", b)):
                        if name not in arrays:
                            raise ContractError(f"missing parameter {name!r}")
                        arr = np.asarray(arrays[name], dtype=np.float64)
                        if arr.shape != param.data.shape:
                            raise ShapeError(f"parameter {name!r}: expected shape "
                                             f"{param.data.shape}, got {arr.shape}")
                        param.data = arr.copy()
        return self
