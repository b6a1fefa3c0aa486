"""Joint training loop: reconstruction, graph rebuild, attention, clustering.

Phase 1 pretrains the latent matrix and decoders on the reconstruction
loss alone. Phase 2 then, per epoch: rebuilds the kNN graph from the
current latent matrix (on a configurable cadence), runs the attention
stack to get the structured representation, refreshes the sharpened
target distribution (also on a cadence, held constant in between),
computes the total loss

    L = L_r + gamma * L_c,

and applies one full-batch gradient step to the latent matrix, decoders,
attention parameters, and centroids. Centroids are initialized by k-means
on the structured representation at the start of phase 2.

Step-size policy: descent acts on the mean per-sample objective
(reconstruction error plus gamma times each sample's divergence term), so
shared parameters (decoders, attention, centroids) see gradients whose
scale is independent of the dataset size. Each free latent row, which
appears in exactly one sample's loss, is stepped on its own per-sample
gradient (N times the mean gradient), keeping the latent learning rate
meaningful at any N. Reported losses follow the printed objective
(mean-over-samples reconstruction, summed divergence); gradcheck verifies
the exact gradients of that objective. Set ``h_recon_step="mean"`` to step
the latent rows on the plain mean gradient instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cluster as cl
from . import encoder as enc
from . import gat as gt
from . import graph as gr
from . import metrics as mt
from .data import MultiViewDataset, read_matrix, write_matrix
from .errors import NumericError, ParameterError
from .numerics import finite_diff_grad, relative_error

__all__ = [
    "TrainConfig",
    "TrainReport",
    "GradcheckReport",
    "total_loss",
    "train",
    "ablate",
    "gradcheck",
    "save_checkpoint",
    "load_checkpoint",
    "write_loss_log",
]


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the reference configuration."""

    latent_dim: int = 64
    k: int = 10
    gamma: float = 10.0
    learning_rate: float = 0.01
    epochs: int = 200
    heads: int = 4
    gat_layers: int = 1
    activation: str = "sigmoid"
    combine: str = "average"
    graph_rebuild_every: int = 1
    p_refresh_every: int = 1
    pretrain_epochs: int = 50
    seed: int = 0
    deterministic: bool = True
    kernel: str | None = None  # None: pick from the dataset's view kinds
    sigma: float | None = None
    clusters: int | None = None  # None: take the ground-truth label count
    kmeans_restarts: int = 10
    early_stop_tol: float = 1e-6
    early_stop_patience: int = 10
    early_stop_min_epochs: int = 20
    assign_stable_tol: float = 1e-3  # fraction of samples allowed to switch cluster
    h_recon_step: str = "per_sample"  # "per_sample" | "mean"

    def validate(self) -> None:
        if self.latent_dim < 2:
            raise ParameterError("latent_dim must be >= 2")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if self.gamma < 0:
            raise ParameterError("gamma must be >= 0")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if min(self.epochs, self.pretrain_epochs) < 0:
            raise ParameterError("epoch counts must be >= 0")
        if self.heads < 1 or self.gat_layers < 0:
            raise ParameterError("need heads >= 1 and gat_layers >= 0")
        if min(self.graph_rebuild_every, self.p_refresh_every) < 1:
            raise ParameterError("cadences must be >= 1")
        if self.h_recon_step not in ("per_sample", "mean"):
            raise ParameterError(f"unknown h_recon_step {self.h_recon_step!r}")


@dataclass
class TrainReport:
    """Loss trajectory, per-epoch metrics, and the final model state."""

    lr_history: list = field(default_factory=list)
    lc_history: list = field(default_factory=list)
    loss_history: list = field(default_factory=list)
    metrics_history: list = field(default_factory=list)  # MetricsReport | None per epoch
    pretrain_epochs_run: int = 0
    joint_epochs_run: int = 0
    early_stopped_at: int | None = None  # 1-based joint epoch where the stop triggered
    early_stop_reason: str | None = None  # "loss" | "assignments"
    h: np.ndarray | None = None
    ht: np.ndarray | None = None
    q: np.ndarray | None = None
    centroids: np.ndarray | None = None
    decoders: list = field(default_factory=list)
    gat_stack: list = field(default_factory=list)
    labels_pred: np.ndarray | None = None
    final_eval: mt.MetricsReport | None = None  # metrics of the final state, if labels exist
    graph: gr.NeighborGraph | None = None  # neighbor graph of the final latent matrix
    # worst-case invariant gaps observed across all joint epochs
    q_rowsum_gap: float = 0.0
    p_rowsum_gap: float = 0.0
    alpha_rowsum_gap: float = 0.0
    lc_min: float = np.inf

    @property
    def joint_losses(self) -> list:
        return self.loss_history[self.pretrain_epochs_run :]

    def final_metrics(self):
        if self.final_eval is not None:
            return self.final_eval
        for m in reversed(self.metrics_history):
            if m is not None:
                return m
        return None


def total_loss(lr_value: float, lc_value: float, gamma: float) -> float:
    """Joint objective: reconstruction loss plus gamma-weighted clustering loss."""
    value = float(lr_value) + float(gamma) * float(lc_value)
    if not np.isfinite(value):
        raise NumericError(f"non-finite total loss: lr={lr_value}, lc={lc_value}")
    return value


def _resolve_kernel(ds: MultiViewDataset, cfg: TrainConfig) -> str:
    if cfg.kernel is not None:
        return cfg.kernel
    discrete = sum(1 for kind in ds.kinds if kind == "discrete")
    return "dot" if discrete > ds.n_views - discrete else "gaussian"


def _resolve_clusters(ds: MultiViewDataset, cfg: TrainConfig) -> int:
    if cfg.clusters is not None:
        return int(cfg.clusters)
    c = ds.n_clusters()
    if c is None:
        raise ParameterError("dataset has no labels; pass the cluster count explicitly")
    return c


def _epoch_metrics(q: np.ndarray, labels) -> mt.MetricsReport | None:
    if labels is None:
        return None
    return mt.evaluate(np.argmax(q, axis=1), labels)


def train(ds: MultiViewDataset, cfg: TrainConfig) -> TrainReport:
    """Run both phases and return the full report."""
    cfg.validate()
    n = ds.n_samples
    if cfg.k > n - 1:
        raise ParameterError(f"k={cfg.k} too large for {n} samples")
    kernel = _resolve_kernel(ds, cfg)
    n_clusters = _resolve_clusters(ds, cfg)

    state = enc.init_latent(n, cfg.latent_dim, cfg.seed)
    decoders = enc.init_decoders(cfg.latent_dim, ds.dims, cfg.seed + 1)
    stack = gt.init_gat_stack(
        cfg.gat_layers,
        cfg.latent_dim,
        cfg.latent_dim,
        cfg.heads,
        cfg.seed + 2,
        activation=cfg.activation,
        combine=cfg.combine,
    )
    report = TrainReport(decoders=decoders, gat_stack=stack)
    lr = cfg.learning_rate
    h_scale = float(n) if cfg.h_recon_step == "per_sample" else 1.0

    # phase 1: reconstruction-only descent on H and the decoders
    for _ in range(cfg.pretrain_epochs):
        loss = enc.reconstruction_loss(state, decoders, ds)
        grad_h, dec_grads = enc.reconstruction_grads(state, decoders, ds)
        report.lr_history.append(loss)
        report.lc_history.append(0.0)
        report.loss_history.append(total_loss(loss, 0.0, cfg.gamma))
        report.metrics_history.append(None)
        state.h -= lr * h_scale * grad_h
        _apply_decoder_step(decoders, dec_grads, lr)
    report.pretrain_epochs_run = cfg.pretrain_epochs

    # phase 2 setup: graph, structured representation, k-means centroids
    g = gr.build_graph(state.h, cfg.k, kernel, cfg.sigma)
    nbhd = g.neighborhoods(include_self=True)
    ht, caches = gt.stack_forward(stack, state.h, nbhd)
    centroids = cl.init_centroids(ht, n_clusters, seed=cfg.seed + 3, restarts=cfg.kmeans_restarts)
    p = None
    best_loss = np.inf
    no_improve = 0
    prev_assign = None
    stable_assign = 0

    for epoch in range(cfg.epochs):
        if epoch > 0 and epoch % cfg.graph_rebuild_every == 0:
            g = gr.build_graph(state.h, cfg.k, kernel, cfg.sigma)
            nbhd = g.neighborhoods(include_self=True)
        ht, caches = gt.stack_forward(stack, state.h, nbhd)
        q = cl.soft_assign(ht, centroids)
        if epoch % cfg.p_refresh_every == 0 or p is None:
            try:
                p = cl.target_distribution(q)
            except cl.DegenerateClusterError:
                warnings.warn("degenerate cluster during target refresh; re-seeding centroid")
                centroids = _reseed_degenerate(ht, centroids, q)
                q = cl.soft_assign(ht, centroids)
                p = cl.target_distribution(q)

        lr_value = enc.reconstruction_loss(state, decoders, ds)
        lc_value = cl.kl_loss(p, q)
        loss = total_loss(lr_value, lc_value, cfg.gamma)

        report.lr_history.append(lr_value)
        report.lc_history.append(lc_value)
        report.loss_history.append(loss)
        report.metrics_history.append(_epoch_metrics(q, ds.labels))
        _update_invariant_gaps(report, q, p, caches)

        grad_h_rec, dec_grads = enc.reconstruction_grads(state, decoders, ds)
        grad_ht, grad_mu = cl.cluster_grads(ht, centroids, p)
        # shared parameters descend the mean per-sample loss, so the summed
        # clustering gradients are scaled by gamma/N before stepping
        layer_grads, grad_h_gat = gt.stack_backward(stack, caches, (cfg.gamma / n) * grad_ht)

        state.h -= lr * h_scale * (grad_h_rec + grad_h_gat)
        _apply_decoder_step(decoders, dec_grads, lr)
        _apply_gat_step(stack, layer_grads, lr)
        centroids -= lr * (cfg.gamma / n) * grad_mu
        report.joint_epochs_run = epoch + 1

        # two convergence monitors, both gated behind a burn-in:
        #  - loss: an epoch failing to improve the best loss by a relative
        #    early_stop_tol spends one unit of patience
        #  - assignments: the alternating scheme has converged once hard
        #    cluster assignments stop changing (within assign_stable_tol)
        if loss < best_loss * (1.0 - cfg.early_stop_tol):
            best_loss = loss
            no_improve = 0
        else:
            no_improve += 1
        assign = np.argmax(q, axis=1)
        if prev_assign is not None and np.mean(assign != prev_assign) <= cfg.assign_stable_tol:
            stable_assign += 1
        else:
            stable_assign = 0
        prev_assign = assign
        if epoch + 1 >= cfg.early_stop_min_epochs:
            if no_improve >= cfg.early_stop_patience:
                report.early_stopped_at = epoch + 1
                report.early_stop_reason = "loss"
                break
            if stable_assign >= cfg.early_stop_patience:
                report.early_stopped_at = epoch + 1
                report.early_stop_reason = "assignments"
                break

    # final state under the last parameter values
    g = gr.build_graph(state.h, cfg.k, kernel, cfg.sigma)
    nbhd = g.neighborhoods(include_self=True)
    ht, _ = gt.stack_forward(stack, state.h, nbhd)
    q = cl.soft_assign(ht, centroids)
    report.h = state.h
    report.ht = ht
    report.q = q
    report.centroids = centroids
    report.labels_pred = np.argmax(q, axis=1)
    report.final_eval = _epoch_metrics(q, ds.labels)
    report.graph = g
    return report


def _apply_decoder_step(decoders, grads, lr: float) -> None:
    for theta, g in zip(decoders, grads):
        theta.w1 -= lr * g.w1
        theta.b1 -= lr * g.b1
        theta.w2 -= lr * g.w2
        theta.b2 -= lr * g.b2


def _apply_gat_step(stack, layer_grads, lr: float) -> None:
    for layer, (grad_w, grad_a) in zip(stack, layer_grads):
        for k in range(layer.heads):
            layer.w[k] -= lr * grad_w[k]
            layer.a[k] -= lr * grad_a[k]


def _reseed_degenerate(ht, centroids, q) -> np.ndarray:
    """Move zero-mass centroids onto the sample farthest from its centroid."""
    centroids = centroids.copy()
    mass = q.sum(axis=0)
    assigned = np.argmax(q, axis=1)
    dist = np.linalg.norm(ht - centroids[assigned], axis=1)
    order = np.argsort(dist)[::-1]
    pos = 0
    for j in np.nonzero(mass <= 1e-12)[0]:
        centroids[j] = ht[order[pos]]
        pos += 1
    return centroids


def _update_invariant_gaps(report: TrainReport, q, p, caches) -> None:
    report.q_rowsum_gap = max(report.q_rowsum_gap, float(np.abs(q.sum(axis=1) - 1.0).max()))
    report.p_rowsum_gap = max(report.p_rowsum_gap, float(np.abs(p.sum(axis=1) - 1.0).max()))
    for cache in caches:
        gap = float(np.abs(cache.alpha_row_sums() - 1.0).max())
        report.alpha_rowsum_gap = max(report.alpha_rowsum_gap, gap)
    report.lc_min = min(report.lc_min, report.lc_history[-1])


def ablate(ds: MultiViewDataset, cfg: TrainConfig) -> dict:
    """Three pipeline variants for the structure study.

    (a) latent only: no attention, no clustering loss; k-means on H.
    (b) latent + attention: reconstruction loss only; k-means on the
        structured representation from the untrained attention stack.
    (c) the full pipeline.
    Returns {"a": report, "b": report, "c": report}.
    """
    cfg.validate()
    cfg_a = replace(cfg, gamma=0.0, gat_layers=0)
    cfg_b = replace(cfg, gamma=0.0, gat_layers=max(1, cfg.gat_layers))
    return {"a": train(ds, cfg_a), "b": train(ds, cfg_b), "c": train(ds, cfg)}


@dataclass
class GradcheckReport:
    """Max relative gradient error per parameter group."""

    errors: dict
    eps: float
    seed_used: int

    @property
    def worst(self) -> float:
        return max(self.errors.values())

    def ok(self, tol: float = 1e-4) -> bool:
        return self.worst < tol

    def to_text(self) -> str:
        lines = [f"{name} {err:.3e}" for name, err in self.errors.items()]
        lines.append(f"worst {self.worst:.3e}")
        return "\n".join(lines) + "\n"


def _kink_margin(state, decoders, stack, ht_input, nbhd) -> float:
    """Smallest |pre-activation| at any ReLU/LeakyReLU kink in the frozen loss."""
    margin = np.inf
    for theta in decoders:
        pre = state.h @ theta.w1.T + theta.b1
        margin = min(margin, float(np.abs(pre).min()))
    x = ht_input
    indptr, indices = nbhd
    row = np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))
    for layer in stack:
        for k in range(layer.heads):
            fp = layer.f_prime
            z = x @ layer.w[k].T
            t = (z @ layer.a[k][:fp])[row] + (z @ layer.a[k][fp:])[indices]
            margin = min(margin, float(np.abs(t).min()))
        x = gt.gat_forward(layer, x, (indptr, indices))
    return margin


def gradcheck(ds: MultiViewDataset, cfg: TrainConfig, eps: float = 1e-5) -> GradcheckReport:
    """Compare analytic gradients of the joint loss against central differences.

    The graph and the target distribution are frozen, exactly as within one
    training step. Instances whose ReLU/LeakyReLU pre-activations sit too
    close to a kink are re-seeded deterministically, since finite
    differences are meaningless across a kink.
    """
    cfg.validate()
    n = ds.n_samples
    if n > 30:
        raise ParameterError(f"gradcheck needs N <= 30, got {n}")
    n_clusters = _resolve_clusters(ds, cfg)
    kernel = _resolve_kernel(ds, cfg)

    seed = cfg.seed
    for _ in range(50):
        state = enc.init_latent(n, cfg.latent_dim, seed)
        decoders = enc.init_decoders(cfg.latent_dim, ds.dims, seed + 1)
        stack = gt.init_gat_stack(
            cfg.gat_layers,
            cfg.latent_dim,
            cfg.latent_dim,
            cfg.heads,
            seed + 2,
            activation=cfg.activation,
            combine=cfg.combine,
        )
        g = gr.build_graph(state.h, cfg.k, kernel, cfg.sigma)
        nbhd = g.neighborhoods(include_self=True)
        if _kink_margin(state, decoders, stack, state.h, nbhd) > 1e-4:
            break
        seed += 1

    ht, caches = gt.stack_forward(stack, state.h, nbhd)
    centroids = cl.init_centroids(ht, n_clusters, seed=seed + 3, restarts=cfg.kmeans_restarts)
    p = cl.target_distribution(cl.soft_assign(ht, centroids))

    def loss_at(h_mat, decs, stk, mu) -> float:
        s = enc.LatentState(h=h_mat)
        lr_value = enc.reconstruction_loss(s, decs, ds)
        ht_now, _ = gt.stack_forward(stk, h_mat, nbhd)
        lc_value = cl.kl_loss(p, cl.soft_assign(ht_now, mu))
        return total_loss(lr_value, lc_value, cfg.gamma)

    # analytic gradients, assembled exactly like one training step
    grad_h_rec, dec_grads = enc.reconstruction_grads(state, decoders, ds)
    grad_ht, grad_mu = cl.cluster_grads(ht, centroids, p)
    layer_grads, grad_h_gat = gt.stack_backward(stack, caches, cfg.gamma * grad_ht)
    grad_h = grad_h_rec + grad_h_gat
    grad_mu = cfg.gamma * grad_mu

    errors = {}

    def f_h(vec):
        return loss_at(vec.reshape(state.h.shape), decoders, stack, centroids)

    errors["h"] = relative_error(grad_h.ravel(), finite_diff_grad(f_h, state.h.ravel(), eps))

    dec_vec = _pack_decoders(decoders)
    dec_grad_vec = _pack_decoders(dec_grads)

    def f_dec(vec):
        return loss_at(state.h, _unpack_decoders(vec, decoders), stack, centroids)

    errors["decoders"] = relative_error(dec_grad_vec, finite_diff_grad(f_dec, dec_vec, eps))

    if stack:
        gat_vec = _pack_gat(stack)
        gat_grad_vec = np.concatenate(
            [np.concatenate([w.ravel() for w in gw] + [a.ravel() for a in ga]) for gw, ga in layer_grads]
        )

        def f_gat(vec):
            return loss_at(state.h, decoders, _unpack_gat(vec, stack), centroids)

        errors["gat"] = relative_error(gat_grad_vec, finite_diff_grad(f_gat, gat_vec, eps))
    else:
        errors["gat"] = 0.0

    def f_mu(vec):
        return loss_at(state.h, decoders, stack, vec.reshape(centroids.shape))

    errors["centroids"] = relative_error(
        grad_mu.ravel(), finite_diff_grad(f_mu, centroids.ravel(), eps)
    )
    return GradcheckReport(errors=errors, eps=eps, seed_used=seed)


def _pack_decoders(decoders) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([t.w1.ravel(), t.b1.ravel(), t.w2.ravel(), t.b2.ravel()]) for t in decoders]
    )


def _unpack_decoders(vec: np.ndarray, template) -> list:
    out = []
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        chunk = vec[pos : pos + size].reshape(shape)
        pos += size
        return chunk

    for t in template:
        out.append(
            enc.DecoderParams(
                w1=take(t.w1.shape), b1=take(t.b1.shape), w2=take(t.w2.shape), b2=take(t.b2.shape)
            )
        )
    return out


def _pack_gat(stack) -> np.ndarray:
    parts = []
    for layer in stack:
        parts.extend(w.ravel() for w in layer.w)
        parts.extend(a.ravel() for a in layer.a)
    return np.concatenate(parts)


def _unpack_gat(vec: np.ndarray, template) -> list:
    out = []
    pos = 0
    for layer in template:
        ws, aas = [], []
        for w in layer.w:
            size = w.size
            ws.append(vec[pos : pos + size].reshape(w.shape))
            pos += size
        for a in layer.a:
            size = a.size
            aas.append(vec[pos : pos + size].reshape(a.shape))
            pos += size
        out.append(
            gt.GatParams(
                w=ws,
                a=aas,
                activation=layer.activation,
                combine=layer.combine,
                leaky_slope=layer.leaky_slope,
            )
        )
    return out


def save_checkpoint(report: TrainReport, path) -> None:
    """All model matrices in the binary layout, plus a text index."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = {}

    def put(name, array):
        arr = np.atleast_2d(np.asarray(array, dtype=np.float64))
        entries[name] = arr

    put("h", report.h)
    put("ht", report.ht)
    put("q", report.q)
    put("centroids", report.centroids)
    for v, theta in enumerate(report.decoders):
        put(f"decoder{v}.w1", theta.w1)
        put(f"decoder{v}.b1", theta.b1)
        put(f"decoder{v}.w2", theta.w2)
        put(f"decoder{v}.b2", theta.b2)
    for layer_idx, layer in enumerate(report.gat_stack):
        for k in range(layer.heads):
            put(f"gat{layer_idx}.head{k}.w", layer.w[k])
            put(f"gat{layer_idx}.head{k}.a", layer.a[k])
    lines = []
    for name, arr in entries.items():
        fname = name.replace("/", "_") + ".mvm"
        write_matrix(root / fname, arr)
        lines.append(f"{name} {fname}")
    (root / "index.txt").write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> dict:
    """Read a checkpoint directory back into a name -> matrix dict."""
    root = Path(path)
    index = root / "index.txt"
    if not index.exists():
        raise FileNotFoundError(f"no index.txt in {root}")
    out = {}
    for line in index.read_text().splitlines():
        if not line.strip():
            continue
        name, fname = line.split()
        out[name] = read_matrix(root / fname)
    return out


def write_loss_log(report: TrainReport, path) -> None:
    """Per-epoch delimited log: epoch, L_r, L_c, L, ACC, NMI, F, ARI."""
    lines = ["epoch,L_r,L_c,L,ACC,NMI,F,ARI"]
    for i in range(len(report.loss_history)):
        m = report.metrics_history[i] if i < len(report.metrics_history) else None
        cells = [
            str(i),
            f"{report.lr_history[i]:.9g}",
            f"{report.lc_history[i]:.9g}",
            f"{report.loss_history[i]:.9g}",
        ]
        if m is None:
            cells.extend(["", "", "", ""])
        else:
            cells.extend(f"{x:.6f}" for x in (m.acc, m.nmi, m.f_score, m.ari))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
