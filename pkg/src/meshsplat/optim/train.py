"""Training loop: sample a view, render, backpropagate, update, and
periodically grow/prune the cloud against the mesh."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..gaussians import GaussianCloud, init_from_mesh
from ..mesh import TriangleMesh
from ..render import RenderSettings, render
from . import losses
from .adam import DEFAULT_RATES, AdamOptimizer
from .backward import loss_and_gradients
from .dataset import Dataset
from .densify import GradAccumulator, densify_step, prune_step


@dataclass
class TrainConfig:
    iterations: int = 2000
    learning_rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    gamma: float = 1.0
    lambda_r: float = 0.05
    lambda_dssim: float = 0.2
    densify_interval: int = 200
    densify_grad_threshold: float = 2e-4
    densify_stop: int | None = None          # default: 70% of iterations
    prune_opacity: float = 0.005
    max_sh_degree: int = 2
    sh_unlock_interval: int = 500
    eval_interval: int = 100
    holdout_index: int | None = None         # default: last view
    seed: int = 0
    background: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in mapping.items() if k in known}
        lr = {k[len("lr_"):]: float(v) for k, v in mapping.items()
              if k.startswith("lr_")}
        cfg = cls(**kwargs)
        if lr:
            cfg.learning_rates.update(lr)
        return cfg


@dataclass
class TrainResult:
    cloud: GaussianCloud
    mesh: TriangleMesh
    metrics: list[dict]

    def final_psnr(self) -> float:
        vals = [m["psnr"] for m in self.metrics if np.isfinite(m["psnr"])]
        return vals[-1] if vals else float("nan")


def _holdout_split(dataset: Dataset, config: TrainConfig):
    idx = config.holdout_index
    if idx is None:
        idx = len(dataset) - 1
    if not 0 <= idx < len(dataset):
        raise ValueError(f"holdout index {idx} out of range")
    train_views = [v for i, v in enumerate(dataset.views) if i != idx]
    if not train_views:
        raise ValueError("dataset too small to hold out a view")
    return train_views, dataset.views[idx]


def train(dataset: Dataset, mesh: TriangleMesh, config: TrainConfig,
          cloud: GaussianCloud | None = None,
          progress=None) -> TrainResult:
    """Fit a bound cloud to the dataset.  Deterministic for a fixed seed.

    The mesh is copied: densification splits faces on the training copy.
    """
    mesh = mesh.copy()
    if cloud is None:
        cloud = init_from_mesh(mesh, sh_degree=config.max_sh_degree)
    else:
        cloud = cloud.copy()
    settings = RenderSettings(background=np.asarray(config.background,
                                                    dtype=np.float64))
    train_views, holdout = _holdout_split(dataset, config)
    rng = np.random.default_rng(config.seed)
    optimizer = AdamOptimizer(cloud, config.learning_rates)
    accum = GradAccumulator(len(cloud))
    densify_stop = (config.densify_stop if config.densify_stop is not None
                    else int(0.7 * config.iterations))

    metrics: list[dict] = []
    epoch_order: list[int] = []

    def eval_holdout():
        cam, img = holdout
        fb = render(cloud, mesh, cam, settings,
                    active_sh_degree=active_degree)
        return losses.psnr(fb.rgb, img), losses.ssim(fb.rgb, img)

    active_degree = 0
    for it in range(1, config.iterations + 1):
        if not epoch_order:
            epoch_order = list(rng.permutation(len(train_views)))
        cam, img = train_views[epoch_order.pop()]
        active_degree = min(it // config.sh_unlock_interval,
                            config.max_sh_degree)
        value, grads, _ = loss_and_gradients(
            cloud, mesh, cam, img, settings,
            lambda_dssim=config.lambda_dssim, lambda_r=config.lambda_r,
            gamma=config.gamma, active_sh_degree=active_degree)
        optimizer.step(cloud, grads)
        seen = np.linalg.norm(grads.mean2d, axis=1) > 0
        accum.add(grads.mean2d, seen)

        if it % config.densify_interval == 0 and it <= densify_stop:
            # Constrained parameterizations cannot leave their ranges; check
            # the parameters stayed finite after the recent updates.
            for group in ("bary_logits", "tau_logits", "log_scales",
                          "rotations", "opacity_logits", "sh"):
                if not np.isfinite(getattr(cloud, group)).all():
                    raise FloatingPointError(f"non-finite {group} at iter {it}")
            cloud, mapping, n_split = densify_step(
                cloud, mesh, accum, config.densify_grad_threshold)
            optimizer.remap(cloud, mapping)
            cloud, kept = prune_step(cloud, mesh, config.prune_opacity)
            optimizer.remap(cloud, kept)
            accum.reset(len(cloud))

        if it % config.eval_interval == 0 or it == config.iterations:
            val_psnr, val_ssim = eval_holdout()
            row = {
                "iteration": it,
                "loss": value,
                "psnr": val_psnr,
                "ssim": val_ssim,
                "gaussian_count": len(cloud),
                "face_count": mesh.n_faces,
                "scale_violations": losses.scale_violations(
                    cloud, mesh, config.gamma),
            }
            metrics.append(row)
            if progress is not None:
                progress(row)

    return TrainResult(cloud=cloud, mesh=mesh, metrics=metrics)


def write_metrics_csv(metrics: list[dict], path) -> None:
    import csv

    cols = ["iteration", "loss", "psnr", "ssim", "gaussian_count", "face_count"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in metrics:
            writer.writerow([row[c] for c in cols])
