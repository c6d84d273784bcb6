"""Per-group adaptive-moment (Adam) updates on the cloud's parameter arrays."""

from __future__ import annotations

import numpy as np

from ..gaussians import GaussianCloud, quat_normalize

DEFAULT_RATES = {
    "bary_logits": 2e-3,
    "tau_logits": 2e-3,
    "log_scales": 5e-3,
    "rotations": 1e-3,
    "opacity_logits": 5e-2,
    "sh": 2.5e-3,
}


class AdamOptimizer:
    def __init__(self, cloud: GaussianCloud, rates: dict[str, float] | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.rates = dict(DEFAULT_RATES)
        if rates:
            self.rates.update(rates)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {g: np.zeros_like(getattr(cloud, g)) for g in self.rates}
        self.v = {g: np.zeros_like(getattr(cloud, g)) for g in self.rates}

    def step(self, cloud: GaussianCloud, grads) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for group, lr in self.rates.items():
            g = grads.group(group)
            m = self.m[group]
            v = self.v[group]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param = getattr(cloud, group)
            param -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        # Rotations live on the unit sphere; project back after the step.
        cloud.rotations[:] = quat_normalize(cloud.rotations)

    def remap(self, cloud: GaussianCloud, mapping: np.ndarray) -> None:
        """Carry moments across a densify/prune resize.

        mapping[i] is the old row for new splat i, or -1 for freshly created
        splats (zero-initialized moments)."""
        fresh = mapping < 0
        src = np.where(fresh, 0, mapping)
        for group in self.rates:
            for store in (self.m, self.v):
                arr = store[group][src]
                arr[fresh] = 0.0
                store[group] = np.ascontiguousarray(arr)
                if store[group].shape != getattr(cloud, group).shape:
                    raise ValueError(f"optimizer state shape mismatch for {group}")
