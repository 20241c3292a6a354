"""Preview-stage scheduler: high-resolution head, noise reshift, low-resolution tail.

The preview runs the first k denoising steps at the model's preferred
resolution, estimates the clean latent, downscales it spatially, reinjects
fresh Gaussian noise at the current level, and finishes the remaining steps on
the smaller grid.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .grids import Extent5, LatentGrid, Rng, axpy, resize_spatial, sample_gaussian
from .schedule import (
    Conditioning,
    SigmaSchedule,
    VelocityModel,
    _checked_eval,
    build_schedule,
    estimate_clean,
    euler_step,
)


@dataclass(frozen=True)
class PreviewConfig:
    n_total: int
    k: int
    hi: tuple[int, int]
    lo: tuple[int, int]
    shift: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.k < self.n_total):
            raise ConfigError(f"k must satisfy 1 <= k < n_total, got k={self.k}, n_total={self.n_total}")
        if self.lo[0] > self.hi[0] or self.lo[1] > self.hi[1]:
            raise ConfigError(f"lo resolution {self.lo} exceeds hi {self.hi}")
        if min(self.lo) < 1:
            raise ConfigError(f"lo resolution must be >= 1, got {self.lo}")


@dataclass(frozen=True)
class PreviewResult:
    latent: LatentGrid
    schedule: SigmaSchedule
    sigma_switch: float
    nfe_hi: int
    nfe_lo: int
    hi_extent: Extent5
    lo_extent: Extent5

    @property
    def nfe(self) -> int:
        return self.nfe_hi + self.nfe_lo


def reshift_noise(clean_lo: LatentGrid, sigma_k: float, rng: Rng) -> LatentGrid:
    """Reinject Gaussian noise at level sigma_k into a clean low-res latent."""
    if not (0.0 < sigma_k <= 1.0):
        raise ConfigError(f"sigma_k must be in (0, 1], got {sigma_k}")
    eps = sample_gaussian(clean_lo.extent, rng)
    return axpy(sigma_k, eps, clean_lo)


def generate_preview(
    model: VelocityModel,
    cond: Conditioning,
    cfg: PreviewConfig,
    extent_template: Extent5,
    z1: LatentGrid | None = None,
    reshift_rng: Rng | None = None,
) -> PreviewResult:
    """Run the full preview stage and return the sigma=0 low-resolution latent.

    ``extent_template`` supplies (b, c, f); its (h, w) are overridden by
    ``cfg.hi``.  ``z1`` and ``reshift_rng`` default to streams derived from
    ``cfg.seed`` and exist so tests can pin or stub the noise.

    Model evaluations: k steps + 1 clean estimate at high resolution, then
    n_total - k steps at low resolution (n_total + 1 in all).
    """
    master = Rng(cfg.seed)
    e = extent_template
    hi_extent = Extent5(e.b, e.c, e.f, cfg.hi[0], cfg.hi[1])
    if z1 is None:
        z1 = sample_gaussian(hi_extent, master.split(0))
    if z1.extent != hi_extent:
        raise ConfigError(f"z1 extent {z1.extent} does not match hi extent {hi_extent}")
    if reshift_rng is None:
        reshift_rng = master.split(1)

    sched = build_schedule(cfg.n_total, cfg.shift)
    sig = sched.sigmas

    # Pre-k steps at the optimal resolution.
    z = z1
    for i in range(cfg.k):
        u = _checked_eval(model, z, sig[i], cond)
        z = euler_step(z, u, sig[i], sig[i + 1])

    # Turning point: fresh velocity, clean estimate, spatial downscale, reshift.
    sigma_k = sig[cfg.k]
    u_k = _checked_eval(model, z, sigma_k, cond)
    clean = estimate_clean(z, u_k, sigma_k)
    clean_lo = resize_spatial(clean, cfg.lo[0], cfg.lo[1])
    z = reshift_noise(clean_lo, sigma_k, reshift_rng)

    # Post-k steps on the same schedule tail, resumed at sigma_k.
    for i in range(cfg.k, cfg.n_total):
        u = _checked_eval(model, z, sig[i], cond)
        z = euler_step(z, u, sig[i], sig[i + 1])

    return PreviewResult(
        latent=z,
        schedule=sched,
        sigma_switch=sigma_k,
        nfe_hi=cfg.k + 1,
        nfe_lo=cfg.n_total - cfg.k,
        hi_extent=hi_extent,
        lo_extent=z.extent,
    )
