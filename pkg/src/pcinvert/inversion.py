"""Three-step inversion: corpus-level encoder/generator training, point
ordering resolution by global-code replication, and per-point latent
refinement with the generator frozen. Also hosts the four ablation modes.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from pcinvert.core.cloud import PointCloud
from pcinvert.core.latent import GlobalLatent, LatentCodes
from pcinvert.core.metrics import chamfer_discrepancy
from pcinvert.core.sphere import SpherePrior, sphere_neighbor_pairs
from pcinvert.spgan.generator import SphereGenerator, StyleVectors
from pcinvert.spgan.train import dataset_tensor

ABLATION_MODES = ("full", "learn_global", "learn_local", "opt_global", "opt_local")


def canonical_target_points(target) -> np.ndarray:
    """Target rows in lexicographic order.

    The target's storage order is meaningless to an inversion (only the
    point set matters), but gradient accumulation order follows it; sorting
    first makes every optimization trajectory bitwise invariant to input row
    permutations.
    """
    pts = target.points if isinstance(target, PointCloud) else np.asarray(target)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order]

# Smoothing added under the square root so the loss gradient is defined (and
# zero) at coincident points; shifts the value by at most 1e-6 per term.
_CD_EPS = 1e-12


def chamfer_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Differentiable Chamfer discrepancy, max of directed means with
    non-squared norms, matching the core metric to ~1e-6.

    Per-point minima are accumulated in sorted order, so the value (and the
    whole optimization trajectory) is invariant to row permutations of
    either cloud.
    """
    squeeze = a.dim() == 2
    if squeeze:
        a = a.unsqueeze(0)
        b = b.unsqueeze(0)
    diff = a.unsqueeze(2) - b.unsqueeze(1)  # (B, Na, Nb, 3)
    d = torch.sqrt((diff * diff).sum(-1) + _CD_EPS)
    d_ab = torch.sort(d.min(dim=2).values, dim=-1).values.mean(dim=-1)
    d_ba = torch.sort(d.min(dim=1).values, dim=-1).values.mean(dim=-1)
    cd = torch.maximum(d_ab, d_ba)
    return cd.squeeze(0) if squeeze else cd.mean()


@dataclass(frozen=True)
class InversionConfig:
    step1_iterations: int = 2000
    step3_iterations: int = 2000
    learning_rate: float = 0.01        # encoder training and code optimization
    refine_learning_rate: float = 1e-4  # generator refinement during Step 1
    refine_generator_in_step1: bool = True
    ablation_mode: str = "full"
    batch_size: int = 8
    seed: int = 0
    freeze_coordinates: bool = False
    grad_clip: float = 1.0             # Step-1 gradient norm clip; 0 disables
    snapshot_interval: int = 100

    def __post_init__(self):
        if self.step1_iterations < 1 or self.step3_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.learning_rate <= 0 or self.refine_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.ablation_mode not in ABLATION_MODES:
            raise ValueError(f"ablation_mode must be one of {ABLATION_MODES}")


@dataclass
class InversionResult:
    codes: LatentCodes
    global_latent: GlobalLatent | None
    style: StyleVectors
    reconstruction: PointCloud
    loss_history: list[float]
    generator: SphereGenerator | None
    mode: str
    final_cd: float


@dataclass
class InversionModels:
    """Everything invert() needs for one mode: a generator snapshot, the
    sphere prior it was built on, and (for learning modes) an encoder."""

    generator: SphereGenerator
    sphere: SpherePrior
    encoder: torch.nn.Module | None = None


def _codes_and_style(encoder, generator, batch: torch.Tensor):
    """Run an encoder on a batch and assemble generator-ready codes."""
    if encoder.emits == "global":
        z, style = encoder(batch)
        n = generator.config.n_points
        coords = generator.sphere.unsqueeze(0).expand(batch.shape[0], -1, -1)
        codes = torch.cat([coords, z.unsqueeze(1).expand(-1, n, -1)], dim=-1)
    else:
        codes, style = encoder(batch)
    return codes, style


def step1_train(
    dataset,
    generator: SphereGenerator,
    encoder,
    cfg: InversionConfig,
    progress=None,
) -> tuple[torch.nn.Module, SphereGenerator, list[float]]:
    """Train the encoder (and optionally refine the generator) to minimize
    the Chamfer reconstruction loss over the corpus.

    Alternates one encoder step and one generator step per batch. Inputs are
    left untouched; trained copies are returned. A NaN loss aborts and
    returns the last good snapshot; a loss spike far above the running
    average rolls back to the previous iterate and resets the optimizer
    moments, which keeps the joint system stable at aggressive rates.
    """
    data = dataset_tensor(dataset)
    generator = copy.deepcopy(generator)
    encoder = copy.deepcopy(encoder)
    rng = np.random.default_rng(cfg.seed)

    def make_optimizers():
        opt_e = torch.optim.Adam(encoder.parameters(), lr=cfg.learning_rate)
        opt_g = (
            torch.optim.Adam(generator.parameters(), lr=cfg.refine_learning_rate)
            if cfg.refine_generator_in_step1
            else None
        )
        return opt_e, opt_g

    opt_e, opt_g = make_optimizers()
    history: list[float] = []
    snapshot = (copy.deepcopy(encoder.state_dict()), copy.deepcopy(generator.state_dict()))
    previous = snapshot
    ema = None

    for step in range(cfg.step1_iterations):
        idx = rng.integers(0, data.shape[0], size=cfg.batch_size)
        batch = data[idx]

        codes, style = _codes_and_style(encoder, generator, batch)
        loss = chamfer_loss(generator(codes, style), batch)
        value = float(loss.detach())
        if math.isnan(value):
            encoder.load_state_dict(snapshot[0])
            generator.load_state_dict(snapshot[1])
            break
        if ema is not None and step > 20 and value > 10.0 * ema:
            # runaway batch: roll back one iterate and restart the moments
            encoder.load_state_dict(previous[0])
            generator.load_state_dict(previous[1])
            opt_e, opt_g = make_optimizers()
            history.append(value)
            continue
        ema = value if ema is None else 0.98 * ema + 0.02 * value
        previous = (
            copy.deepcopy(encoder.state_dict()),
            copy.deepcopy(generator.state_dict()),
        )

        opt_e.zero_grad()
        generator.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(encoder.parameters(), cfg.grad_clip)
        opt_e.step()

        if opt_g is not None:
            codes, style = _codes_and_style(encoder, generator, batch)
            loss = chamfer_loss(generator(codes, style), batch)
            opt_g.zero_grad()
            encoder.zero_grad(set_to_none=True)
            loss.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(generator.parameters(), cfg.grad_clip)
            opt_g.step()

        history.append(value)
        if progress is not None:
            progress(step, value)
        if (step + 1) % cfg.snapshot_interval == 0:
            snapshot = (
                copy.deepcopy(encoder.state_dict()),
                copy.deepcopy(generator.state_dict()),
            )
    return encoder, generator, history


def step2_replicate(z_g, sphere: SpherePrior) -> LatentCodes:
    """Initial local codes: row i is the prior coordinate of point i followed
    by one shared copy of the global code."""
    values = z_g.values if isinstance(z_g, GlobalLatent) else np.asarray(z_g, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"global code must be a vector, got shape {values.shape}")
    n = len(sphere)
    return LatentCodes(
        np.concatenate([sphere.points, np.tile(values, (n, 1))], axis=1)
    )


def _optimize_codes(
    loss_of,
    variables: list[torch.Tensor],
    iterations: int,
    lr: float,
    grad_mask=None,
    progress=None,
):
    """Adam refinement of raw tensors with best-so-far tracking.

    Gradients are computed with autograd.grad (never written into module
    parameters), so a shared frozen generator stays untouched. Returns
    (best_variables, history); aborts on NaN keeping the best so far.
    """
    opt = torch.optim.Adam(variables, lr=lr)
    history: list[float] = []
    best_value = math.inf
    best = [v.detach().clone() for v in variables]

    def record(value, vars_now):
        nonlocal best_value, best
        history.append(value)
        if value < best_value:
            best_value = value
            best = [v.detach().clone() for v in vars_now]

    for step in range(iterations):
        loss = loss_of(*variables)
        value = float(loss.detach())
        if math.isnan(value) or any(not torch.isfinite(v).all() for v in variables):
            return best, history
        record(value, variables)
        grads = torch.autograd.grad(loss, variables)
        for v, g in zip(variables, grads):
            v.grad = g
        if grad_mask is not None:
            grad_mask(variables)
        opt.step()
        if progress is not None:
            progress(step, value)
    with torch.no_grad():
        final = float(loss_of(*variables).detach())
    if not math.isnan(final) and all(torch.isfinite(v).all() for v in variables):
        record(final, variables)
    return best, history


def step3_optimize(
    target,
    init: LatentCodes,
    style: StyleVectors,
    generator: SphereGenerator,
    cfg: InversionConfig,
    progress=None,
) -> InversionResult:
    """Refine every entry of the latent codes against the target with the
    generator frozen; returns the codes achieving the minimum recorded loss."""
    pts = canonical_target_points(target)
    dtype = generator.sphere.dtype
    target_t = torch.as_tensor(pts, dtype=dtype)
    codes = torch.as_tensor(init.values, dtype=dtype).clone().requires_grad_(True)
    style = StyleVectors(
        style.s1.detach().to(dtype).clone(), style.s2.detach().to(dtype).clone()
    )

    mask = None
    if cfg.freeze_coordinates:
        def mask(variables):
            variables[0].grad[:, :3] = 0.0

    (best_codes,), history = _optimize_codes(
        lambda c: chamfer_loss(generator(c, style), target_t),
        [codes],
        cfg.step3_iterations,
        cfg.learning_rate,
        grad_mask=mask,
        progress=progress,
    )
    return _finish_result(
        best_codes, None, style, generator, target_t, history, mode="full",
        target_np=np.asarray(pts, dtype=np.float64),
    )


def _finish_result(
    codes_t: torch.Tensor,
    global_latent: GlobalLatent | None,
    style: StyleVectors,
    generator: SphereGenerator,
    target_t: torch.Tensor,
    history: list[float],
    mode: str,
    codes_np: LatentCodes | None = None,
    target_np: np.ndarray | None = None,
) -> InversionResult:
    with torch.no_grad():
        recon_t = generator(codes_t, style)
    recon = PointCloud(recon_t.cpu().numpy().astype(np.float64))
    # final_cd is reported against the full-precision target so it matches a
    # recomputation from saved artifacts exactly
    if target_np is None:
        target_np = target_t.cpu().numpy().astype(np.float64)
    if not history:
        history = [float(chamfer_loss(recon_t, target_t))]
    if codes_np is None:
        codes_np = LatentCodes(codes_t.detach().cpu().numpy().astype(np.float64))
    return InversionResult(
        codes=codes_np,
        global_latent=global_latent,
        style=style.detach(),
        reconstruction=recon,
        loss_history=history,
        generator=generator,
        mode=mode,
        final_cd=chamfer_discrepancy(recon.points, target_np),
    )


def invert(
    target, models: InversionModels, cfg: InversionConfig, progress=None
) -> InversionResult:
    """Dispatch one inversion according to cfg.ablation_mode.

    full          encoder global code, replicated, then Step-3 refinement
    learn_global  encoder global code, replicated, no refinement
    learn_local   encoder emits per-point codes directly (overfit baseline)
    opt_global    optimize one global code from random init, no encoder
    opt_local     optimize per-point codes from random init, no encoder
    """
    mode = cfg.ablation_mode
    generator = models.generator
    sphere = models.sphere
    if mode == "learn_local":
        # this baseline's codes follow the target's storage order by design;
        # canonicalizing would mask exactly the pathology it demonstrates
        pts = np.asarray(
            target.points if isinstance(target, PointCloud) else target,
            dtype=np.float64,
        )
    else:
        pts = canonical_target_points(target)
    dtype = generator.sphere.dtype
    target_t = torch.as_tensor(pts, dtype=dtype)
    n, d = generator.config.n_points, generator.config.noise_dim

    if mode in ("full", "learn_global", "learn_local"):
        if models.encoder is None:
            raise ValueError(f"mode {mode!r} requires a trained encoder")
        needed = "local" if mode == "learn_local" else "global"
        if models.encoder.emits != needed:
            raise ValueError(
                f"mode {mode!r} requires an encoder emitting {needed} codes"
            )

    if mode == "full":
        with torch.no_grad():
            z, style = models.encoder(target_t)
        z_np = GlobalLatent(z.cpu().numpy().astype(np.float64))
        init = step2_replicate(z_np, sphere)
        result = step3_optimize(target, init, style, generator, cfg, progress=progress)
        result.global_latent = z_np
        result.mode = "full"
        return result

    if mode == "learn_global":
        with torch.no_grad():
            z, style = models.encoder(target_t)
        z_np = GlobalLatent(z.cpu().numpy().astype(np.float64))
        codes_np = step2_replicate(z_np, sphere)
        codes_t = torch.as_tensor(codes_np.values, dtype=dtype)
        return _finish_result(
            codes_t, z_np, style, generator, target_t, [], mode,
            codes_np=codes_np, target_np=np.asarray(pts, dtype=np.float64),
        )

    if mode == "learn_local":
        with torch.no_grad():
            codes_t, style = models.encoder(target_t)
        return _finish_result(
            codes_t, None, style, generator, target_t, [], mode,
            target_np=np.asarray(pts, dtype=np.float64),
        )

    coords = generator.sphere.detach().clone()
    torch_rng = torch.Generator().manual_seed(cfg.seed)

    if mode == "opt_global":
        z = torch.randn(d, generator=torch_rng, dtype=dtype).requires_grad_(True)
        # styles held fixed at the values the initial code implies, mirroring
        # Step 3's fixed-style convention (the optimization variable is z only)
        with torch.no_grad():
            style = generator.styles_from_global(z).detach()

        def loss_of(z_var):
            codes = torch.cat([coords, z_var.unsqueeze(0).expand(n, -1)], dim=-1)
            return chamfer_loss(generator(codes, style), target_t)

        (best_z,), history = _optimize_codes(
            loss_of, [z], cfg.step3_iterations, cfg.learning_rate, progress=progress
        )
        z_np = GlobalLatent(best_z.cpu().numpy().astype(np.float64))
        codes_t = torch.cat([coords, best_z.unsqueeze(0).expand(n, -1)], dim=-1)
        return _finish_result(
            codes_t, z_np, style, generator, target_t, history, mode,
            target_np=np.asarray(pts, dtype=np.float64),
        )

    if mode == "opt_local":
        noise = torch.randn(n, d, generator=torch_rng, dtype=dtype)
        codes = torch.cat([coords, noise], dim=-1).requires_grad_(True)
        with torch.no_grad():
            style = generator.styles_from_global(noise.mean(dim=0)).detach()

        def loss_of(codes_var):
            return chamfer_loss(generator(codes_var, style), target_t)

        mask = None
        if cfg.freeze_coordinates:
            def mask(variables):
                variables[0].grad[:, :3] = 0.0

        (best_codes,), history = _optimize_codes(
            loss_of,
            [codes],
            cfg.step3_iterations,
            cfg.learning_rate,
            grad_mask=mask,
            progress=progress,
        )
        return _finish_result(
            best_codes, None, style, generator, target_t, history, mode,
            target_np=np.asarray(pts, dtype=np.float64),
        )

    raise ValueError(f"unknown ablation mode {mode!r}")


def correspondence_map(result: InversionResult) -> list[tuple[int, np.ndarray]]:
    """Pair i binds sphere prior row i to reconstruction row i."""
    return [(i, result.reconstruction.points[i]) for i in range(len(result.reconstruction))]


def correspondence_smoothness(
    recon, sphere: SpherePrior, k: int = 6
) -> float:
    """Mean displacement between reconstructions of prior-adjacent points.

    Low values mean neighboring prior points land near each other, i.e. the
    correspondence field is smooth over the shape.
    """
    pts = recon.points if isinstance(recon, PointCloud) else np.asarray(recon)
    pairs = sphere_neighbor_pairs(sphere, k=k)
    return float(np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1).mean())


def save_result(path, result: InversionResult, config_digest: str = "") -> None:
    """Serialize an inversion result (codes, global, style, reconstruction,
    loss history, config digest) to the native container."""
    from pcinvert.core.container import write_container

    s1, s2 = result.style.numpy()
    sections: dict = {
        "kind": "inversion_result",
        "codes": result.codes.values,
        "style_s1": s1,
        "style_s2": s2,
        "reconstruction": result.reconstruction.points,
        "loss_history": np.asarray(result.loss_history, dtype=np.float64),
        "meta": {
            "mode": result.mode,
            "final_cd": result.final_cd,
            "config_digest": config_digest,
            "n": result.codes.n_points,
            "d": result.codes.noise_dim,
        },
    }
    if result.global_latent is not None:
        sections["global"] = result.global_latent.values
    write_container(path, sections)


def load_result(path) -> InversionResult:
    from pcinvert.core.container import read_container

    sections = read_container(path)
    if sections.get("kind") != "inversion_result":
        raise ValueError(f"{path}: not an inversion result")
    return InversionResult(
        codes=LatentCodes(sections["codes"]),
        global_latent=(
            GlobalLatent(sections["global"]) if "global" in sections else None
        ),
        style=StyleVectors(
            torch.as_tensor(sections["style_s1"]), torch.as_tensor(sections["style_s2"])
        ),
        reconstruction=PointCloud(sections["reconstruction"]),
        loss_history=[float(v) for v in sections["loss_history"]],
        generator=None,
        mode=sections["meta"]["mode"],
        final_cd=float(sections["meta"]["final_cd"]),
    )


def reconstruction_cd(encoder, generator: SphereGenerator, clouds) -> np.ndarray:
    """Per-cloud Chamfer discrepancy of single-pass encoder reconstructions
    (the Step-1 quality measure), computed with the core metric."""
    out = []
    dtype = generator.sphere.dtype
    for cloud in clouds:
        pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
        t = torch.as_tensor(pts, dtype=dtype)
        with torch.no_grad():
            codes, style = _codes_and_style(encoder, generator, t.unsqueeze(0))
            recon = generator(codes, style)[0]
        out.append(chamfer_discrepancy(recon.cpu().numpy().astype(np.float64), pts))
    return np.asarray(out)
