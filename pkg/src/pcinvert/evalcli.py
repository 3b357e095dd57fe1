"""Command line harness: GAN training, Step-1 encoder training, inversion,
ablation evaluation tables, and encoder comparison.

Exit codes: 0 success, 2 usage error (bad flags), 3 data error (unreadable
or invalid configs, corpora, checkpoints, targets).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np
import yaml

from pcinvert.bundle import (
    ENCODER_VARIANTS,
    InversionBundle,
    generator_digest,
    load_bundle,
    save_bundle,
    train_encoder_stack,
)
from pcinvert.core import (
    FormatError,
    chamfer_discrepancy,
    earth_mover_distance,
    load_pointcloud,
    normalize,
    save_native,
    save_ply,
)
from pcinvert.core.container import ContainerError
from pcinvert.data import (
    Corpus,
    ShapeFamilyConfig,
    generate_family,
    load_corpus,
    make_split,
    merge_corpora,
)
from pcinvert.editing import correspondence_colors
from pcinvert.encoder import EncoderConfig
from pcinvert.inversion import (
    ABLATION_MODES,
    InversionConfig,
    invert,
    reconstruction_cd,
    save_result,
)
from pcinvert.spgan import (
    DiscriminatorConfig,
    GanTrainingConfig,
    GeneratorConfig,
    TrainingDiverged,
    build_models,
    load_gan_checkpoint,
    save_gan_checkpoint,
    train_gan,
)

EXIT_DATA_ERROR = 3

DEFAULT_CONFIG = {
    "model": {"n_points": 256, "noise_dim": 16, "hidden": 64, "k": 8, "style_dim": 32},
    "gan": {
        "lam": 1.0,
        "beta": 1.0,
        "lr_generator": 1e-4,
        "lr_discriminator": 1e-4,
        "iterations": 2000,
        "batch_size": 8,
        "seed": 0,
        "checkpoint_interval": 500,
    },
    "encoder": {"k": 8, "layers": [64, 64, 64, 128], "fused": 256, "style_dim": 32},
    "inversion": {
        "step1_iterations": 2000,
        "step3_iterations": 2000,
        "learning_rate": 0.01,
        "batch_size": 8,
        "seed": 0,
        "refine_generator_in_step1": True,
    },
    "corpus": {
        "families": ["ellipsoid", "chair_toy"],
        "count_per_family": 100,
        "seed": 0,
        "test_fraction": 0.10,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path) -> dict:
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    unknown = set(raw) - set(DEFAULT_CONFIG)
    if unknown:
        raise ValueError(f"{path}: unknown config sections {sorted(unknown)}")
    cfg = _merge(DEFAULT_CONFIG, raw)
    # construct the typed configs now so bad values fail at parse time
    _configs_from(cfg)
    return cfg


def _configs_from(cfg: dict):
    model = cfg["model"]
    gen_cfg = GeneratorConfig(
        n_points=int(model["n_points"]),
        noise_dim=int(model["noise_dim"]),
        hidden=int(model["hidden"]),
        k=int(model["k"]),
        style_dim=int(model["style_dim"]),
    )
    disc_cfg = DiscriminatorConfig(hidden=int(model["hidden"]), k=int(model["k"]))
    gan_cfg = GanTrainingConfig(**{k: v for k, v in cfg["gan"].items()})
    enc = cfg["encoder"]
    enc_cfg = EncoderConfig(
        noise_dim=int(model["noise_dim"]),
        style_dim=int(enc["style_dim"]),
        k=int(enc["k"]),
        layers=tuple(int(w) for w in enc["layers"]),
        fused=int(enc["fused"]),
    )
    inv_cfg = InversionConfig(**{k: v for k, v in cfg["inversion"].items()})
    return gen_cfg, disc_cfg, gan_cfg, enc_cfg, inv_cfg


def data_errors(fn):
    """Translate data-layer failures into exit code 3."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (
            FormatError,
            ContainerError,
            FileNotFoundError,
            NotADirectoryError,
            IsADirectoryError,
            ValueError,
            KeyError,
            yaml.YAMLError,
            TrainingDiverged,
        ) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA_ERROR)

    return wrapper


def _build_corpus(cfg: dict, corpus_path) -> Corpus:
    if corpus_path is not None:
        return load_corpus(corpus_path)
    section = cfg["corpus"]
    n_points = int(cfg["model"]["n_points"])
    families = [
        generate_family(
            ShapeFamilyConfig(
                family=name,
                n_points=n_points,
                seed=int(section["seed"]) + index,
            ),
            int(section["count_per_family"]),
        )
        for index, name in enumerate(section["families"])
    ]
    return make_split(
        merge_corpora(families),
        test_fraction=float(section["test_fraction"]),
        seed=int(section["seed"]),
    )


def _write_loss_csv(path, history, fields):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in history:
            if isinstance(row, dict):
                writer.writerow([row[f] for f in fields])
            else:
                writer.writerow(row)


def _plot_losses(path, series: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, values in series.items():
        ax.plot(values, label=label, linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@click.group()
def main():
    """Point cloud inversion toolkit."""


@main.command("train-gan")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--resume", "resume_path", type=click.Path(exists=True), default=None)
@click.option("--plot/--no-plot", default=False)
@data_errors
def cmd_train_gan(config_path, out_dir, corpus_path, resume_path, plot):
    """Train the sphere-guided GAN on the corpus train split."""
    cfg = load_config(config_path)
    gen_cfg, disc_cfg, gan_cfg, _, _ = _configs_from(cfg)
    corpus = _build_corpus(cfg, corpus_path)
    train_items = corpus.train_items if corpus.train_indices is not None else corpus.items
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    start = 0
    if resume_path is not None:
        generator, discriminator, _, start = load_gan_checkpoint(resume_path)
    else:
        generator, discriminator = build_models(gen_cfg, disc_cfg, seed=gan_cfg.seed)
    generator, discriminator, history = train_gan(
        train_items, gan_cfg, generator, discriminator, start_iteration=start
    )
    ckpt = out / "gan.pinv"
    save_gan_checkpoint(ckpt, generator, discriminator, gan_cfg, start + gan_cfg.iterations)
    _write_loss_csv(out / "gan_losses.csv", history, ["iteration", "d_loss", "g_loss"])
    if plot:
        _plot_losses(
            out / "gan_losses.png",
            {"D": [h["d_loss"] for h in history], "G": [h["g_loss"] for h in history]},
        )
    click.echo(f"checkpoint written to {ckpt} (iterations {start}..{start + gan_cfg.iterations})")


@main.command("train-encoders")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--gan", "gan_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--variants", default="graph,local,disc", show_default=True)
@click.option("--plot/--no-plot", default=False)
@data_errors
def cmd_train_encoders(config_path, gan_path, corpus_path, out_path, variants, plot):
    """Step-1 training of the requested encoder variants; writes a bundle."""
    cfg = load_config(config_path)
    _, _, _, enc_cfg, inv_cfg = _configs_from(cfg)
    wanted = [v.strip() for v in variants.split(",") if v.strip()]
    for variant in wanted:
        if variant not in ENCODER_VARIANTS:
            raise ValueError(f"unknown encoder variant {variant!r}")
    generator, discriminator, gan_cfg, _ = load_gan_checkpoint(gan_path)
    corpus = _build_corpus(cfg, corpus_path)
    train_items = corpus.train_items if corpus.train_indices is not None else corpus.items

    from pcinvert.core.sphere import sample_sphere_prior

    bundle = InversionBundle(
        generator=generator,
        discriminator=discriminator,
        sphere=sample_sphere_prior(generator.config.n_points),
        gan_config=gan_cfg,
        encoder_config=enc_cfg,
        inversion_config=inv_cfg,
        meta={"corpus": corpus.provenance},
    )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    series = {}
    for variant in wanted:
        click.echo(f"training {variant} encoder ({inv_cfg.step1_iterations} iterations)")
        stack = train_encoder_stack(
            train_items, bundle, variant, inv_cfg, enc_cfg, seed=inv_cfg.seed
        )
        bundle.stacks[variant] = stack
        _write_loss_csv(
            out.parent / f"step1_losses_{variant}.csv",
            list(enumerate(stack.history)),
            ["iteration", "loss"],
        )
        series[variant] = stack.history
    if plot and series:
        _plot_losses(out.parent / "step1_losses.png", series)
    save_bundle(out, bundle)
    click.echo(f"bundle written to {out} (variants: {', '.join(wanted)})")


MODE_CHOICES = click.Choice(ABLATION_MODES)


@main.command("invert")
@click.option("--checkpoint", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=MODE_CHOICES, default="full", show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", type=int, default=None, help="Step-3 iteration override.")
@data_errors
def cmd_invert(bundle_path, target_path, mode, out_dir, seed, iterations):
    """Invert one target cloud; writes the result container and a
    correspondence-colored reconstruction PLY."""
    bundle = load_bundle(bundle_path)
    target = load_pointcloud(target_path)
    if len(target) != bundle.n_points:
        raise ValueError(
            f"target has {len(target)} points but the model expects {bundle.n_points}"
        )
    target, _ = normalize(target)
    inv_cfg = InversionConfig(
        **{
            **asdict(bundle.inversion_config),
            "ablation_mode": mode,
            "seed": seed,
            **({"step3_iterations": iterations} if iterations else {}),
        }
    )
    models = bundle.models_for_mode(mode)
    result = invert(target, models, inv_cfg)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_result(out / "result.pinv", result, config_digest=generator_digest(models.generator))
    save_native(target, out / "target_normalized.pinv")
    colors = correspondence_colors(bundle.sphere)
    save_ply(result.reconstruction, out / "reconstruction.ply", binary=False, colors=colors)
    click.echo(f"mode={mode} final_cd={result.final_cd:.9e}")
    click.echo(f"artifacts in {out}")


def _metric_values(metric, recon, target):
    values = {}
    if metric in ("cd", "both"):
        values["cd"] = chamfer_discrepancy(recon, target)
    if metric in ("emd", "both"):
        values["emd"] = earth_mover_distance(recon.points, target.points)
    return values


def _format_table(rows: list[dict], classes: list[str], metrics: list[str]) -> str:
    lines = []
    header = ["mode", "metric", "avg"] + classes
    lines.append("  ".join(f"{h:>14}" for h in header))
    for row in rows:
        cells = [row["mode"], row["metric"], _milli(row["avg"])]
        cells += [_milli(row.get(c)) for c in classes]
        lines.append("  ".join(f"{c:>14}" for c in cells))
    lines.append("(values in units of 1e-3)")
    return "\n".join(lines)


def _milli(value) -> str:
    if value is None:
        return "-"
    return f"{value * 1e3:.3f}"


@main.command("evaluate")
@click.option("--checkpoint", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--modes", default="full,learn_global,learn_local,opt_global,opt_local",
              show_default=True)
@click.option("--metric", type=click.Choice(["cd", "emd", "both"]), default="cd",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", type=int, default=None, help="Optimization iteration override.")
@click.option("--out-dir", type=click.Path(), required=True)
@data_errors
def cmd_evaluate(bundle_path, corpus_path, config_path, modes, metric, seed, iterations,
                 out_dir):
    """Per-class and average metrics over the test split for each mode."""
    if corpus_path is None and config_path is None:
        raise ValueError("provide --corpus or --config to define the evaluation corpus")
    bundle = load_bundle(bundle_path)
    cfg = load_config(config_path) if config_path else DEFAULT_CONFIG
    corpus = _build_corpus(cfg, corpus_path)
    if corpus.test_indices is None or not corpus.test_indices:
        raise ValueError("corpus has an empty test split")
    mode_list = [m.strip() for m in modes.split(",") if m.strip()]
    for mode in mode_list:
        if mode not in ABLATION_MODES:
            raise ValueError(f"unknown mode {mode!r}")
    metrics = ["cd", "emd"] if metric == "both" else [metric]
    classes = sorted(set(corpus.classes[i] for i in corpus.test_indices))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_item_rows = []
    table_rows = []
    for mode in mode_list:
        models = bundle.models_for_mode(mode)
        per_metric: dict[str, dict[str, list[float]]] = {m: {} for m in metrics}
        recon_dir = out / "recons" / mode
        recon_dir.mkdir(parents=True, exist_ok=True)
        for item_pos, index in enumerate(corpus.test_indices):
            target = corpus.items[index]
            inv_cfg = InversionConfig(
                **{
                    **asdict(bundle.inversion_config),
                    "ablation_mode": mode,
                    "seed": seed + item_pos,
                    **({"step3_iterations": iterations} if iterations else {}),
                }
            )
            result = invert(target, models, inv_cfg)
            save_native(result.reconstruction, recon_dir / f"item_{index:05d}.pinv")
            values = _metric_values(metric, result.reconstruction, target)
            label = corpus.classes[index]
            for name, value in values.items():
                per_metric[name].setdefault(label, []).append(value)
                per_item_rows.append([mode, index, label, name, f"{value:.17g}"])
        for name in metrics:
            all_values = [v for values in per_metric[name].values() for v in values]
            row = {"mode": mode, "metric": name, "avg": float(np.mean(all_values))}
            for label in classes:
                if per_metric[name].get(label):
                    row[label] = float(np.mean(per_metric[name][label]))
            table_rows.append(row)

    with open(out / "table.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "metric", "avg"] + classes)
        for row in table_rows:
            writer.writerow(
                [row["mode"], row["metric"], f"{row['avg']:.9e}"]
                + [f"{row[c]:.9e}" if c in row else "" for c in classes]
            )
    with open(out / "items.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "item", "class", "metric", "value"])
        writer.writerows(per_item_rows)
    text = _format_table(table_rows, classes, metrics)
    (out / "table.txt").write_text(text + "\n")
    click.echo(text)


@main.command("compare-encoders")
@click.option("--checkpoint", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(), required=True)
@data_errors
def cmd_compare_encoders(bundle_path, corpus_path, config_path, out_dir):
    """Step-1 reconstruction CD of the graph encoder vs the
    discriminator-based encoder on the test split."""
    if corpus_path is None and config_path is None:
        raise ValueError("provide --corpus or --config to define the evaluation corpus")
    bundle = load_bundle(bundle_path)
    for variant in ("graph", "disc"):
        if variant not in bundle.stacks:
            raise ValueError(f"bundle lacks the {variant!r} encoder stack")
    cfg = load_config(config_path) if config_path else DEFAULT_CONFIG
    corpus = _build_corpus(cfg, corpus_path)
    if corpus.test_indices is None or not corpus.test_indices:
        raise ValueError("corpus has an empty test split")
    classes = sorted(set(corpus.classes[i] for i in corpus.test_indices))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for variant in ("graph", "disc"):
        stack = bundle.stacks[variant]
        per_class: dict[str, list[float]] = {}
        for index in corpus.test_indices:
            cd = reconstruction_cd(
                stack.encoder, stack.generator, [corpus.items[index]]
            )[0]
            per_class.setdefault(corpus.classes[index], []).append(float(cd))
        row = {
            "mode": variant,
            "metric": "cd",
            "avg": float(np.mean([v for vs in per_class.values() for v in vs])),
        }
        for label in classes:
            if per_class.get(label):
                row[label] = float(np.mean(per_class[label]))
        rows.append(row)
    with open(out / "encoders.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["encoder", "avg"] + classes)
        for row in rows:
            writer.writerow(
                [row["mode"], f"{row['avg']:.9e}"]
                + [f"{row[c]:.9e}" if c in row else "" for c in classes]
            )
    text = _format_table(rows, classes, ["cd"])
    (out / "encoders.txt").write_text(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
