import numpy as np
import pytest
import torch

from helpers import (
    gradient_relative_error,
    random_clouds,
    tiny_discriminator,
    tiny_generator,
)
from pcinvert.core import sample_sphere_prior
from pcinvert.spgan import (
    GanTrainingConfig,
    GeneratorConfig,
    SphereGenerator,
    StyleVectors,
    TrainingDiverged,
    build_models,
    discriminator_loss,
    discriminator_terms,
    generator_loss,
    generator_terms,
    load_gan_checkpoint,
    make_prior_code,
    save_gan_checkpoint,
    train_gan,
)


# ---------------------------------------------------------------------------
# prior codes


def test_prior_code_zero_noise_dim_equals_sphere():
    sphere = sample_sphere_prior(32)
    codes = make_prior_code(sphere, noise_dim=0, seed=3)
    assert np.array_equal(codes.values, sphere.points)


def test_prior_code_seed_determinism():
    sphere = sample_sphere_prior(32)
    a = make_prior_code(sphere, 8, seed=5)
    b = make_prior_code(sphere, 8, seed=5)
    c = make_prior_code(sphere, 8, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_prior_code_noise_statistics():
    sphere = sample_sphere_prior(2048)
    codes = make_prior_code(sphere, 32, seed=0)
    noise = codes.noise
    assert abs(noise.mean()) < 0.1
    assert abs(noise.std() - 1.0) < 0.1
    assert np.array_equal(codes.coords, sphere.points)


# ---------------------------------------------------------------------------
# generator


@pytest.fixture
def small_gen():
    return tiny_generator(n=24, d=4, hidden=16, k=4, style_dim=6, seed=0, double=False)


def _style(gen, seed=0):
    g = torch.Generator().manual_seed(seed)
    dim = gen.config.style_dim
    dtype = gen.sphere.dtype
    return StyleVectors(
        torch.randn(dim, generator=g, dtype=dtype),
        torch.randn(dim, generator=g, dtype=dtype),
    )


def test_generator_deterministic_and_shape(small_gen):
    codes = torch.as_tensor(
        make_prior_code(sample_sphere_prior(24), 4, seed=1).values, dtype=torch.float32
    )
    style = _style(small_gen)
    with torch.no_grad():
        a = small_gen(codes, style)
        b = small_gen(codes, style)
    assert a.shape == (24, 3)
    assert torch.equal(a, b)


def test_generator_rejects_shape_mismatch(small_gen):
    style = _style(small_gen)
    with pytest.raises(ValueError):
        small_gen(torch.zeros(24, 5), style)  # wrong width
    with pytest.raises(ValueError):
        small_gen(torch.zeros(23, 7), style)  # wrong N


def test_generator_permutation_equivariance(small_gen):
    n = small_gen.config.n_points
    codes = torch.as_tensor(
        make_prior_code(sample_sphere_prior(n), 4, seed=2).values, dtype=torch.float32
    )
    style = _style(small_gen, seed=4)
    with torch.no_grad():
        base = small_gen(codes, style)
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = torch.as_tensor(rng.permutation(n))
        inv = torch.empty_like(perm)
        inv[perm] = torch.arange(n)
        nb_perm = inv[small_gen.neighbors[perm]]
        with torch.no_grad():
            out = small_gen(codes[perm], style, neighbors=nb_perm)
        assert torch.allclose(out, base[perm], atol=1e-5)


def test_generator_batched_matches_single(small_gen):
    n = small_gen.config.n_points
    codes = torch.randn(3, n, 7)
    s1 = torch.randn(3, 6)
    s2 = torch.randn(3, 6)
    with torch.no_grad():
        batched = small_gen(codes, StyleVectors(s1, s2))
        single = torch.stack(
            [small_gen(codes[i], StyleVectors(s1[i], s2[i])) for i in range(3)]
        )
    assert torch.allclose(batched, single, atol=1e-6)


def test_generator_sampling_reproducible(small_gen):
    a = small_gen.sample(2, torch.Generator().manual_seed(9))
    b = small_gen.sample(2, torch.Generator().manual_seed(9))
    assert torch.equal(a, b)


# ---------------------------------------------------------------------------
# discriminator


def test_discriminator_shapes_and_permutation():
    disc = tiny_discriminator(hidden=16, k=4, double=False)
    pts = torch.randn(30, 3)
    score, point_scores = disc(pts)
    assert score.shape == ()
    assert point_scores.shape == (30,)
    perm = torch.randperm(30)
    score_p, point_p = disc(pts[perm])
    assert torch.allclose(score_p, score, atol=1e-5)
    assert torch.allclose(point_p, point_scores[perm], atol=1e-5)


def test_discriminator_degenerate_input_finite():
    disc = tiny_discriminator(hidden=8, k=3, double=False)
    score, point_scores = disc(torch.zeros(16, 3))
    assert torch.isfinite(score)
    assert torch.isfinite(point_scores).all()


def test_discriminator_rejects_too_few_points():
    disc = tiny_discriminator(hidden=8, k=5, double=False)
    with pytest.raises(ValueError):
        disc(torch.randn(4, 3))


# ---------------------------------------------------------------------------
# losses: fixed points and hand-derived values


def test_d_loss_zero_at_perfect_assignment():
    n = 10
    loss = discriminator_terms(
        torch.zeros(()), torch.ones(()), torch.zeros(n), torch.ones(n), lam=1.0
    )
    assert float(loss) == 0.0


def test_d_loss_inverted_assignment_value():
    n = 10
    for lam in (0.0, 0.5, 1.0, 2.0):
        loss = discriminator_terms(
            torch.ones(()), torch.zeros(()), torch.ones(n), torch.zeros(n), lam=lam
        )
        assert float(loss) == pytest.approx(1.0 + lam)


def test_d_loss_lambda_zero_is_cloud_term_only():
    score_fake = torch.tensor(0.3)
    score_real = torch.tensor(0.8)
    point_fake = torch.full((5,), 7.0)
    point_real = torch.full((5,), -7.0)
    loss = discriminator_terms(score_fake, score_real, point_fake, point_real, lam=0.0)
    expected = 0.5 * (0.3**2 + (0.8 - 1) ** 2)
    assert float(loss) == pytest.approx(expected)


def test_g_loss_fixed_points():
    n = 7
    assert float(generator_terms(torch.ones(()), torch.ones(n), beta=1.0)) == 0.0
    for beta in (0.0, 1.0, 3.0):
        loss = generator_terms(torch.zeros(()), torch.zeros(n), beta=beta)
        assert float(loss) == pytest.approx(0.5 + beta * 0.5)


def test_g_loss_beta_zero():
    loss = generator_terms(torch.tensor(0.25), torch.full((4,), 99.0), beta=0.0)
    assert float(loss) == pytest.approx(0.5 * (0.25 - 1) ** 2)


def test_losses_nonnegative_random_scores():
    rng = torch.Generator().manual_seed(0)
    for _ in range(20):
        args = [torch.randn((), generator=rng), torch.randn((), generator=rng),
                torch.randn(9, generator=rng), torch.randn(9, generator=rng)]
        assert float(discriminator_terms(*args, lam=0.7)) >= 0.0
        assert float(generator_terms(args[0], args[2], beta=0.4)) >= 0.0


# ---------------------------------------------------------------------------
# gradient checks (toy config, float64)


def test_discriminator_gradients_match_finite_differences():
    disc = tiny_discriminator(hidden=6, k=3, seed=2)
    rng = torch.Generator().manual_seed(1)
    real = torch.randn(2, 8, 3, generator=rng, dtype=torch.float64)
    fake = torch.randn(2, 8, 3, generator=rng, dtype=torch.float64)
    err = gradient_relative_error(
        lambda: discriminator_loss(disc, real, fake, lam=1.0), disc
    )
    assert err < 1e-3


def test_generator_gradients_match_finite_differences():
    gen = tiny_generator(n=8, d=2, hidden=6, k=3, seed=3)
    disc = tiny_discriminator(hidden=6, k=3, seed=4)
    rng = torch.Generator().manual_seed(2)
    codes = torch.randn(1, 8, 5, generator=rng, dtype=torch.float64)
    style = StyleVectors(
        torch.randn(1, 4, generator=rng, dtype=torch.float64),
        torch.randn(1, 4, generator=rng, dtype=torch.float64),
    )
    err = gradient_relative_error(
        lambda: generator_loss(disc, gen(codes, style), beta=1.0), gen
    )
    assert err < 1e-3


# ---------------------------------------------------------------------------
# training loop


def _toy_setup(n=24, d=4, m=12, seed=0):
    gen, disc = build_models(
        GeneratorConfig(n_points=n, noise_dim=d, hidden=16, k=4, style_dim=6), seed=seed
    )
    data = random_clouds(m, n, seed=seed)
    return gen, disc, data


def test_train_gan_single_iteration_updates_both_nets():
    gen, disc, data = _toy_setup()
    g_before = [p.detach().clone() for p in gen.parameters()]
    d_before = [p.detach().clone() for p in disc.parameters()]
    cfg = GanTrainingConfig(iterations=1, batch_size=4, seed=0)
    _, _, history = train_gan(data, cfg, gen, disc)
    assert len(history) == 1
    assert {"iteration", "d_loss", "g_loss"} <= history[0].keys()
    assert any(not torch.equal(a, b) for a, b in zip(g_before, gen.parameters()))
    assert any(not torch.equal(a, b) for a, b in zip(d_before, disc.parameters()))


def test_train_gan_history_length():
    gen, disc, data = _toy_setup()
    cfg = GanTrainingConfig(iterations=7, batch_size=4, seed=1)
    _, _, history = train_gan(data, cfg, gen, disc)
    assert len(history) == 7
    assert [h["iteration"] for h in history] == list(range(7))


def test_train_gan_rejects_empty_dataset():
    gen, disc, _ = _toy_setup()
    with pytest.raises(ValueError):
        train_gan([], GanTrainingConfig(iterations=1), gen, disc)


def test_train_gan_divergence_detection():
    gen, disc, data = _toy_setup()
    with torch.no_grad():
        disc.lin_in.weight.fill_(float("nan"))
    with pytest.raises(TrainingDiverged) as err:
        train_gan(data, GanTrainingConfig(iterations=3, batch_size=2), gen, disc)
    assert err.value.iteration == 0
    assert len(err.value.history) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        GanTrainingConfig(lam=-0.1)
    with pytest.raises(ValueError):
        GanTrainingConfig(iterations=0)
    with pytest.raises(ValueError):
        GeneratorConfig(n_points=16, noise_dim=-1)


def test_checkpoint_roundtrip(tmp_path):
    gen, disc, data = _toy_setup(seed=5)
    cfg = GanTrainingConfig(iterations=2, batch_size=4, seed=2)
    train_gan(data, cfg, gen, disc)
    path = tmp_path / "ck.pinv"
    save_gan_checkpoint(path, gen, disc, cfg, iteration=2)
    gen2, disc2, cfg2, it = load_gan_checkpoint(path)
    assert it == 2
    assert cfg2 == cfg
    codes, style = gen.sample_codes(1, torch.Generator().manual_seed(0))
    with torch.no_grad():
        assert torch.equal(gen(codes, style), gen2(codes, style))
        s, p = disc(codes[0, :, :3])
        s2, p2 = disc2(codes[0, :, :3])
    assert torch.equal(s, s2) and torch.equal(p, p2)
