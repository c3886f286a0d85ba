import numpy as np
import pytest

from srlgan import model as M
from srlgan import train as T


def toy_data(n=40, d=6, m=12, seed=0):
    """Attribute rows with planted structure: users in group g buy items
    congruent to g, so reconstruction is learnable."""
    rng = np.random.default_rng(seed)
    x = np.zeros((n, d))
    y = np.zeros((n, m))
    for k in range(n):
        g = k % 3
        x[k, g] = 1.0
        x[k, 3:] = rng.uniform(0, 0.2, d - 3)
        for i in range(g, m, 3):
            if rng.random() < 0.7:
                y[k, i] = rng.choice([0.4, 0.6, 0.8, 1.0])
    return x, y


def small_config(**overrides):
    base = dict(
        beta=0.1, batch_size=8, pretrain_epochs=5, learning_rate=1e-3,
        max_rounds=6, eval_every=2, seed=1,
        generator_hidden=[8], discriminator_hidden=[8], dropout=0.4,
    )
    base.update(overrides)
    return T.TrainConfig(**base).validate()


def test_config_validation_collects_problems():
    with pytest.raises(ValueError, match="beta"):
        T.TrainConfig(beta=-1).validate()
    with pytest.raises(ValueError, match="gan_loss"):
        T.TrainConfig(gan_loss="hinge").validate()
    with pytest.raises(ValueError, match="batch_size"):
        T.TrainConfig(batch_size=0).validate()


def test_pretrain_reduces_reconstruction_loss():
    x, y = toy_data()
    cfg = small_config(pretrain_epochs=30)
    trainer = T.Trainer(x, y, cfg)
    y0 = M.generator_forward(trainer.generator, x)
    loss0, _ = M.loss_reconstruction(y, y0)
    trainer.pretrain_generator()
    y1 = M.generator_forward(trainer.generator, x)
    loss1, _ = M.loss_reconstruction(y, y1)
    assert loss1 <= loss0


def test_pretrain_zero_iterations_leaves_params():
    x, y = toy_data()
    trainer = T.Trainer(x, y, small_config(n_e=0))
    before = trainer.generator.param_vector()
    trainer.pretrain_generator()
    assert np.array_equal(trainer.generator.param_vector(), before)


def test_training_deterministic_bit_for_bit():
    x, y = toy_data()
    params = []
    for _ in range(2):
        cfg = small_config()
        trainer = T.fit(x, y, cfg, x_val=x[:8], y_val=y[:8])
        params.append((trainer.generator.param_vector(),
                       trainer.discriminator.param_vector()))
    assert np.array_equal(params[0][0], params[1][0])
    assert np.array_equal(params[0][1], params[1][1])


def test_different_seed_different_params():
    x, y = toy_data()
    a = T.fit(x, y, small_config(seed=1))
    b = T.fit(x, y, small_config(seed=2))
    assert not np.array_equal(a.generator.param_vector(),
                              b.generator.param_vector())


def test_max_rounds_zero_keeps_pretrained_generator():
    x, y = toy_data()
    cfg = small_config(max_rounds=0)
    trainer = T.Trainer(x, y, cfg)
    trainer.pretrain_generator()
    before = trainer.generator.param_vector()
    trainer.train()
    assert np.array_equal(trainer.generator.param_vector(), before)
    assert trainer.curve.points == []


def test_curve_rounds_strictly_increasing_and_finite():
    x, y = toy_data()
    cfg = small_config(max_rounds=8, eval_every=2)
    trainer = T.fit(x, y, cfg, x_val=x[:8], y_val=y[:8])
    rounds = [p.round for p in trainer.curve.points]
    assert rounds == sorted(rounds) and len(set(rounds)) == len(rounds)
    for p in trainer.curve.points:
        assert np.isfinite(p.loss_g) and np.isfinite(p.loss_d)
        assert np.isfinite(p.loss_sr)
        assert 0.0 <= p.p5 <= 1.0


def test_discriminator_scores_stay_in_unit_interval():
    x, y = toy_data()
    cfg = small_config(max_rounds=6)
    trainer = T.fit(x, y, cfg)
    scores = trainer.discriminator.forward(
        M.discriminator_input(x, y), training=False)
    assert np.all((scores > 0) & (scores < 1))
    assert np.isfinite(scores.mean())


def test_mode_collapse_flag_mechanics():
    x, y = toy_data()
    trainer = T.Trainer(x, y, small_config())
    # a healthy generator at init should not trip the floor
    point = trainer._evaluate_checkpoint(1, 0.0, {"total": 0.0, "sr": 0.0})
    assert not point.collapse_flag


def test_bce_mode_trains():
    x, y = toy_data()
    cfg = small_config(gan_loss="bce", sparsity=False, beta=0.0, max_rounds=4)
    trainer = T.fit(x, y, cfg)
    assert trainer.rounds_done == 4


def test_d_phase_d_only_flag():
    x, y = toy_data()
    cfg = small_config(d_phase_updates_g=False, max_rounds=2, n_g=1)
    trainer = T.Trainer(x, y, cfg)
    trainer.pretrain_generator()
    g_before = trainer.generator.param_vector()
    trainer.discriminator_phase_step()
    assert np.array_equal(trainer.generator.param_vector(), g_before)


def test_holdout_split_sizes_and_determinism():
    tr1, held1 = T.holdout_split(100, 0.1, seed=4)
    tr2, held2 = T.holdout_split(100, 0.1, seed=4)
    assert len(held1) == 10 and len(tr1) == 90
    assert np.array_equal(held1, held2) and np.array_equal(tr1, tr2)
    assert not set(tr1) & set(held1)


def test_cross_validate_beta_singleton():
    x, y = toy_data(n=30)
    cfg = small_config(max_rounds=2, pretrain_epochs=2)
    best, scores = T.cross_validate_beta(x, y, [0.1], cfg)
    assert best == 0.1
    assert set(scores) == {0.1}


def test_cross_validate_beta_tie_prefers_smaller():
    x, y = toy_data(n=30)
    cfg = small_config(max_rounds=0, n_e=0, pretrain_epochs=0)
    # with no training at all, every beta scores identically
    best, scores = T.cross_validate_beta(x, y, [1.0, 0.1], cfg)
    assert len(set(scores.values())) == 1
    assert best == 0.1


def test_early_stopping_on_stale_validation():
    x, y = toy_data()
    cfg = small_config(max_rounds=100, eval_every=1, patience=3,
                       learning_rate=1e-9)
    trainer = T.fit(x, y, cfg, x_val=x[:8], y_val=y[:8])
    # tiny lr: validation P@5 cannot improve, so the loop stops early
    assert trainer.rounds_done < 100


def test_curve_csv_round_trip(tmp_path):
    x, y = toy_data()
    cfg = small_config(max_rounds=4, eval_every=2)
    trainer = T.fit(x, y, cfg, x_val=x[:8], y_val=y[:8])
    path = tmp_path / "curve.csv"
    trainer.curve.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("round,loss_g,loss_d,loss_sr,p5,n5,m5")
    assert len(lines) == 1 + len(trainer.curve.points)
