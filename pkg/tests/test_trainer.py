"""Training-loop semantics: step effects, gradient routing, selection size,
variant wiring, determinism and log export."""

import csv
import math

import numpy as np
import pytest

import divuda.divergence as dv
from divuda.errors import ParameterError
from divuda.synthdata import make_noisy_scenario, toy_scenario
from divuda.trainer import (LOG_COLUMNS, Hyperparams, Trainer, toy_hyperparams,
                            train)


def tiny_trainer(variant="full", seed=0, check_routing=False, model_mode="twin",
                 scenario_kw=None, **hyper_overrides):
    base = dict(iterations=5, hidden=16, batch_size=32)
    base.update(hyper_overrides)
    spec = toy_scenario(seed=seed, samples_per_class=40, **(scenario_kw or {}))
    src, tgt = make_noisy_scenario(spec)
    return Trainer(src, tgt, hyper=Hyperparams(**base), variant=variant,
                   seed=seed, check_routing=check_routing, model_mode=model_mode)


def test_hyperparams_validation():
    with pytest.raises(ParameterError):
        Hyperparams(alpha=1.0)
    with pytest.raises(ParameterError):
        Hyperparams(lam=-0.1)
    with pytest.raises(ParameterError):
        Hyperparams(delta=0.0)
    with pytest.raises(ParameterError):
        Hyperparams(n_repeat=0)


def test_delta_defaults_to_log_num_classes():
    assert abs(Hyperparams().resolved_delta(3) - math.log(3)) < 1e-12
    assert Hyperparams(delta=2.5).resolved_delta(3) == 2.5


def test_toy_hyperparams_overrides():
    hp = toy_hyperparams()
    assert hp.lam == 3.0 and hp.lr == 0.001 and hp.iterations == 10000
    assert hp.alpha == Hyperparams().alpha  # untouched fields keep defaults
    assert toy_hyperparams(iterations=7).iterations == 7


def test_selection_size_invariant():
    # 120 source rows, batch 40: every batch is full sized
    tr = tiny_trainer(alpha=0.2, batch_size=40)
    for _ in range(6):
        trace = tr.run_iteration()
        assert trace.n_selected_source == math.ceil(0.8 * 40)


def test_selection_size_on_partial_batch():
    # 120 rows, batch 50: epochs end with a 20-row remainder batch
    tr = tiny_trainer(alpha=0.2, batch_size=50)
    sizes = {tr.run_iteration().n_selected_source for _ in range(6)}
    assert sizes == {math.ceil(0.8 * 50), math.ceil(0.8 * 20)}


def test_no_select_keeps_whole_batch():
    tr = tiny_trainer(variant="no_select", alpha=0.2, batch_size=40)
    trace = tr.run_iteration()
    assert trace.n_selected_source == 40


def test_routing_guard_passes_on_correct_steps():
    tr = tiny_trainer(check_routing=True)
    for _ in range(3):
        tr.run_iteration()  # must not raise


def test_step_b_moves_heads_only():
    tr = tiny_trainer()
    src_b, tgt_b = next(tr._src_batches), next(tr._tgt_batches)
    gen_before = {n: v.tobytes() for n, v in tr._gen_params.snapshot().items()}
    cls_before = {n: v.tobytes() for n, v in tr._cls_params.snapshot().items()}
    from divuda.trainer import StepTrace
    tr.step_b(src_b, tgt_b, StepTrace(iteration=0))
    assert all(tr._gen_params[n].value.tobytes() == b for n, b in gen_before.items())
    assert any(tr._cls_params[n].value.tobytes() != b for n, b in cls_before.items())


def test_step_c_moves_generator_only_and_lowers_crs():
    # delta far above the initial cross entropy (~2 ln 3) so the whole
    # batch falls under the delta - margin selection threshold
    tr = tiny_trainer(delta=6.0, lr=0.005)
    tgt_b = next(tr._tgt_batches)

    def batch_crs():
        crs, _ = dv.per_sample_crs_ent(tr._forward(tgt_b.features))
        return crs.value.ravel()

    idx = dv.select_target_common(batch_crs(), tr.delta, tr.hyper.margin)
    assert len(idx) == len(tgt_b.indices)
    before = batch_crs()[idx].mean()
    cls_before = {n: v.tobytes() for n, v in tr._cls_params.snapshot().items()}
    from divuda.trainer import StepTrace
    tr.step_c(tgt_b, StepTrace(iteration=0))
    assert all(tr._cls_params[n].value.tobytes() == b for n, b in cls_before.items())
    assert batch_crs()[idx].mean() < before


def test_supervised_loss_decreases():
    # clean labels so the supervised loss can approach zero
    tr = tiny_trainer(variant="source_only", lr=0.01,
                      scenario_kw=dict(noise_kind="none", noise_rate=0.0))
    first = tr.run_iteration().loss_s
    for _ in range(199):
        trace = tr.run_iteration()
    assert trace.loss_s < 0.5 * first


def test_no_minimax_skips_b_and_c():
    tr = tiny_trainer(variant="no_minimax")
    trace = tr.run_iteration()
    assert math.isnan(trace.loss_b)
    assert trace.loss_c == []
    assert not math.isnan(trace.loss_s)


def test_source_only_skips_separation():
    trace = tiny_trainer(variant="source_only").run_iteration()
    assert math.isnan(trace.loss_t)
    assert math.isnan(trace.loss_b)


def test_training_deterministic():
    def fingerprint():
        tr = tiny_trainer(seed=3)
        for _ in range(5):
            tr.run_iteration()
        return b"".join(v for _, v in sorted(
            (n, node.value.tobytes()) for n, node in tr.model.params.items()))

    assert fingerprint() == fingerprint()


def test_dropout_mode_trains():
    tr = tiny_trainer(model_mode="dropout")
    for _ in range(5):
        trace = tr.run_iteration()
    assert np.isfinite(trace.loss_s)
    assert all(np.isfinite(n.value).all() for _, n in tr.model.params.items())


def test_train_function_and_log_csv(tmp_path):
    spec = toy_scenario(samples_per_class=20)
    model, log = train(spec, hyper=Hyperparams(iterations=4, hidden=8))
    assert len(log) == 4
    path = tmp_path / "trainlog.csv"
    log.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == LOG_COLUMNS
    assert len(rows) == 5
    assert rows[1][0] == "0"
    # eval columns stay blank when no eval callback ran
    assert rows[1][-1] == "" and rows[1][-2] == ""


def test_train_accepts_dataset_pair():
    src, tgt = make_noisy_scenario(toy_scenario(samples_per_class=20))
    model, log = train((src, tgt), hyper=Hyperparams(iterations=2, hidden=8))
    assert len(log) == 2


def test_clean_fraction_tracks_truth():
    trace = tiny_trainer().run_iteration()
    assert 0.0 <= trace.selection_clean_fraction <= 1.0
