"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the per-seed detail; the
summary lines are repeated at the end of any pytest run that includes this file.
"""

import json
import time

import numpy as np
import pytest

from simwave import cli
from simwave.channel import ChannelConfig, ground_array_positions, los_component, sample_rician
from simwave.core import (PhaseProfile, SimGeometry, build_propagation_set, cascade_response,
                          exit_aperture_positions, quantize_phases, source_positions)
from simwave.optimize import TrainConfig, finite_difference_check, fit_operator, quadratic_loss
from simwave.tasks.classifier import (ClassifierConfig, classifier_setup, evaluate_classifier,
                                      separable_fixture, train_classifier)
from simwave.tasks.data import gen_synthetic_dataset
from simwave.tasks.dnn import dnn_baseline, matched_hidden_dim
from simwave.tasks.operators import sum_rate, zf_target

from conftest import naive_product, random_props

SEEDS = range(10)
DESK = SimGeometry(layers=4, n_x=8, n_y=8)   # 64-element input plane, 256 phases
DESK_TRAIN = dict(learning_rate=0.02, epochs=60, batch_size=32)
PER_CLASS = 200


def verdict(report, n, name, ok, detail):
    report(f"[{'PASS' if ok else 'FAIL'}] criterion {n} ({name}): {detail}")
    assert ok, detail


def physical_stack(rng, layers, n_x, n_y, n_in=2):
    g = SimGeometry(layers=layers, n_x=n_x, n_y=n_y)
    props = build_propagation_set(g, n_in, exit_aperture_positions(g), sources=source_positions(g, n_in))
    return g, props


# -- 1 ------------------------------------------------------------------------------

def test_c1_gradient_fidelity(report, tmp_path):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng([seed, 101])
        layers = int(rng.integers(1, 5))
        n_x, n_y = int(rng.integers(1, 5)), int(rng.integers(1, 5))   # <= 16 elements
        g, props = physical_stack(rng, layers, n_x, n_y, n_in=int(rng.integers(1, 4)))
        phases = PhaseProfile.random(g, rng)
        G = cascade_response(props, phases).G
        scale = np.sqrt(np.mean(np.abs(G) ** 2))
        T = scale * (rng.standard_normal(G.shape) + 1j * rng.standard_normal(G.shape))
        worst = max(worst, finite_difference_check(props, phases, quadratic_loss(T)).max_rel_error)

    t0 = time.perf_counter()
    status = cli.main(["grad-check", "--out", str(tmp_path), "--quiet"])
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and status == 0 and elapsed < 60
    verdict(report, 1, "gradient fidelity", ok,
            f"max rel error {worst:.2e} over 100 stacks (< 1e-5); grad-check exit {status} "
            f"in {elapsed:.2f} s (< 60 s)")


# -- 2 ------------------------------------------------------------------------------

def test_c2_cascade_oracle(report):
    worst, count = 0.0, 0
    for layers in range(1, 5):
        for n in range(1, 17):
            for kind in ("random", "physical"):
                rng = np.random.default_rng([layers, n, kind == "physical"])
                if kind == "random":
                    props = random_props(rng, layers, n, n_in=3, n_out=2)
                else:
                    n_y = 2 if n % 2 == 0 else 1
                    _, props = physical_stack(rng, layers, n // n_y, n_y, n_in=3)
                theta = rng.uniform(0, 2 * np.pi, (layers, n))
                G = cascade_response(props, PhaseProfile(theta)).G
                ref = naive_product(props, theta)
                worst = max(worst, np.linalg.norm(G - ref) / np.linalg.norm(ref))
                count += 1
    verdict(report, 2, "cascade oracle", worst < 1e-12,
            f"max relative Frobenius error {worst:.2e} over {count} stacks (< 1e-12)")


# -- 3 ------------------------------------------------------------------------------

def test_c3_dft_fit(report, tmp_path):
    cfg = {"seed": 0, "geometry": {"layers": 3, "n_x": 8, "n_y": 8},
           "operator": {"target": "dft", "size": 8},
           "train": {"learning_rate": 0.05, "epochs": 500}}
    path = tmp_path / "dft.json"
    path.write_text(json.dumps(cfg))
    runs = []
    t0 = time.perf_counter()
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["fit-operator", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        runs.append(((out / "loss_history.csv").read_bytes(), (out / "weights.simp").read_bytes()))
    elapsed = (time.perf_counter() - t0) / 2
    losses = [float(r.split(",")[1]) for r in runs[0][0].decode().splitlines()[1:]]
    first, best = losses[0], min(losses)
    ratio = first / best
    same = runs[0] == runs[1]
    ok = ratio >= 10 and same and elapsed < 300
    verdict(report, 3, "DFT fit", ok,
            f"NMSE {first:.4f} -> {best:.2e} ({ratio:.0f}x, need >= 10x) in 500 epochs; "
            f"repeat run byte-identical: {same}; {elapsed:.1f} s per run (< 300 s)")


# -- 4 ------------------------------------------------------------------------------

def test_c4_zf_sum_rate(report):
    g = SimGeometry(layers=3, n_x=4, n_y=4)
    users = 4
    props = build_propagation_set(g, users, exit_aperture_positions(g),
                                  sources=source_positions(g, users))
    chan_cfg = ChannelConfig(rx_count=users, kappa=0.0, noise_power=0.1, seed=11)
    los = los_component(g, ground_array_positions(g, chan_cfg))

    def at_unit_power(P):
        return P / np.linalg.norm(P)

    wins, fitted_rates, random_rates = 0, [], []
    for trial in range(100):
        H = sample_rician(chan_cfg, los, draw=trial).H
        cfg = TrainConfig(learning_rate=0.05, epochs=300, seed=trial)
        res = fit_operator(props, zf_target(H, 1.0), cfg)
        init = PhaseProfile(np.random.default_rng(trial).uniform(0, 2 * np.pi, (g.layers, g.per_layer)))
        r_fit = sum_rate(H, at_unit_power(cascade_response(props, res.phases).G), chan_cfg.noise_power)
        r_rand = sum_rate(H, at_unit_power(cascade_response(props, init).G), chan_cfg.noise_power)
        wins += r_fit > r_rand
        fitted_rates.append(r_fit)
        random_rates.append(r_rand)
    verdict(report, 4, "ZF sum-rate direction", wins >= 95,
            f"fitted cascade beats random phases in {wins}/100 channels (need >= 95); "
            f"mean sum rate {np.mean(fitted_rates):.2f} vs {np.mean(random_rates):.2f} bit/s/Hz")


# -- 5 ------------------------------------------------------------------------------

def test_c5_separable_fixture(report):
    g = SimGeometry(layers=2, n_x=4, n_y=2)
    perfect, first_hit = 0, []
    for seed in SEEDS:
        ch = ChannelConfig(rx_count=2, seed=seed)
        props, chan = classifier_setup(g, ch)
        data, _ = separable_fixture(props, chan, per_class=20, seed=seed)
        cfg = ClassifierConfig(class_count=2, readout_antennas=2, channel=ch,
                               train=TrainConfig(learning_rate=0.05, epochs=200, batch_size=8, seed=seed))
        res = train_classifier(data, props, cfg, chan)
        acc = evaluate_classifier(res.phases, props, chan, data.split("test"), cfg.rotation_deg).accuracy
        perfect += acc == 1.0
        first_hit.append(next((e for e, a in enumerate(res.history.test_acc) if a == 1.0), None))
    verdict(report, 5, "separable fixture", perfect == 10,
            f"100% test accuracy in {perfect}/10 seeds within 200 epochs "
            f"(first perfect epoch per seed: {first_hit})")


# -- 6, 7, 8: desk-scale classification ----------------------------------------------

def desk_run(classes, seed, rotation):
    ch = ChannelConfig(rx_count=classes, seed=seed)
    props, chan = classifier_setup(DESK, ch)
    data = gen_synthetic_dataset(classes, PER_CLASS, DESK.per_layer, seed=seed, grid=(DESK.n_y, DESK.n_x))
    cfg = ClassifierConfig(class_count=classes, readout_antennas=classes, rotation_enabled=rotation,
                           channel=ch, train=TrainConfig(seed=seed, **DESK_TRAIN))
    res = train_classifier(data, props, cfg, chan)
    rot = cfg.rotation_deg if rotation else 0.0
    acc = evaluate_classifier(res.phases, props, chan, data.split("test"), rot).accuracy
    return dict(props=props, chan=chan, data=data, cfg=cfg, result=res, acc=acc, rot=rot)


@pytest.fixture(scope="module")
def desk():
    return {(k, s, rot): desk_run(k, s, rot) for k in (2, 3, 4) for s in SEEDS for rot in (True, False)}


def test_c6_rotation_ablation(report, desk):
    lines, ok = [], True
    for k in (2, 3, 4):
        on = np.array([desk[k, s, True]["acc"] for s in SEEDS])
        off = np.array([desk[k, s, False]["acc"] for s in SEEDS])
        ok &= on.mean() >= off.mean()
        lines.append(f"{k}-class {on.mean():.3f} with / {off.mean():.3f} without")
        print(f"  {k}-class with rotation:    {np.round(on, 3).tolist()}")
        print(f"  {k}-class without rotation: {np.round(off, 3).tolist()}")
        last = [desk[k, s, True]["result"].history.test_acc[-1] for s in SEEDS]
        print(f"  {k}-class last-epoch accuracy (rotation): mean {np.mean(last):.3f}")
    four = np.mean([desk[4, s, True]["acc"] for s in SEEDS])
    ok &= four >= 0.25 + 0.20
    verdict(report, 6, "rotation ablation", bool(ok),
            "; ".join(lines) + f"; 4-class SIM mean {four:.3f} (need >= 0.45)")


def test_c7_quantization(report, desk):
    drops, naive_drops = [], []
    for s in SEEDS:
        run = desk[4, s, True]
        props, chan, data, cfg = run["props"], run["chan"], run["data"], run["cfg"]
        test = data.split("test")
        trained = run["result"].phases
        naive = evaluate_classifier(quantize_phases(trained, 2), props, chan, test, run["rot"]).accuracy
        # quantization-aware fine-tuning: straight-through on the 2-bit codebook
        qcfg = ClassifierConfig(class_count=4, readout_antennas=4, channel=cfg.channel,
                                train=TrainConfig(learning_rate=0.02, epochs=30, batch_size=32, seed=s,
                                                  quantization_bits=2, quantization_schedule="per_epoch"))
        q = train_classifier(data, props, qcfg, chan, init=trained)
        k = q.phases.phases / (np.pi / 2)
        assert np.allclose(k, np.round(k), atol=1e-12)
        q_acc = evaluate_classifier(q.phases, props, chan, test, run["rot"]).accuracy
        drops.append(100 * (run["acc"] - q_acc))
        naive_drops.append(100 * (run["acc"] - naive))
        print(f"  seed {s}: continuous {run['acc']:.3f}, 2-bit {q_acc:.3f} "
              f"(rounding only {naive:.3f})")
    mean = float(np.mean(drops))
    verdict(report, 7, "2-bit quantization", mean <= 15,
            f"mean drop {mean:.1f} pp over 10 seeds (<= 15 pp; per-seed max {max(drops):.1f} pp; "
            f"rounding without fine-tuning: mean {np.mean(naive_drops):.1f} pp)")


def test_c8_dnn_parity(report, desk):
    phases = DESK.total_elements
    hidden = matched_hidden_dim(phases, DESK.per_layer, 4)
    wins, dnn_accs, sim_accs = 0, [], []
    for s in SEEDS:
        run = desk[4, s, True]
        res = dnn_baseline(run["data"], hidden, run["cfg"].train, phase_count=phases,
                           rotation_deg=run["rot"])
        dnn_accs.append(res.confusion.accuracy)
        sim_accs.append(run["acc"])
        wins += res.confusion.accuracy >= run["acc"]
    print(f"  DNN: {np.round(dnn_accs, 3).tolist()}")
    print(f"  SIM: {np.round(sim_accs, 3).tolist()}")
    verdict(report, 8, "DNN parity", wins >= 8,
            f"DNN (hidden {hidden}, budget-matched to {phases} phases) >= SIM in {wins}/10 seeds "
            f"(need >= 8); mean {np.mean(dnn_accs):.3f} vs {np.mean(sim_accs):.3f}")


# -- 9 ------------------------------------------------------------------------------

def test_c9_determinism(report, tmp_path):
    small = {"seed": 21, "geometry": {"layers": 3, "n_x": 4, "n_y": 2},
             "channel": {"rx_count": 2, "noise_power": 0.1},
             "classifier": {"class_count": 2, "per_class": 20, "dnn_baseline": True},
             "operator": {"size": 4},
             "train": {"epochs": 8, "learning_rate": 0.02, "batch_size": 8}}
    with_data = {**small, "classifier": {**small["classifier"],
                                         "dataset_path": str(tmp_path / "gen" / "dataset.simd")}}
    zf = {**small, "channel": {"rx_count": 4, "kappa": 0.0}, "operator": {"target": "zf"}}
    evaluate = {**with_data, "classifier": {**with_data["classifier"],
                                            "weights_path": str(tmp_path / "train" / "weights.simp")}}
    jobs = [("gen-dataset", small, "gen"), ("train-classifier", with_data, "train"),
            ("evaluate", evaluate, "eval"), ("fit-operator", small, "dft"),
            ("fit-operator", zf, "zf"), ("grad-check", small, "grad")]
    for i, (_, cfg, _) in enumerate(jobs):
        (tmp_path / f"cfg{i}.json").write_text(json.dumps(cfg))

    def snapshot():
        for i, (mode, _, out) in enumerate(jobs):
            assert cli.main([mode, "--config", str(tmp_path / f"cfg{i}.json"),
                             "--out", str(tmp_path / out), "--quiet"]) == 0
        return {p.relative_to(tmp_path).as_posix(): p.read_bytes()
                for _, _, out in jobs for p in sorted((tmp_path / out).iterdir())}

    first, second = snapshot(), snapshot()
    differing = [name for name in first if first[name] != second.get(name)]
    binary = [n for n in first if n.endswith((".simp", ".simd"))]
    csvs = [n for n in first if n.endswith(".csv")]
    ok = not differing and set(first) == set(second)
    verdict(report, 9, "determinism", ok,
            f"{len(first)} artifacts ({len(csvs)} CSV, {len(binary)} binary) across 6 runs, "
            f"byte-identical on rerun; differing: {differing or 'none'}")
