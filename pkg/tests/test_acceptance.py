"""Acceptance gate: the nine checks the package promises to pass.

Each test prints one PASS/FAIL line (run with -s to see them on success).
The heavier checks share the trained toy runs through module fixtures, and
every check carries its own tolerance; none may be loosened without a note
in the project history.
"""

import json
import time

import numpy as np
import pytest

from fedre import baselines, data, entangle, nets, presets, protocol, runner
from fedre.entangle import AP, RMSpec, RepresentationSet

import helpers

TOY_TARGETS = {"fed_all_rep": 63.50, "fedre_rs": 62.00, "fedgh_style": 60.50}
TOY_BAND = 6.0


def report(number, name, ok, detail):
    print(f"acceptance {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


# ------------------------------------------------------------ shared runs


@pytest.fixture(scope="module")
def toy_runs():
    """Final mean accuracy (percent) and wall time per toy strategy."""
    out = {}
    jobs = {
        "fed_all_rep": dict(strategy=baselines.FED_ALL_REP),
        "fedre_rs": dict(strategy=baselines.FEDRE, resample="rs"),
        "fedre_fs": dict(strategy=baselines.FEDRE, resample="fs"),
        "fedgh_style": dict(strategy=baselines.FEDGH_STYLE),
    }
    for key, kwargs in jobs.items():
        cfg = presets.toy_comparison_config(**kwargs)
        t0 = time.perf_counter()
        summary = runner.run_experiment(cfg)
        elapsed = time.perf_counter() - t0
        assert not summary.failed_seeds
        out[key] = (100.0 * summary.mean_acc, elapsed)
    return out


def test_1_toy_strategy_comparison(toy_runs):
    means = {k: toy_runs[k][0] for k in TOY_TARGETS}
    elapsed = sum(toy_runs[k][1] for k in TOY_TARGETS)
    in_band = all(
        abs(means[k] - TOY_TARGETS[k]) <= TOY_BAND for k in TOY_TARGETS
    )
    ordered = (
        means["fed_all_rep"] >= means["fedre_rs"] >= means["fedgh_style"] - 1.0
    )
    ok = in_band and ordered and elapsed < 120.0
    report(
        1,
        "toy strategy comparison",
        ok,
        f"all_rep {means['fed_all_rep']:.2f} fedre {means['fedre_rs']:.2f} "
        f"fedgh {means['fedgh_style']:.2f}, {elapsed:.0f}s",
    )
    assert in_band, (means, TOY_TARGETS)
    assert ordered, means
    assert elapsed < 120.0


def test_2_resampled_vs_frozen_gap(toy_runs):
    rs, t_rs = toy_runs["fedre_rs"]
    fs, t_fs = toy_runs["fedre_fs"]
    gap = rs - fs
    elapsed = t_rs + t_fs
    ok = gap >= 10.0 and elapsed < 120.0
    report(
        2,
        "resampled vs frozen gap",
        ok,
        f"rs {rs:.2f} fs {fs:.2f} gap {gap:.2f}, {elapsed:.0f}s",
    )
    assert gap >= 10.0, (rs, fs)
    assert elapsed < 120.0


def test_3_communication_accounting_exact():
    cases = [
        (10, 512, 100, 5120, 513000),
        (10, 512, 10, 5120, 51300),
    ]
    got = []
    for k, d, c, up, down in cases:
        ledger = protocol.CommLedger(protocol.REPRESENTATION_ONLY)
        protocol.count_round(ledger, k, d, c)
        got.append((ledger.upload_history[-1], ledger.broadcast_history[-1]))
    ok = got == [(up, down) for _, _, _, up, down in cases]
    report(3, "communication accounting", ok, f"{got[0]} and {got[1]}")
    for (k, d, c, up, down), (gu, gd) in zip(cases, got):
        assert gu == up and gd == down, (k, d, c, gu, gd)


def test_4_entanglement_property_suite():
    rng = np.random.default_rng(2024)
    unified_dim = 4
    rm = RMSpec(AP)
    worst = {"wsum": 0.0, "simplex": 0.0, "collapse": 0.0, "mixup": 0.0, "vap": 0.0}
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        num_classes = int(rng.integers(2, 6))
        labels = rng.integers(num_classes, size=n)
        labels[0] = 0  # category 0 always present
        reps = rng.standard_normal((n, 2 * unified_dim))
        rep_set = RepresentationSet(reps, np.eye(num_classes)[labels])
        for kind in entangle.MECHANISMS:
            for dist in entangle.DISTRIBUTIONS:
                mech = entangle.ReMechanism(kind, dist)
                w = entangle.re_weights(rep_set, mech, rng)
                worst["wsum"] = max(worst["wsum"], abs(float(w.sum()) - 1.0))
                packet = entangle.entangle(rep_set, w, rm, unified_dim)
                y = packet.y_tilde
                worst["simplex"] = max(
                    worst["simplex"],
                    abs(float(y.sum()) - 1.0),
                    max(0.0, float(-y.min())),
                    max(0.0, float(y.max()) - 1.0),
                )
        # equal raw draws collapse the random mechanisms onto their
        # deterministic counterparts
        cats = np.unique(labels)
        var_w = entangle.re_weights(
            rep_set, entangle.ReMechanism(entangle.VAR, "uniform"), rng
        )
        vap_w = entangle.re_weights(
            rep_set, entangle.ReMechanism(entangle.VAP, "uniform"), rng
        )
        rar_eq = entangle.rar_weights_from_draws(np.full(n, 0.37))
        rap_eq = entangle.rap_weights_from_draws(labels, cats, np.full(cats.size, 0.37))
        worst["collapse"] = max(
            worst["collapse"],
            float(np.abs(rar_eq - var_w).max()),
            float(np.abs(rap_eq - vap_w).max()),
        )
        # a two-sample packet is exactly a mixup of the mapped pair
        lam = float(rng.random())
        pair = RepresentationSet(reps[:2], np.eye(num_classes)[labels[:2]])
        packet = entangle.entangle(pair, np.array([lam, 1 - lam]), rm, unified_dim)
        mapped, _ = entangle.rm_apply(reps[:2], rm, unified_dim)
        mixed = entangle.mixup_pair(
            mapped[0], np.eye(num_classes)[labels[0]],
            mapped[1], np.eye(num_classes)[labels[1]], lam,
        )
        worst["mixup"] = max(
            worst["mixup"],
            float(np.abs(packet.r_tilde - mixed.r_tilde).max()),
            float(np.abs(packet.y_tilde - mixed.y_tilde).max()),
        )
        # the evenly-weighted per-category packet averages the prototypes
        vap_packet = entangle.entangle(rep_set, vap_w, rm, unified_dim)
        protos = entangle.compute_prototypes(rep_set, rm, unified_dim)
        proto_mean = np.mean([p for _, p in protos], axis=0)
        worst["vap"] = max(
            worst["vap"], float(np.abs(vap_packet.r_tilde - proto_mean).max())
        )
    ok = (
        worst["wsum"] <= 1e-9
        and worst["simplex"] <= 1e-9
        and worst["collapse"] <= 1e-12
        and worst["mixup"] <= 1e-12
        and worst["vap"] <= 1e-10
    )
    report(
        4,
        "entanglement property suite",
        ok,
        "worst " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()),
    )
    assert worst["wsum"] <= 1e-9
    assert worst["simplex"] <= 1e-9
    assert worst["collapse"] <= 1e-12
    assert worst["mixup"] <= 1e-12
    assert worst["vap"] <= 1e-10


def test_5_gradient_correctness_hundred_triples():
    rng = np.random.default_rng(99)
    worst = 0.0
    checked = 0
    while checked < 100:
        depth = int(rng.integers(1, 4))
        sizes = [int(rng.integers(2, 6))]
        sizes += [int(rng.integers(2, 9)) for _ in range(depth)]
        net = helpers.random_net(rng, sizes)
        x = rng.standard_normal(sizes[0])
        target = helpers.random_simplex(rng, sizes[-1])
        out, cache = nets.forward_pass(net, x[None, :])
        # finite differences straddle the relu kink; resample draws that put
        # any preactivation within the probe radius of it
        if min(float(np.abs(z).min()) for z in cache.pre_activations) < 1e-3:
            continue
        nets.forward(net, x)
        analytic = nets.backward(net, x, target)
        numeric = helpers.numeric_gradients(net, x, target)
        worst = max(worst, helpers.max_rel_error(analytic, numeric))
        checked += 1
    ok = worst < 1e-4
    report(5, "gradient correctness", ok, f"max rel err {worst:.2e} over 100 triples")
    assert worst < 1e-4


def test_6_partitioner_suite():
    from test_data import label_entropy, rows_multiset, union_multiset

    ds = data.make_blobs(10, 30, 3, 0.5, np.random.SeedSequence(41))
    checks = {}

    pra = data.partition(ds, data.PartitionSpec(data.PRA, 5, np.random.SeedSequence(1), alpha=1.0))
    pat = data.partition(
        ds,
        data.PartitionSpec(data.PAT, 5, np.random.SeedSequence(2), categories_per_client=2),
    )
    checks["multiset"] = np.array_equal(
        union_multiset(pra), rows_multiset(ds)
    ) and np.array_equal(union_multiset(pat), rows_multiset(ds))
    checks["pat_counts"] = all(
        int((p.class_counts() > 0).sum()) == 2 for p in pat
    )

    factor = 100.0
    tail = data.apply_longtail(ds, factor, np.random.SeedSequence(3))
    expected = [
        max(1, round(30 * factor ** (-c / (ds.num_classes - 1))))
        for c in range(ds.num_classes)
    ]
    checks["longtail"] = list(tail.class_counts()) == expected

    lo, hi = [], []
    for seed in range(20):
        for alpha, acc in ((0.1, lo), (10.0, hi)):
            parts = data.partition(
                ds,
                data.PartitionSpec(data.PRA, 5, np.random.SeedSequence(seed), alpha=alpha),
            )
            acc.append(np.mean([label_entropy(p) for p in parts]))
    checks["pra_entropy"] = float(np.mean(lo)) < float(np.mean(hi))

    ok = all(checks.values())
    report(
        6,
        "partitioner suite",
        ok,
        " ".join(f"{k}={'y' if v else 'N'}" for k, v in checks.items())
        + f" entropy {np.mean(lo):.3f}<{np.mean(hi):.3f}",
    )
    assert all(checks.values()), checks


def test_7_privacy_directional_property():
    cfg = presets.toy_inversion_config()
    assert len(cfg.seeds) >= 20
    t0 = time.perf_counter()
    study = runner.run_inversion_study(cfg)
    elapsed = time.perf_counter() - t0
    mm = study.mean_mse
    mp = study.mean_psnr
    mse_ok = mm["entangled"] >= mm["prototype"] >= mm["raw"]
    psnr_ok = mp["entangled"] <= mp["prototype"] <= mp["raw"]
    ok = mse_ok and psnr_ok and elapsed < 180.0
    report(
        7,
        "privacy directional property",
        ok,
        f"mse {mm['raw']:.4f}/{mm['prototype']:.4f}/{mm['entangled']:.4f} "
        f"psnr {mp['raw']:.1f}/{mp['prototype']:.1f}/{mp['entangled']:.1f}, "
        f"{elapsed:.0f}s",
    )
    assert mse_ok, mm
    assert psnr_ok, mp
    assert elapsed < 180.0


def test_8_bitwise_determinism():
    cfg = presets.toy_comparison_config(rounds=10, num_seeds=2)
    a = runner.run_experiment(cfg)
    b = runner.run_experiment(cfg)
    rec_a = json.dumps(runner.summary_records(a), sort_keys=True)
    rec_b = json.dumps(runner.summary_records(b), sort_keys=True)
    ledgers_a = [(t.ledger.upload_history, t.ledger.broadcast_history) for t in a.traces]
    ledgers_b = [(t.ledger.upload_history, t.ledger.broadcast_history) for t in b.traces]
    inv_cfg = presets.toy_inversion_config(num_seeds=2, rounds=2)
    inv_cfg.inversion.steps = 40
    inv_cfg.inversion.restarts = 2
    ia = runner.run_inversion_study(inv_cfg)
    ib = runner.run_inversion_study(inv_cfg)
    inv_same = all(
        ra.mse == rb.mse
        and ra.psnr == rb.psnr
        and np.array_equal(ra.reconstructed, rb.reconstructed)
        for ra, rb in zip(ia.results, ib.results)
    )
    ok = (
        rec_a == rec_b
        and ledgers_a == ledgers_b
        and a.per_seed_final_acc == b.per_seed_final_acc
        and inv_same
    )
    report(
        8,
        "bitwise determinism",
        ok,
        f"{len(runner.summary_records(a))} round records, "
        f"{len(ia.results)} inversion records",
    )
    assert rec_a == rec_b
    assert ledgers_a == ledgers_b
    assert a.per_seed_final_acc == b.per_seed_final_acc
    assert inv_same


def test_9_scale_disclosure():
    statement = (
        "full-scale image benchmarks (CIFAR-10, CIFAR-100, TinyImageNet with "
        "a ten-architecture client zoo) are NOT reproduced here; this package "
        "runs desk-scale synthetic checks, and the statistical and exact "
        "checks above stand in for those results"
    )
    report(9, "scale disclosure", True, statement)
    assert "NOT reproduced" in statement
