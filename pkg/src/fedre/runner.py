"""Seeded experiment runs, aggregation, and metric export.

Every random choice in a run flows from one master seed through a fixed
SeedSequence spawn order (dataset, partition, per-client splits, server,
participation, attack, per-client init+stream), so replaying a config and
seed reproduces traces bit for bit. Seeds run sequentially and in isolation;
a seed that aborts is marked failed without touching the others.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, data, nets, protocol
from .config import parse_config
from .entangle import FC, ReMechanism, RMSpec, compute_prototypes, re_weights, rm_apply
from .inversion import InversionResult, dataset_range, invert_multi, score
from .protocol import ClientState, CommLedger, ServerState


@dataclass(eq=False)
class World:
    clients: list
    server: ServerState
    strategy: baselines.Strategy
    part_rng: np.random.Generator
    attack_seed: object
    dataset: data.Dataset
    unified_dim: int
    num_classes: int


@dataclass
class SeedTrace:
    seed: int
    records: list  # RoundMetrics per round
    ledger: CommLedger
    final_mean_acc: float
    failed: bool = False
    error: str | None = None


@dataclass
class RunSummary:
    seeds: list
    traces: list  # SeedTrace per seed
    per_seed_final_acc: list  # None for failed seeds
    mean_acc: float
    std_acc: float
    failed_seeds: list

    @property
    def upload_total(self):
        ok = [t for t in self.traces if not t.failed]
        return ok[0].ledger.upload_total if ok else 0

    @property
    def broadcast_total(self):
        ok = [t for t in self.traces if not t.failed]
        return ok[0].ledger.broadcast_total if ok else 0


def _spawn_streams(seed, num_clients):
    root = np.random.SeedSequence(seed)
    names = ("dataset", "partition", "splits", "server", "participation", "attack", "clients")
    children = dict(zip(names, root.spawn(len(names))))
    children["splits"] = children["splits"].spawn(num_clients)
    children["clients"] = [ss.spawn(2) for ss in children["clients"].spawn(num_clients)]
    return children


def build_dataset(cfg, seed_seq):
    ds_cfg = cfg.dataset
    if ds_cfg.kind == "csv":
        return data.load_csv(ds_cfg.path)
    return data.make_blobs(
        ds_cfg.classes, ds_cfg.per_class, ds_cfg.dim, ds_cfg.spread, seed_seq
    )


def build_world(cfg, seed):
    """Materialize clients, server, and strategy for one seed."""
    streams = _spawn_streams(seed, cfg.num_clients)
    ds = build_dataset(cfg, streams["dataset"])
    num_classes = ds.num_classes
    if cfg.partition.mode == data.PAT and (
        cfg.partition.categories_per_client > num_classes
    ):
        raise ValueError("categories_per_client exceeds dataset categories")
    spec = data.PartitionSpec(
        mode=cfg.partition.mode,
        num_clients=cfg.num_clients,
        seed=streams["partition"],
        alpha=cfg.partition.alpha,
        categories_per_client=cfg.partition.categories_per_client,
        imbalance_factor=cfg.partition.imbalance_factor,
    )
    parts = data.partition(ds, spec)
    clients = []
    for k in range(cfg.num_clients):
        train, test = data.train_test_split(
            parts[k], cfg.train_fraction, streams["splits"][k]
        )
        init_ss, stream_ss = streams["clients"][k]
        init_rng = np.random.default_rng(init_ss)
        hidden = cfg.architectures[k]
        extractor = protocol.make_extractor(ds.dim, hidden, init_rng)
        if cfg.rm_op == FC:
            rm = RMSpec(
                FC,
                nets.init_dense(
                    [hidden[-1], cfg.unified_dim], [nets.IDENTITY], init_rng
                ),
            )
        else:
            rm = RMSpec(cfg.rm_op)
        classifier = protocol.make_classifier(cfg.unified_dim, num_classes, init_rng)
        clients.append(
            ClientState(
                client_id=k,
                extractor=extractor,
                rm=rm,
                classifier=classifier,
                train=train,
                test=test,
                rng=np.random.default_rng(stream_ss),
                lr=cfg.client_lr,
                batch_size=cfg.client_batch_size,
                epochs=cfg.client_epochs,
            )
        )
    server_init, server_stream = streams["server"].spawn(2)
    server = ServerState(
        classifier=protocol.make_classifier(
            cfg.unified_dim, num_classes, np.random.default_rng(server_init)
        ),
        rng=np.random.default_rng(server_stream),
        lr=cfg.server_lr,
        batch_size=cfg.server_batch_size,
        epochs=cfg.server_epochs,
    )
    strategy = baselines.Strategy(
        kind=cfg.strategy,
        mech=ReMechanism(cfg.mechanism, cfg.weight_distribution),
        resample=cfg.resample,
        lambda_proto=cfg.lambda_proto,
    )
    return World(
        clients=clients,
        server=server,
        strategy=strategy,
        part_rng=np.random.default_rng(streams["participation"]),
        attack_seed=streams["attack"],
        dataset=ds,
        unified_dim=cfg.unified_dim,
        num_classes=num_classes,
    )


def run_single_seed(cfg, seed):
    """All rounds for one seed; returns the trace."""
    world = build_world(cfg, seed)
    ledger = CommLedger(cfg.comm_convention)
    clients, server = world.clients, world.server
    records = []
    protos = {}
    for rnd in range(cfg.rounds):
        clients, server, ledger, metrics, protos = baselines.strategy_round(
            world.strategy,
            clients,
            server,
            ledger,
            rnd,
            participation_rate=cfg.participation_rate,
            part_rng=world.part_rng,
            global_protos=protos,
        )
        records.append(metrics)
    if records:
        final = records[-1].mean_acc
    else:
        final = protocol.mean_accuracy(
            [protocol.evaluate_client(c) for c in clients]
        )
    return SeedTrace(seed, records, ledger, final)


def run_experiment(cfg):
    """Run every seed; failed seeds are recorded, not fatal."""
    traces = []
    for seed in cfg.seeds:
        try:
            traces.append(run_single_seed(cfg, seed))
        except RuntimeError as e:
            traces.append(
                SeedTrace(
                    seed,
                    [],
                    CommLedger(cfg.comm_convention),
                    float("nan"),
                    failed=True,
                    error=f"{type(e).__name__}: {e}",
                )
            )
    finals = [None if t.failed else t.final_mean_acc for t in traces]
    ok = [a for a in finals if a is not None]
    return RunSummary(
        seeds=list(cfg.seeds),
        traces=traces,
        per_seed_final_acc=finals,
        mean_acc=float(np.mean(ok)) if ok else float("nan"),
        std_acc=float(np.std(ok)) if ok else float("nan"),
        failed_seeds=[t.seed for t in traces if t.failed],
    )


def summary_records(summary):
    """One dict per (seed, round), in run order."""
    out = []
    for trace in summary.traces:
        for rnd, metrics in enumerate(trace.records):
            record = metrics.to_record(rnd)
            record["seed"] = int(trace.seed)
            out.append(record)
    return out


def export_summary(summary, fmt, path):
    """Write per-round metrics as jsonl or csv; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = summary_records(summary)
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                ordered = {"seed": record["seed"]}
                ordered.update(
                    (k, record[k])
                    for k in (
                        "round",
                        "mean_acc",
                        "per_client_acc",
                        "upload_scalars",
                        "broadcast_scalars",
                    )
                )
                fh.write(json.dumps(ordered) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "round", "mean_acc", "upload", "broadcast"])
            for r in records:
                writer.writerow(
                    [
                        r["seed"],
                        r["round"],
                        f"{r['mean_acc']:.6g}",
                        r["upload_scalars"],
                        r["broadcast_scalars"],
                    ]
                )
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def apply_override(mapping, dotted_key, value):
    """Set a possibly nested key in a raw config dict."""
    parts = dotted_key.split(".")
    node = mapping
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot descend into {p!r} in {dotted_key!r}")
    node[parts[-1]] = value
    return mapping


def run_sweep(base_mapping, dotted_key, values):
    """Re-run the experiment once per override value.

    Returns [(value, ExperimentConfig, RunSummary)].
    """
    results = []
    for value in values:
        mapping = json.loads(json.dumps(base_mapping))
        apply_override(mapping, dotted_key, value)
        cfg = parse_config(mapping)
        results.append((value, cfg, run_experiment(cfg)))
    return results


TARGET_KINDS = ("raw", "prototype", "entangled")


@dataclass
class InversionStudy:
    results: list  # InversionResult
    mean_mse: dict
    mean_psnr: dict

    def records(self):
        return [
            {
                "target_kind": r.target_kind,
                "mse": r.mse,
                "psnr": r.psnr,
                "iterations": r.iterations,
            }
            for r in self.results
        ]


def run_inversion_study(cfg):
    """Train briefly, then attack raw, prototype, and entangled targets.

    For every seed the attacked client is client 0. Raw targets score
    against their single source sample, prototypes against their category's
    samples, entangled packets against the whole local training set.
    """
    inv = cfg.inversion
    results = []
    for seed in cfg.seeds:
        world = build_world(cfg, seed)
        clients, server = world.clients, world.server
        ledger = CommLedger(cfg.comm_convention)
        protos = {}
        for rnd in range(cfg.rounds):
            clients, server, ledger, _, protos = baselines.strategy_round(
                world.strategy,
                clients,
                server,
                ledger,
                rnd,
                participation_rate=cfg.participation_rate,
                part_rng=world.part_rng,
                global_protos=protos,
            )
        client = clients[0]
        rng = np.random.default_rng(world.attack_seed)
        rep_set = protocol.client_representation_set(client)
        mapped, _ = rm_apply(rep_set.reps, client.rm, world.unified_dim)
        peak = (
            inv.data_range
            if inv.data_range is not None
            else dataset_range(client.train.X)
        )

        def attack(target, kind, originals):
            rec = invert_multi(
                client.extractor,
                client.rm,
                target,
                inv.steps,
                inv.lr,
                rng,
                init_scale=inv.init_scale,
                restarts=inv.restarts,
            )
            mse, psnr = score(rec, originals, peak)
            results.append(InversionResult(rec, kind, mse, psnr, inv.steps))

        n = len(client.train)
        picks = rng.choice(n, size=min(inv.num_targets, n), replace=False)
        for i in picks:
            attack(mapped[i], "raw", client.train.X[i])
        protos_list = compute_prototypes(rep_set, client.rm, world.unified_dim)
        cats = rng.permutation(len(protos_list))[: inv.num_targets]
        for ci in cats:
            c, proto = protos_list[ci]
            attack(proto, "prototype", client.train.X[client.train.y == c])
        for _ in range(inv.num_targets):
            w = re_weights(rep_set, world.strategy.mech, rng)
            packet = np.asarray(w @ mapped, dtype=float)
            attack(packet, "entangled", client.train.X)
    mean_mse = {
        kind: float(np.mean([r.mse for r in results if r.target_kind == kind]))
        for kind in TARGET_KINDS
    }
    mean_psnr = {
        kind: float(np.mean([r.psnr for r in results if r.target_kind == kind]))
        for kind in TARGET_KINDS
    }
    return InversionStudy(results, mean_mse, mean_psnr)
