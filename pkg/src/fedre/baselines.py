"""Comparison strategies sharing the round skeleton.

Five upload policies over the same client/server machinery:

  local          no uploads, no broadcast; clients train alone
  fed_all_rep    one packet per training sample (upper communication bound)
  fedgh_style    one one-hot prototype packet per present category
  fedproto_style prototypes averaged server-side, no classifier training;
                 the averaged prototypes regularize local training
  fedre          one entangled packet per client; weights re-sampled each
                 round (rs) or frozen from the first packet onward (fs)
"""

from dataclasses import dataclass, field

import numpy as np

from .entangle import (
    EntangledPacket,
    ReMechanism,
    compute_prototypes,
    entangle,
    re_weights,
    rm_apply,
)
from .nets import one_hot
from .protocol import (
    REPRESENTATION_PLUS_LABEL,
    RoundMetrics,
    _restore_rng_states,
    _rng_states,
    client_local_update,
    client_make_packet,
    client_representation_set,
    count_round,
    evaluate_client,
    mean_accuracy,
    participation_sample,
    server_update,
)

LOCAL = "local"
FED_ALL_REP = "fed_all_rep"
FEDGH_STYLE = "fedgh_style"
FEDPROTO_STYLE = "fedproto_style"
FEDRE = "fedre"
STRATEGIES = (LOCAL, FED_ALL_REP, FEDGH_STYLE, FEDPROTO_STYLE, FEDRE)

RESAMPLED = "rs"
FIXED = "fs"
RESAMPLE_MODES = (RESAMPLED, FIXED)

# strategies whose server trains and broadcasts the shared classifier
_CLASSIFIER_STRATEGIES = (FED_ALL_REP, FEDGH_STYLE, FEDRE)


@dataclass
class Strategy:
    kind: str = FEDRE
    mech: ReMechanism = field(default_factory=ReMechanism)
    resample: str = RESAMPLED
    lambda_proto: float = 0.1
    fs_cache: dict = field(default_factory=dict)  # client_id -> weight vector

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.resample not in RESAMPLE_MODES:
            raise ValueError(f"unknown resample mode {self.resample!r}")
        if self.lambda_proto < 0:
            raise ValueError("lambda_proto must be nonnegative")


def packets_for(strategy, client, round_index, unified_dim):
    """The packets this client uploads under the given strategy."""
    if strategy.kind == LOCAL:
        return []
    if strategy.kind == FEDRE:
        if strategy.resample == FIXED:
            w = strategy.fs_cache.get(client.client_id)
            if w is None:
                rep_set = client_representation_set(client)
                w = re_weights(rep_set, strategy.mech, client.rng)
                strategy.fs_cache[client.client_id] = w
                return [entangle(rep_set, w, client.rm, unified_dim)]
            return [client_make_packet(client, strategy.mech, unified_dim, weights=w)]
        return [client_make_packet(client, strategy.mech, unified_dim)]
    rep_set = client_representation_set(client)
    num_classes = rep_set.num_classes
    if strategy.kind == FED_ALL_REP:
        mapped, _ = rm_apply(rep_set.reps, client.rm, unified_dim)
        return [
            EntangledPacket(mapped[i].copy(), rep_set.labels_onehot[i].copy())
            for i in range(len(rep_set))
        ]
    # fedgh_style / fedproto_style: one prototype per present category
    protos = compute_prototypes(rep_set, client.rm, unified_dim)
    return [EntangledPacket(p, one_hot(c, num_classes)) for c, p in protos]


def ledger_for(
    strategy,
    num_clients,
    unified_dim,
    num_classes,
    per_client_stats=None,
    convention=None,
    num_global_prototypes=None,
):
    """(upload, broadcast) scalar counts for one round of a strategy.

    per_client_stats is [(n_samples, n_categories)] for the participating
    clients; it is required for the strategies whose upload volume depends
    on local set sizes.
    """
    if strategy.kind == LOCAL:
        return 0, 0
    plus_label = convention == REPRESENTATION_PLUS_LABEL
    per_packet = unified_dim + (num_classes if plus_label else 0)
    classifier_scalars = unified_dim * num_classes + num_classes
    if strategy.kind == FEDRE:
        return num_clients * per_packet, num_clients * classifier_scalars
    if per_client_stats is None or len(per_client_stats) != num_clients:
        raise ValueError(
            f"{strategy.kind} accounting needs per-client stats for all "
            f"{num_clients} participants"
        )
    if strategy.kind == FED_ALL_REP:
        upload = sum(n for n, _ in per_client_stats) * per_packet
        return upload, num_clients * classifier_scalars
    upload = sum(cats for _, cats in per_client_stats) * per_packet
    if strategy.kind == FEDGH_STYLE:
        return upload, num_clients * classifier_scalars
    # fedproto_style: averaged prototypes go back out instead of a classifier
    protos = num_classes if num_global_prototypes is None else num_global_prototypes
    return upload, num_clients * protos * unified_dim


def average_prototypes(packets):
    """Per-category mean of uploaded prototype packets."""
    grouped = {}
    for p in packets:
        grouped.setdefault(int(p.y_tilde.argmax()), []).append(p.r_tilde)
    return {c: np.mean(rows, axis=0) for c, rows in sorted(grouped.items())}


def strategy_round(
    strategy,
    clients,
    server,
    ledger,
    round_index,
    participation_rate=1.0,
    part_rng=None,
    global_protos=None,
):
    """One round under any strategy.

    Returns (clients, server, ledger, RoundMetrics, global_protos). Carries
    the same atomicity guarantee as protocol.run_round.
    """
    if not clients:
        raise ValueError("strategy_round needs at least one client")
    d = server.classifier.input_dim
    num_classes = server.classifier.output_dim
    protos = dict(global_protos) if global_protos else {}
    snapshot = _rng_states(clients, server, part_rng)
    cache_snapshot = dict(strategy.fs_cache)
    try:
        pool = [c for c in clients if len(c.train) > 0]
        participants = participation_sample(pool, participation_rate, part_rng)
        broadcast = strategy.kind in _CLASSIFIER_STRATEGIES
        proto_reg = (
            (strategy.lambda_proto, protos)
            if strategy.kind == FEDPROTO_STYLE
            else None
        )
        updated = {}
        packets = []
        stats = []
        for c in participants:
            trained = client_local_update(
                c, server.classifier if broadcast else None, proto_reg=proto_reg
            )
            packets.extend(packets_for(strategy, trained, round_index, d))
            updated[trained.client_id] = trained
            stats.append(
                (len(trained.train), int(np.unique(trained.train.y).size))
            )
        new_server = server
        if strategy.kind in _CLASSIFIER_STRATEGIES:
            new_server = server_update(server, packets)
        elif strategy.kind == FEDPROTO_STYLE:
            protos = average_prototypes(packets)
        upload, down = ledger_for(
            strategy,
            len(participants),
            d,
            num_classes,
            per_client_stats=stats,
            convention=ledger.convention,
            num_global_prototypes=len(protos) if strategy.kind == FEDPROTO_STYLE else None,
        )
        ledger.add_round(upload, down)
        new_clients = [updated.get(c.client_id, c) for c in clients]
        accs = [evaluate_client(c) for c in new_clients]
        metrics = RoundMetrics(
            mean_accuracy(accs),
            accs,
            ledger.upload_history[-1],
            ledger.broadcast_history[-1],
        )
        return new_clients, new_server, ledger, metrics, protos
    except Exception:
        _restore_rng_states(clients, server, part_rng, snapshot)
        strategy.fs_cache.clear()
        strategy.fs_cache.update(cache_snapshot)
        raise
