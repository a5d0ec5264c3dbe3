"""One communication round, end to end.

Each round: the server classifier is broadcast and replaces every
participating client's own copy, clients fine-tune locally (extractor,
classifier, and learned mapping together), each client collapses its mapped
training representations into a single entangled packet, the server trains
the shared classifier on the uploaded packets with soft-label cross-entropy,
and the communication ledger is incremented. Rounds are atomic: if any step
aborts, no state (including RNG streams) is committed.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from .entangle import (
    FC,
    EntangledPacket,
    RMSpec,
    RepresentationSet,
    entangle,
    re_weights,
    rm_apply,
    rm_backward,
)
from .nets import DivergedError, ShapeError

REPRESENTATION_ONLY = "representation_only"
REPRESENTATION_PLUS_LABEL = "representation_plus_label"
CONVENTIONS = (REPRESENTATION_ONLY, REPRESENTATION_PLUS_LABEL)


@dataclass(eq=False)
class ClientState:
    client_id: int
    extractor: nets.DenseNet
    rm: RMSpec
    classifier: nets.DenseNet
    train: object  # data.Dataset
    test: object
    rng: np.random.Generator
    lr: float = 0.05
    batch_size: int = 16
    epochs: int = 1


@dataclass(eq=False)
class ServerState:
    classifier: nets.DenseNet
    rng: np.random.Generator
    lr: float = 0.01
    batch_size: int = 10
    epochs: int = 5


@dataclass
class CommLedger:
    """Per-round upload/broadcast scalar counts."""

    convention: str = REPRESENTATION_ONLY
    upload_history: list = field(default_factory=list)
    broadcast_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown comm convention {self.convention!r}")

    def add_round(self, upload, broadcast):
        if upload < 0 or broadcast < 0:
            raise ValueError("scalar counts must be nonnegative")
        self.upload_history.append(int(upload))
        self.broadcast_history.append(int(broadcast))

    @property
    def upload_total(self):
        return sum(self.upload_history)

    @property
    def broadcast_total(self):
        return sum(self.broadcast_history)


@dataclass
class RoundMetrics:
    mean_acc: float
    per_client_acc: list
    upload_scalars: int
    broadcast_scalars: int

    def to_record(self, round_index):
        return {
            "round": int(round_index),
            "mean_acc": self.mean_acc,
            "per_client_acc": self.per_client_acc,
            "upload_scalars": self.upload_scalars,
            "broadcast_scalars": self.broadcast_scalars,
        }


def count_round(ledger, num_clients, unified_dim, num_classes, convention=None):
    """Account one round of packet uploads and classifier broadcast."""
    if num_clients < 0:
        raise ValueError("num_clients must be nonnegative")
    conv = ledger.convention if convention is None else convention
    if conv not in CONVENTIONS:
        raise ValueError(f"unknown comm convention {conv!r}")
    per_packet = unified_dim + (num_classes if conv == REPRESENTATION_PLUS_LABEL else 0)
    upload = num_clients * per_packet
    broadcast = num_clients * (unified_dim * num_classes + num_classes)
    ledger.add_round(upload, broadcast)
    return ledger


def make_extractor(input_dim, hidden_sizes, rng):
    sizes = [input_dim] + list(hidden_sizes)
    return nets.init_dense(sizes, [nets.RELU] * (len(sizes) - 1), rng)


def make_classifier(unified_dim, num_classes, rng):
    return nets.init_dense([unified_dim, num_classes], [nets.IDENTITY], rng)


def receive_classifier(client, classifier):
    """Replace the client's classifier with a copy of the broadcast one."""
    if classifier.input_dim != client.classifier.input_dim or (
        classifier.output_dim != client.classifier.output_dim
    ):
        raise ShapeError("broadcast classifier dimensions do not match")
    return replace(client, classifier=nets.clone_net(classifier))


def client_representation_set(client):
    """Raw representations of the client's training samples, current extractor."""
    reps, _ = nets.forward_pass(client.extractor, client.train.X)
    onehot = nets.one_hot_matrix(client.train.y, client.classifier.output_dim)
    return RepresentationSet(reps, onehot)


def local_gradients(extractor, rm, classifier, Xb, targets, proto_reg=None):
    """Loss and gradients of the composed net on one minibatch.

    proto_reg, when given, is (lam, prototype_rows, mask): a pull of the
    mapped representations toward per-category prototypes, added to the
    cross-entropy. Rows without a prototype carry a zero mask.
    Returns (loss, extractor grads, classifier grads, fc grads or None).
    """
    n = Xb.shape[0]
    reps, ext_cache = nets.forward_pass(extractor, Xb)
    mapped, rm_cache = rm_apply(reps, rm, classifier.input_dim)
    logits, cls_cache = nets.forward_pass(classifier, mapped)
    loss = nets.batch_mean_ce(logits, targets)
    cls_grads, grad_mapped = nets.backprop(
        classifier, cls_cache, nets.ce_grad(logits, targets)
    )
    if proto_reg is not None:
        lam, proto_rows, mask = proto_reg
        diffs = (mapped - proto_rows) * mask[:, None]
        loss += lam * float((diffs**2).sum()) / n
        grad_mapped = grad_mapped + (2.0 * lam / n) * diffs
    grad_reps, fc_grads = rm_backward(grad_mapped, rm, rm_cache)
    ext_grads, _ = nets.backprop(extractor, ext_cache, grad_reps)
    return loss, ext_grads, cls_grads, fc_grads


def client_local_update(client, global_classifier, proto_reg=None):
    """Sync the broadcast classifier (if any), then run local SGD epochs.

    proto_reg is (lam, {category: prototype}) for prototype-regularized
    training. Returns a new ClientState; the input state's parameters are
    untouched (its RNG stream advances).
    """
    c = (
        receive_classifier(client, global_classifier)
        if global_classifier is not None
        else client
    )
    if len(c.train) == 0:
        raise ValueError(f"client {c.client_id} has no training samples")
    extractor, classifier, rm = c.extractor, c.classifier, c.rm
    num_classes = classifier.output_dim
    reg = None
    n = len(c.train)
    for _ in range(c.epochs):
        order = c.rng.permutation(n)
        for start in range(0, n, c.batch_size):
            idx = order[start : start + c.batch_size]
            Xb = c.train.X[idx]
            yb = c.train.y[idx]
            targets = nets.one_hot_matrix(yb, num_classes)
            if proto_reg is not None:
                lam, protos = proto_reg
                rows = np.zeros((idx.size, classifier.input_dim))
                mask = np.zeros(idx.size)
                for i, label in enumerate(yb):
                    if int(label) in protos:
                        rows[i] = protos[int(label)]
                        mask[i] = 1.0
                reg = (lam, rows, mask)
            loss, ext_grads, cls_grads, fc_grads = local_gradients(
                extractor, rm, classifier, Xb, targets, proto_reg=reg
            )
            if not math.isfinite(loss):
                raise DivergedError(
                    f"client {c.client_id} local loss is non-finite"
                )
            extractor = nets.sgd_step(extractor, ext_grads, c.lr)
            classifier = nets.sgd_step(classifier, cls_grads, c.lr)
            if fc_grads is not None:
                rm = RMSpec(FC, nets.sgd_step(rm.net, fc_grads, c.lr))
    return replace(c, extractor=extractor, classifier=classifier, rm=rm)


def client_make_packet(client, mech, unified_dim, weights=None):
    """Collapse the client's training set into one entangled packet.

    Weights are drawn fresh from the client's RNG stream unless an explicit
    vector is supplied (fixed-sampling replay).
    """
    if len(client.train) == 0:
        raise ValueError(f"client {client.client_id} has no training samples")
    rep_set = client_representation_set(client)
    w = re_weights(rep_set, mech, client.rng) if weights is None else weights
    return entangle(rep_set, w, client.rm, unified_dim)


def server_update(server, packets):
    """Train the shared classifier on the uploaded packets."""
    if not packets:
        raise ValueError("server_update needs at least one packet")
    d = server.classifier.input_dim
    num_classes = server.classifier.output_dim
    for p in packets:
        if p.r_tilde.shape != (d,) or p.y_tilde.shape != (num_classes,):
            raise ShapeError("packet dimensions do not match the classifier")
    R = np.stack([p.r_tilde for p in packets])
    Y = np.stack([p.y_tilde for p in packets])
    classifier = server.classifier
    n = len(packets)
    for _ in range(server.epochs):
        order = server.rng.permutation(n)
        for start in range(0, n, server.batch_size):
            idx = order[start : start + server.batch_size]
            loss, grads = nets.ce_value_and_grads(classifier, R[idx], Y[idx])
            if not math.isfinite(loss):
                raise DivergedError("server loss is non-finite")
            classifier = nets.sgd_step(classifier, grads, server.lr)
    return replace(server, classifier=classifier)


def evaluate_client(client):
    """Argmax accuracy on the client's test set (None when it is empty)."""
    if len(client.test) == 0:
        return None
    reps, _ = nets.forward_pass(client.extractor, client.test.X)
    mapped, _ = rm_apply(reps, client.rm, client.classifier.input_dim)
    logits, _ = nets.forward_pass(client.classifier, mapped)
    pred = logits.argmax(axis=1)  # ties resolve to the lowest class index
    return float((pred == client.test.y).mean())


def mean_accuracy(per_client):
    scored = [a for a in per_client if a is not None]
    return float(np.mean(scored)) if scored else float("nan")


def participation_sample(clients, rate, rng):
    """Uniform without-replacement draw of ceil(rate * K) clients."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"participation rate {rate} outside (0, 1]")
    if not clients:
        raise ValueError("no clients to sample from")
    if rate == 1.0:
        return list(clients)
    k = math.ceil(rate * len(clients))
    chosen = rng.choice(len(clients), size=k, replace=False)
    return [clients[i] for i in sorted(chosen)]


def _rng_states(clients, server, part_rng):
    states = [c.rng.bit_generator.state for c in clients]
    states.append(server.rng.bit_generator.state)
    states.append(None if part_rng is None else part_rng.bit_generator.state)
    return states


def _restore_rng_states(clients, server, part_rng, states):
    for c, st in zip(clients, states):
        c.rng.bit_generator.state = st
    server.rng.bit_generator.state = states[len(clients)]
    if part_rng is not None and states[-1] is not None:
        part_rng.bit_generator.state = states[-1]


def run_round(clients, server, mech, ledger, participation_rate=1.0, part_rng=None):
    """One full round. Returns (clients, server, ledger, RoundMetrics).

    Input states are never mutated; on any abort the RNG streams are rolled
    back so the failed round leaves no trace.
    """
    if not clients:
        raise ValueError("run_round needs at least one client")
    d = server.classifier.input_dim
    num_classes = server.classifier.output_dim
    snapshot = _rng_states(clients, server, part_rng)
    try:
        pool = [c for c in clients if len(c.train) > 0]
        participants = participation_sample(pool, participation_rate, part_rng)
        updated = {}
        packets = []
        for c in participants:
            trained = client_local_update(c, server.classifier)
            packets.append(client_make_packet(trained, mech, d))
            updated[trained.client_id] = trained
        new_server = server_update(server, packets)
        count_round(ledger, len(participants), d, num_classes)
        new_clients = [updated.get(c.client_id, c) for c in clients]
        accs = [evaluate_client(c) for c in new_clients]
        metrics = RoundMetrics(
            mean_accuracy(accs),
            accs,
            ledger.upload_history[-1],
            ledger.broadcast_history[-1],
        )
        return new_clients, new_server, ledger, metrics
    except Exception:
        _restore_rng_states(clients, server, part_rng, snapshot)
        raise
