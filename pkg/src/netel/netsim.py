"""In-process simulation of the decentralized algorithms.

Every node is an actor holding its own data block, its multiplier and the edge
variables it owns. Actors talk only through a virtual network that refuses
messages between non-adjacent nodes. Messages are delivered at phase barriers
(bulk-synchronous rounds). The actors call the same update functions as the
monolithic runners, on the same inputs in the same order, so trajectories are
bit-identical.

Stopping uses global residual norms, which no single node can compute; the
simulator assembles them with an omniscient observer (fields listed in
``RunReport.observer_only``). Nothing the observer computes is fed back to the
nodes except the stop flag.

PCM schedule per iteration (edge ``(i, j)``, owner ``i = min``):
  1. ``j`` sends ``lam_j`` (LambdaShare) and ``v_ji`` (DualShare) to ``i``.
  2. ``i`` computes both copies and returns ``c_ji`` (EdgeVarShare).
  3. every node solves for its multiplier.
  4. every node updates the duals on its own side of each edge.
MAOM schedule per iteration:
  1. the owner computes ``z`` from cached multipliers and sends ``(z, t)`` (EdgeVarShare).
  2. every node takes its closed-form multiplier step.
  3. every node sends its new multiplier to all neighbours (LambdaShare).
  4. the owner updates ``t``.
"""
from __future__ import annotations

import csv
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .admm import RunReport, SolverConfig, node_sizes
from .elcore import el_statistic, moment_blocks
from .graph import Graph, spanning_tree
from .maom import MAOMObserver, MAOMState, maom_node_update
from .pcm import PCMObserver, PCMState, pcm_node_update

KINDS = ("LambdaShare", "EdgeVarShare", "DualShare")


class LocalityViolation(RuntimeError):
    """A node tried to communicate with, or read from, a non-neighbour."""


class MessageError(ValueError):
    """Malformed message payload."""


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    round: int
    kind: str
    edge: int
    payload: tuple

    @property
    def blocks(self) -> int:
        return len(self.payload)


@dataclass
class LocalityCertificate:
    """Per-round record of every message and whether it followed a graph edge."""

    K: int
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def traffic(self):
        """``{(node, round): [msgs_sent, blocks_sent]}``."""
        out = defaultdict(lambda: [0, 0])
        for rnd, sender, _, _, blocks in self.records:
            cell = out[(sender, rnd)]
            cell[0] += 1
            cell[1] += blocks
        return out

    def to_csv(self, path) -> None:
        """Write ``node, round, msgs_sent, blocks_sent`` (nodes 1-based, one row per node and round)."""
        tally = self.traffic()
        rounds = sorted({rnd for rnd, *_ in self.records})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "round", "msgs_sent", "blocks_sent"])
            for rnd in rounds:
                for k in range(1, self.K + 1):
                    m, b = tally.get((k, rnd), (0, 0))
                    w.writerow([k, rnd, m, b])


class VirtualNetwork:
    """Message transport restricted to graph edges, delivering at barriers."""

    def __init__(self, graph: Graph, r: int):
        self.graph = graph
        self.r = r
        self.certificate = LocalityCertificate(graph.K)
        self._pending = []
        self._inboxes = defaultdict(list)
        self.round = 0

    def send(self, msg: Message) -> None:
        if msg.kind not in KINDS:
            raise MessageError(f"unknown message kind {msg.kind!r}")
        for block in msg.payload:
            if np.shape(block) != (self.r,):
                raise MessageError(f"payload block has shape {np.shape(block)}, expected ({self.r},)")
        ok = self.graph.has_edge(msg.sender, msg.receiver)
        self.certificate.records.append((msg.round, msg.sender, msg.receiver, msg.kind, msg.blocks))
        if not ok:
            self.certificate.violations.append((msg.round, msg.sender, msg.receiver, msg.kind))
            raise LocalityViolation(f"node {msg.sender} sent to non-neighbour {msg.receiver}")
        self._pending.append(msg)

    def barrier(self) -> None:
        for msg in self._pending:
            self._inboxes[msg.receiver].append(msg)
        self._pending = []

    def receive(self, node: int):
        msgs, self._inboxes[node] = self._inboxes[node], []
        for msg in msgs:
            if not self.graph.has_edge(msg.sender, node):
                self.certificate.violations.append((msg.round, msg.sender, node, msg.kind))
                raise LocalityViolation(f"node {node} read a message from non-neighbour {msg.sender}")
        return msgs


def edge_ownership(graph: Graph) -> dict:
    """Each edge ``(i, j)`` is owned by its lower-index endpoint ``i``."""
    return {e: e[0] for e in graph.edges}


class NodeActor:
    """One node: private data, own multiplier, owned edge variables, inbox access.

    ``incident`` lists ``(edge index, neighbour label, owner?)`` in ascending
    edge order; labels are 1-based.
    """

    def __init__(self, label: int, G: np.ndarray, graph: Graph, net: VirtualNetwork):
        self.label = label
        self.G = G
        self.net = net
        r = G.shape[1]
        self.r = r
        self.lam = np.zeros(r)
        self.incident = [(l, j if i == label else i, i == label)
                         for l, (i, j) in enumerate(graph.edges) if label in (i, j)]
        self.neighbor_set = frozenset(nb for _, nb, _ in self.incident)
        # edge variables indexed by edge number
        self.c = {l: np.zeros(r) for l, _, _ in self.incident}
        self.v = {l: np.zeros(r) for l, _, _ in self.incident}
        self.z = {l: np.zeros(r) for l, _, own in self.incident if own}
        self.t = {l: np.zeros(r) for l, _, own in self.incident if own}
        self.nb_lam = {nb: np.zeros(r) for nb in self.neighbor_set}
        self.inner = 0

    def send(self, to, kind, edge, *blocks):
        if to not in self.neighbor_set:
            self.net.certificate.violations.append((self.net.round, self.label, to, kind))
            raise LocalityViolation(f"node {self.label} has no edge to {to}")
        self.net.send(Message(self.label, to, self.net.round, kind, edge, tuple(blocks)))

    def inbox(self):
        return self.net.receive(self.label)

    # -- PCM phases ---------------------------------------------------------
    def pcm_share(self):
        for l, nb, own in self.incident:
            if not own:
                self.send(nb, "LambdaShare", l, self.lam)
                self.send(nb, "DualShare", l, self.v[l])

    def pcm_copies(self, rho, eta):
        got = defaultdict(dict)
        for msg in self.inbox():
            got[msg.edge][msg.kind] = msg
        owned = [(l, nb) for l, nb, own in self.incident if own]
        if not owned:
            return
        lam_r = np.array([got[l]["LambdaShare"].payload[0] for l, _ in owned])
        v_r = np.array([got[l]["DualShare"].payload[0] for l, _ in owned])
        lam_l = np.array([self.lam for _ in owned])
        v_l = np.array([self.v[l] for l, _ in owned])
        c_l, c_r = kernels.pcm_edges(lam_l, lam_r, v_l, v_r, rho, eta)
        for q, (l, nb) in enumerate(owned):
            self.c[l] = c_l[q]
            self.send(nb, "EdgeVarShare", l, c_r[q])

    def pcm_solve(self, rho, eps, config):
        for msg in self.inbox():
            self.c[msg.edge] = msg.payload[0]
        self.v_prev = dict(self.v)
        ls = [l for l, _, _ in self.incident]
        self.lam, self.inner = pcm_node_update(
            self.G, self.lam, [self.v[l] for l in ls], [self.c[l] for l in ls],
            rho, eps, config.inner_tol, config.inner_max_iter)

    def pcm_dual(self, rho):
        for l, _, _ in self.incident:
            self.v[l] = self.v[l] + rho * (self.lam - self.c[l])

    # -- MAOM phases --------------------------------------------------------
    def maom_edges(self, rho, eta):
        owned = [(l, nb) for l, nb, own in self.incident if own]
        if not owned:
            return
        lam_l = np.array([self.lam for _ in owned])
        lam_r = np.array([self.nb_lam[nb] for _, nb in owned])
        T = np.array([self.t[l] for l, _ in owned])
        Z = kernels.maom_edges(lam_l, lam_r, T, rho, eta)
        for q, (l, nb) in enumerate(owned):
            self.z[l] = Z[q]
            self.send(nb, "EdgeVarShare", l, Z[q], self.t[l])

    def maom_solve(self, rho, eps):
        recv = {msg.edge: msg.payload for msg in self.inbox()}
        terms = []
        for l, nb, own in self.incident:
            if own:
                terms.append(rho * self.z[l] - self.t[l])
            else:
                z, t = recv[l]
                terms.append(-(rho * z - t))
        self.lam = maom_node_update(self.G, self.lam, [self.nb_lam[nb] for _, nb, _ in self.incident],
                                    terms, rho, eps)

    def maom_broadcast(self):
        for l, nb, _ in self.incident:
            self.send(nb, "LambdaShare", l, self.lam)

    def maom_dual(self, rho):
        for msg in self.inbox():
            self.nb_lam[msg.sender] = msg.payload[0]
        for l, nb, own in self.incident:
            if own:
                self.t[l] = self.t[l] + rho * (self.lam - self.nb_lam[nb] - self.z[l])


def _assemble_pcm(actors, graph, r):
    M = graph.M
    C = np.zeros((2 * M, r))
    V = np.zeros((2 * M, r))
    V_prev = np.zeros((2 * M, r))
    for a in actors:
        for l, _, own in a.incident:
            row = l if own else M + l
            C[row] = a.c[l]
            V[row] = a.v[l]
            V_prev[row] = a.v_prev[l]
    return C, V, V_prev


def _assemble_maom(actors, graph, r):
    Z = np.zeros((graph.M, r))
    T = np.zeros((graph.M, r))
    for a in actors:
        for l in a.z:
            Z[l] = a.z[l]
            T[l] = a.t[l]
    return Z, T


def run_decentralized(algorithm: str, graph: Graph, node_data, ef, theta,
                      config: SolverConfig | None = None, use_spanning_tree: bool = False):
    """Run PCM or MAOM as message-passing node actors.

    Returns ``(state, report, certificate)`` where ``state`` is a ``PCMState`` or
    ``MAOMState`` matching the monolithic runner's, ``report.messages`` holds
    traffic totals and ``certificate`` is the ``LocalityCertificate``.
    """
    blocks = [np.ascontiguousarray(b, dtype=float) for b in moment_blocks(node_data, ef, theta)]
    return run_decentralized_blocks(algorithm, graph, blocks, config, use_spanning_tree)


def run_decentralized_blocks(algorithm, graph, blocks, config=None, use_spanning_tree=False):
    if algorithm not in ("pcm", "maom"):
        raise ValueError(f"algorithm must be 'pcm' or 'maom', got {algorithm!r}")
    config = SolverConfig() if config is None else config
    blocks = [np.ascontiguousarray(b, dtype=float) for b in blocks]
    if len(blocks) != graph.K:
        raise ValueError(f"got {len(blocks)} data blocks for a graph with K={graph.K}")
    r = blocks[0].shape[1]
    if any(b.ndim != 2 or b.shape[1] != r for b in blocks):
        raise ValueError("all moment blocks must be 2-D with the same number of columns")
    if algorithm == "maom" and use_spanning_tree:
        graph = spanning_tree(graph)
    _, N, n = node_sizes(blocks)
    res = config.resolve(graph.K, n, N)
    rho, eta, eps = res.rho, res.eta, res.log_eps
    net = VirtualNetwork(graph, r)
    actors = [NodeActor(k + 1, blocks[k], graph, net) for k in range(graph.K)]
    report = RunReport(algorithm, rho=rho, eta=eta)
    Lam = np.zeros((graph.K, r))
    start = time.perf_counter()

    if algorithm == "pcm":
        observer = PCMObserver(graph, blocks, config, res)
        state = PCMState(Lam, np.zeros((2 * graph.M, r)), np.zeros((2 * graph.M, r)))
    else:
        observer = MAOMObserver(graph, blocks, config, res)
        state = MAOMState(Lam, np.zeros((graph.M, r)), np.zeros((graph.M, r)))

    for t in range(config.max_iter):
        net.round = t + 1
        sent_before = len(net.certificate.records)
        tick = time.perf_counter()
        if algorithm == "pcm":
            for a in actors:
                a.pcm_share()
            net.barrier()
            for a in actors:
                a.pcm_copies(rho, eta)
            net.barrier()
            for a in actors:
                a.pcm_solve(rho, eps, config)
            for a in actors:
                a.pcm_dual(rho)
            report.inner_iterations.append(sum(a.inner for a in actors))
        else:
            for a in actors:
                a.maom_edges(rho, eta)
            net.barrier()
            for a in actors:
                a.maom_solve(rho, eps)
            for a in actors:
                a.maom_broadcast()
            net.barrier()
            for a in actors:
                a.maom_dual(rho)
        report.iter_time.append(time.perf_counter() - tick)

        # observer: assemble global arrays for the stopping test only
        Lam = np.array([a.lam for a in actors])
        if algorithm == "pcm":
            C, V, V_prev = _assemble_pcm(actors, graph, r)
            done, rn, sn = observer.check(report, Lam, state.C, C, V_prev, V)
            state = PCMState(Lam, C, V, t + 1, rn, sn, done)
        else:
            Z, T = _assemble_maom(actors, graph, r)
            done, rn, sn = observer.check(report, state.Lam, Lam, state.Z, Z, state.T, T)
            state = MAOMState(Lam, Z, T, t + 1, rn, sn, done)
        if t == 0:
            recs = net.certificate.records[sent_before:]
            report.messages["per_iteration_messages"] = len(recs)
            report.messages["per_iteration_blocks"] = sum(rec[4] for rec in recs)
        if done:
            break

    report.iterations = state.t
    report.converged = state.converged
    report.wall_time = time.perf_counter() - start
    report.final_statistic = el_statistic(state.Lam, blocks, eps)
    report.messages["total_messages"] = len(net.certificate.records)
    report.messages["total_blocks"] = sum(rec[4] for rec in net.certificate.records)
    return state, report, net.certificate
