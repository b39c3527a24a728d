"""Build a simulated deployment from a config, run it, collect results."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from ..baselines import CureDataCenter, CureServer, GentleRainDataCenter, GentleRainServer
from ..client import CureClient, GentleRainClient, OkapiClient
from ..recorder import Recorder
from ..server import OkapiDataCenter, OkapiServer
from ..simnet import INF, Simulator, Topology
from .config import ClockSpec, ConfigError, ExperimentConfig, PartitionSpec
from .metrics import MetricsReport
from .trace import HistoryTrace
from .workload import ClientWorkload, WorkloadSpec

PROTOCOL_CLASSES = {
    "okapi": (OkapiServer, OkapiDataCenter, OkapiClient),
    "gentlerain": (GentleRainServer, GentleRainDataCenter, GentleRainClient),
    "cure": (CureServer, CureDataCenter, CureClient),
}


@dataclass
class Cluster:
    config: ExperimentConfig
    sim: Simulator
    recorder: Recorder
    trace: Optional[HistoryTrace]
    servers: list = field(default_factory=list)  # servers[dc][partition]
    datacenters: list = field(default_factory=list)
    clients: list = field(default_factory=list)

    def server(self, dc: int, partition: int):
        return self.servers[dc][partition]

    def all_servers(self):
        for row in self.servers:
            yield from row


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: MetricsReport
    trace: Optional[HistoryTrace]
    cluster: Cluster

    @property
    def log(self):
        return self.cluster.sim.log


def build_cluster(config: ExperimentConfig) -> Cluster:
    errs = config.validate()
    if errs:
        raise ConfigError(errs)
    topo = config.topology
    sim = Simulator(topo, seed=config.seed, log_level=config.log_level)
    trace = HistoryTrace() if config.keep_trace else None
    recorder = Recorder(trace)
    server_cls, dc_cls, client_cls = PROTOCOL_CLASSES[config.protocol]
    cluster = Cluster(config, sim, recorder, trace)

    for dc in range(topo.m):
        cluster.servers.append([server_cls(sim, dc, n, config.params, recorder) for n in range(topo.n)])
    for dc in range(topo.m):
        row = cluster.servers[dc]
        datacenter = dc_cls(sim, dc, row, config.params, recorder)
        cluster.datacenters.append(datacenter)
        ids = [s.id for s in row]
        for s in row:
            s.dc_servers = ids
            s.datacenter = datacenter
            s.replicas = {i: cluster.servers[i][s.partition].id for i in range(topo.m)}

    # clocks: a dedicated stream so that workload changes do not move skews
    crng = random.Random(f"clocks:{config.seed}")
    clocks = config.clocks
    for s in cluster.all_servers():
        off = crng.randint(-clocks.skew_us, clocks.skew_us) if clocks.skew_us else 0
        off = clocks.offsets.get(s.name, off)
        sim.set_skew(s.id, off)
        if clocks.drift_ppm:
            d = clocks.drift_ppm / 1e6
            sim.set_drift(s.id, 1.0 + crng.uniform(-d, d))

    spec = config.workload
    session = 0
    for dc in range(topo.m):
        for i in range(spec.clients_per_dc):
            home = cluster.servers[dc][i % topo.n].id
            wl = ClientWorkload(spec, topo.n, random.Random(f"client:{config.seed}:{session}"))
            c = client_cls(sim, dc, session, home, wl, recorder, trace,
                           think_us=spec.think_us, stop_at=config.horizon_us)
            cluster.clients.append(c)
            session += 1

    if config.partition is not None:
        p = config.partition
        sim.partition_dc(p.dc, p.at_us, INF if p.heal_us is None else p.heal_us)

    for s in cluster.all_servers():
        s.start()
    for d in cluster.datacenters:
        d.start()
    stagger = max(1, spec.think_us or 1000)
    for c in cluster.clients:
        c.start(sim.rng.randrange(stagger))
    return cluster


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    cluster = build_cluster(config)
    sim = cluster.sim
    if config.horizon_us > 0:
        sim.run(config.horizon_us + config.drain_us)
    trace = cluster.trace
    if trace is not None:
        trace.meta.update({
            "protocol": config.protocol,
            "seed": config.seed,
            "m": config.topology.m,
            "n": config.topology.n,
            "horizon_us": config.horizon_us,
            "end_us": sim.now,
            "complete": all(c.outstanding is None for c in cluster.clients),
            "outstanding": sum(c.outstanding is not None for c in cluster.clients),
            "held_messages": len(sim.held),
            "partition": None if config.partition is None else {
                "dc": config.partition.dc, "at_us": config.partition.at_us,
                "heal_us": config.partition.heal_us},
        })
        trace.ops.sort(key=lambda op: (op.session, op.index))
    report = MetricsReport.build(config.protocol, config.seed, config.horizon_us,
                                 cluster.recorder, sim, config.topology.m)
    return ExperimentResult(config, report, trace, cluster)


def visible_state(cluster: Cluster) -> list[dict]:
    """Per data center, the ``(ut, sr)`` a GET of every written key would
    return now. Equal entries across data centers mean LWW convergence."""
    keys = sorted({k for s in cluster.all_servers() for k in s.store.chains})
    out = []
    for row in cluster.servers:
        state = {}
        for key in keys:
            d = row[key % len(row)].visible_version(key)
            state[key] = None if d is None else (d.ut, d.sr)
        out.append(state)
    return out


# -- presets -------------------------------------------------------------------


def _base(**kw) -> ExperimentConfig:
    return ExperimentConfig(**kw)


def preset(name: str, protocol: str = "okapi", seed: int = 0) -> list[ExperimentConfig]:
    """Named experiment setups. Most return one config; sweeps return several."""
    if name == "default":
        return [_base(protocol=protocol, seed=seed)]
    if name == "fig4-desk":
        topo = Topology(n=8)
        out = []
        for p in (1, 2, 4, 8):
            out.append(_base(protocol=protocol, seed=seed, topology=topo, horizon_us=1_000_000,
                             clocks=ClockSpec(skew_us=5_000),
                             workload=WorkloadSpec(mode="tx-put", p=p, think_us=5_000)))
        return out
    if name == "fig5-desk":
        out = []
        for g in (1, 4, 16):
            out.append(_base(protocol=protocol, seed=seed, horizon_us=1_000_000,
                             clocks=ClockSpec(skew_us=5_000),
                             workload=WorkloadSpec(mode="get-put", g=g, think_us=5_000)))
        return out
    if name == "fig6-visibility":
        topo = Topology(n=2)
        return [_base(protocol=protocol, seed=seed, topology=topo, horizon_us=2_000_000,
                      keep_trace=False,
                      workload=WorkloadSpec(mode="get-put", g=32, clients_per_dc=10, think_us=2_000))]
    if name == "availability":
        return [_base(protocol=protocol, seed=seed, horizon_us=1_000_000, drain_us=500_000,
                      partition=PartitionSpec(dc=2, at_us=500_000),
                      workload=WorkloadSpec(mode="get-put", g=1, think_us=5_000))]
    if name == "sweep":
        return [_base(protocol=protocol, seed=seed, horizon_us=600_000, drain_us=400_000,
                      clocks=ClockSpec(skew_us=50_000),
                      workload=WorkloadSpec(mode="mixed", think_us=10_000))]
    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


PRESETS = ("default", "fig4-desk", "fig5-desk", "fig6-visibility", "availability", "sweep")
