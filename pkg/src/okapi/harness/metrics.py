"""Turn raw recorder data and message counters into a report.

Tables written by :meth:`MetricsReport.write`:

``summary.csv``      metric,value
``latency.csv``      kind,count,mean_us,p50_us,p99_us
``waits.csv``        kind,p,count,wait_prob,mean_wait_us,mean_wait_when_waiting_us
``messages.csv``     kind,count,bytes
``visibility.csv``   origin,dest,count,mean_us,p50_us,p90_us,p99_us
``visibility_samples.csv``  origin,dest,latency_us (one row per sample)
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .. import wire


def percentile(values, q: float) -> float:
    """Nearest-rank percentile; ``q`` in [0, 100]."""
    if not values:
        return math.nan
    xs = sorted(values)
    k = max(0, math.ceil(q / 100 * len(xs)) - 1)
    return float(xs[k])


def mean(values) -> float:
    return sum(values) / len(values) if values else math.nan


def wait_stats(waits) -> dict:
    n = len(waits)
    positive = [w for w in waits if w > 0]
    return {
        "count": n,
        "wait_prob": len(positive) / n if n else math.nan,
        "mean_wait_us": sum(waits) / n if n else math.nan,
        "mean_wait_when_waiting_us": mean(positive),
    }


@dataclass
class MetricsReport:
    protocol: str
    seed: int
    horizon_us: int
    ops: dict = field(default_factory=dict)
    waits: dict = field(default_factory=dict)
    tx_waits_by_p: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)
    visibility: dict = field(default_factory=dict)
    visibility_samples: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @classmethod
    def build(cls, protocol: str, seed: int, horizon_us: int, recorder, sim, m: int) -> "MetricsReport":
        rep = cls(protocol, seed, horizon_us)
        total_ops = 0
        for kind in sorted(recorder.latency):
            lat = recorder.latency[kind]
            total_ops += len(lat)
            rep.ops[kind] = {
                "count": len(lat),
                "mean_us": mean(lat),
                "p50_us": percentile(lat, 50),
                "p99_us": percentile(lat, 99),
            }
        rep.waits["put"] = wait_stats(recorder.put_waits)
        rep.waits["rotx"] = wait_stats([w for _, w in recorder.tx_waits])
        by_p = defaultdict(list)
        for p, w in recorder.tx_waits:
            by_p[p].append(w)
        rep.tx_waits_by_p = {p: wait_stats(ws) for p, ws in sorted(by_p.items())}
        rep.messages = {k: {"count": sim.msg_count[k], "bytes": sim.msg_bytes[k]}
                        for k in sorted(sim.msg_count)}
        for (o, d), xs in sorted(recorder.visibility.items()):
            rep.visibility_samples[(o, d)] = list(xs)
            rep.visibility[(o, d)] = {
                "count": len(xs),
                "mean_us": mean(xs),
                "p50_us": percentile(xs, 50),
                "p90_us": percentile(xs, 90),
                "p99_us": percentile(xs, 99),
            }
        repl = rep.messages.get(wire.REPLICATE, {"count": 0, "bytes": 0})
        stab = sum(rep.messages.get(k, {"bytes": 0})["bytes"] for k in wire.STABILIZATION_KINDS)
        seconds = horizon_us / 1e6
        rep.summary = {
            "completed_ops": total_ops,
            "throughput_ops_per_s": total_ops / seconds if seconds else 0.0,
            "replicated_updates": repl["count"],
            "replication_bytes": repl["bytes"],
            "bytes_per_replicated_update": repl["bytes"] / repl["count"] if repl["count"] else math.nan,
            "meta_bytes_per_replicated_update": wire.replicate_meta_bytes(protocol, m),
            "stabilization_bytes": stab,
            "stabilization_message_bytes": wire.exchange_bytes(protocol, m),
            "stabilization_payload_bytes": wire.exchange_payload_bytes(protocol, m),
            "gc_rounds": recorder.gc_rounds,
            "gc_removed": recorder.gc_removed,
            "hlc_overflows": recorder.hlc_overflows,
            "put_wait_prob": rep.waits["put"]["wait_prob"],
            "rotx_wait_prob": rep.waits["rotx"]["wait_prob"],
            "rotx_mean_wait_us": rep.waits["rotx"]["mean_wait_us"],
        }
        return rep

    def to_json(self) -> dict:
        def pairs(d):
            return {f"{o}->{t}": v for (o, t), v in d.items()}

        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "horizon_us": self.horizon_us,
            "summary": self.summary,
            "ops": self.ops,
            "waits": self.waits,
            "tx_waits_by_p": {str(p): v for p, v in self.tx_waits_by_p.items()},
            "messages": self.messages,
            "visibility": pairs(self.visibility),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def text(self) -> str:
        lines = [f"protocol {self.protocol}  seed {self.seed}  horizon {self.horizon_us} us"]
        for k, v in self.summary.items():
            lines.append(f"  {k:34s} {_fmt(v)}")
        for kind, st in self.ops.items():
            lines.append(f"  latency {kind:6s} n={st['count']:<7d} mean={_fmt(st['mean_us'])} us"
                         f" p99={_fmt(st['p99_us'])} us")
        for p, st in self.tx_waits_by_p.items():
            lines.append(f"  rotx p={p:<3d} wait_prob={_fmt(st['wait_prob'])}"
                         f" mean_wait={_fmt(st['mean_wait_us'])} us")
        for (o, d), st in self.visibility.items():
            lines.append(f"  visibility {o}->{d} n={st['count']:<6d} mean={_fmt(st['mean_us'])} us")
        return "\n".join(lines)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.dumps())
        (out / "report.txt").write_text(self.text() + "\n")
        _csv(out / "summary.csv", ["metric", "value"], self.summary.items())
        _csv(out / "latency.csv", ["kind", "count", "mean_us", "p50_us", "p99_us"],
             [(k, v["count"], v["mean_us"], v["p50_us"], v["p99_us"]) for k, v in self.ops.items()])
        rows = [(k, "", v["count"], v["wait_prob"], v["mean_wait_us"], v["mean_wait_when_waiting_us"])
                for k, v in self.waits.items()]
        rows += [("rotx", p, v["count"], v["wait_prob"], v["mean_wait_us"], v["mean_wait_when_waiting_us"])
                 for p, v in self.tx_waits_by_p.items()]
        _csv(out / "waits.csv",
             ["kind", "p", "count", "wait_prob", "mean_wait_us", "mean_wait_when_waiting_us"], rows)
        _csv(out / "messages.csv", ["kind", "count", "bytes"],
             [(k, v["count"], v["bytes"]) for k, v in self.messages.items()])
        _csv(out / "visibility.csv", ["origin", "dest", "count", "mean_us", "p50_us", "p90_us", "p99_us"],
             [(o, d, v["count"], v["mean_us"], v["p50_us"], v["p90_us"], v["p99_us"])
              for (o, d), v in self.visibility.items()])
        _csv(out / "visibility_samples.csv", ["origin", "dest", "latency_us"],
             [(o, d, x) for (o, d), xs in self.visibility_samples.items() for x in xs])



def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4g}"
    return str(v)


def _csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)
