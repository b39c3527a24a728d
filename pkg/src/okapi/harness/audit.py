"""Divergence audit for runs in which one data center is cut off for good."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class DivergenceReport:
    failed_dc: int
    partition_at: int
    # healthy dc -> failed-DC-origin version ids it ever made visible
    visible: dict = field(default_factory=dict)
    # (a, b) -> versions visible at a but never at b
    differences: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return any(self.differences.values())

    def text(self) -> str:
        lines = [f"failed dc {self.failed_dc} cut at {self.partition_at} us"]
        for dc, vids in sorted(self.visible.items()):
            lines.append(f"  dc {dc}: {len(vids)} versions from dc {self.failed_dc} visible")
        for (a, b), diff in sorted(self.differences.items()):
            lines.append(f"  visible at {a} but not at {b}: {len(diff)}")
        lines.append("diverged" if self.diverged else "no divergence")
        return "\n".join(lines)


def availability_audit(trace, failed_dc: int) -> DivergenceReport:
    """Compare which versions from ``failed_dc`` each healthy data center made
    visible. Visibility is permanent, so a version that became visible before
    the cut is still visible after it."""
    meta = trace.meta
    m = meta.get("m")
    if m is None:
        dcs = {v[1] for v in trace.versions} | {v[1] for v in trace.visibility}
        m = max(dcs, default=failed_dc) + 1
    part = meta.get("partition") or {}
    at = part.get("at_us", 0) if part.get("dc") == failed_dc else 0
    origin = {tuple(vid): dc for _, dc, _, vid, _ in trace.versions}
    healthy = [d for d in range(m) if d != failed_dc]
    rep = DivergenceReport(failed_dc, at, {d: set() for d in healthy})
    for _, dc, vid in trace.visibility:
        vid = tuple(vid)
        if dc in rep.visible and origin.get(vid, vid[2]) == failed_dc:
            rep.visible[dc].add(vid)
    for a in healthy:
        for b in healthy:
            if a != b:
                rep.differences[(a, b)] = sorted(rep.visible[a] - rep.visible[b])
    return rep
