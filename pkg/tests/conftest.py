import pytest

from okapi.harness.config import ClockSpec, ExperimentConfig
from okapi.harness.experiment import build_cluster
from okapi.harness.workload import WorkloadSpec
from okapi.server import ServerParams
from okapi.simnet import DEFAULT_EPOCH_US

# timers this far apart never fire inside a fixture scenario
QUIET = dict(heartbeat_us=10**9, gsv_us=10**9, usv_us=10**9, gc_us=10**9)


def make_cluster(protocol, clocks=None, n=2, **params):
    """A client-less deployment whose servers are driven by hand.

    ``clocks`` maps server names ("p0@dc0") to the value their clock reads
    at simulated time 0.
    """
    offsets = {name: v - DEFAULT_EPOCH_US for name, v in (clocks or {}).items()}
    cfg = ExperimentConfig(
        protocol=protocol,
        horizon_us=0,
        clocks=ClockSpec(offsets=offsets),
        params=ServerParams(**{**QUIET, **params}),
        workload=WorkloadSpec(clients_per_dc=0, p=1),
    )
    cfg.topology.n = n
    return build_cluster(cfg)


class Replies:
    """Collects ``respond(msg, nbytes)`` calls with their arrival time."""

    def __init__(self, sim):
        self.sim = sim
        self.got = []

    def __call__(self, msg, nbytes):
        self.got.append((self.sim.now, msg))


@pytest.fixture
def cluster_factory():
    return make_cluster


@pytest.fixture
def replies_for():
    return Replies


# one line per acceptance criterion, printed after the run
VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
