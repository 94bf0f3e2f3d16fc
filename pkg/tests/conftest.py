"""Shared network fixtures: the four case-study networks plus an M/M/1."""
import pytest

from qnstab import NetworkSpec, StationPolicy


@pytest.fixture
def mm1():
    """Single FCFS station, one class, theta=1, beta=2 (rho = 0.5)."""
    return NetworkSpec(
        station_count=1,
        class_count=1,
        station_of=(0,),
        arrival_rates=(1.0,),
        service_rates=(2.0,),
        routing=((0.0,),),
        station_policies=(StationPolicy.fcfs(),),
    )


@pytest.fixture
def jackson2():
    """Two-node open network: node 0 feeds node 1 with probability 0.2.

    One class per station, so the product-form oracle applies.  With
    theta = (1, 0.8) the effective rates are lambda = (1, 1) and the
    traffic rates are (0.5, 0.625).
    """
    return NetworkSpec(
        station_count=2,
        class_count=2,
        station_of=(0, 1),
        arrival_rates=(1.0, 0.8),
        service_rates=(2.0, 1.6),
        routing=((0.0, 0.2), (0.0, 0.0)),
        station_policies=(StationPolicy.fcfs(), StationPolicy.fcfs()),
    )


_CHAIN4 = (
    (0.0, 1.0, 0.0, 0.0),
    (0.0, 0.0, 1.0, 0.0),
    (0.0, 0.0, 0.0, 1.0),
    (0.0, 0.0, 0.0, 0.0),
)


@pytest.fixture
def lu_kumar():
    """Reentrant line 0->1->2->3->out over two stations.

    Station 0 serves visits {0, 3} with priority to the later visit 3;
    station 1 serves visits {1, 2} with priority to the earlier visit 1.
    Non-preemptive priorities; the configuration whose stability region
    is strictly smaller than its subcriticality region.
    """
    return NetworkSpec(
        station_count=2,
        class_count=4,
        station_of=(0, 1, 1, 0),
        arrival_rates=(1.0, 0.0, 0.0, 0.0),
        service_rates=(2.0, 1.25, 8.0, 2.5),
        routing=_CHAIN4,
        station_policies=(StationPolicy.sbp((3, 0)), StationPolicy.sbp((1, 2))),
    )


@pytest.fixture
def kelly():
    """Same topology and priorities, but per-station service rates."""
    return NetworkSpec(
        station_count=2,
        class_count=4,
        station_of=(0, 1, 1, 0),
        arrival_rates=(1.0, 0.0, 0.0, 0.0),
        service_rates=(1.6, 1.2, 1.2, 1.6),
        routing=_CHAIN4,
        station_policies=(StationPolicy.sbp((3, 0)), StationPolicy.sbp((1, 2))),
    )


@pytest.fixture
def bramson_dai():
    """Six-visit FCFS reentrant line over two stations.

    Mean service times (0.001, 0.897, 0.001, 0.001, 0.001, 0.899): both
    stations carry traffic rate 0.9 at theta=1, yet the line is unstable
    well below the subcritical threshold 1.1111.
    """
    means = (0.001, 0.897, 0.001, 0.001, 0.001, 0.899)
    chain = tuple(
        tuple(1.0 if l == k + 1 else 0.0 for l in range(6)) for k in range(6)
    )
    return NetworkSpec(
        station_count=2,
        class_count=6,
        station_of=(0, 1, 1, 1, 1, 0),
        arrival_rates=(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        service_rates=tuple(1.0 / m for m in means),
        routing=chain,
        station_policies=(StationPolicy.fcfs(), StationPolicy.fcfs()),
    )
