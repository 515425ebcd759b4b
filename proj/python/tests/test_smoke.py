import math

import pytest

import mmosim

SMALL = """
[workload]
O_num = 200
P_max = 120
lambda = 6
aoi_radius = 250
[manager]
epoch_steps = 30
[sam]
vs_count = 16
peer_count = 4
[run]
windows = 8
window_steps = 30
load_stride = 5
seed = 4
"""


def test_version():
    assert mmosim.__version__ == "0.1.0"


def test_player_count():
    assert mmosim.player_count(0.0, 200.0, 1000) == 0
    assert mmosim.player_count(100.0, 200.0, 1000) == 1000
    assert mmosim.player_count(50.0, 200.0, 1000) == 707


def test_two_disk_scene():
    covered, unmasked = mmosim.coverage((0.0, 0.0, 3.0), [(-5.0, 0.0, 2.5), (0.0, -5.0, 2.5)], 3)
    assert (covered, unmasked) == (5, 9)


def test_five_disk_scene():
    p = (0.0, 0.0, 4.0)
    n = [(-2.0, -1.0, 0.1), (0.0, 1.0, 0.1), (0.2, 0.2, 0.24), (1.0, 0.0, 0.1), (3.0, 0.0, 0.1)]
    assert mmosim.greedy_select(p, n, 3, 4) == [2, 0, 4]
    score = sorted(mmosim.score_select(p, n, 2, 4))
    assert mmosim.covered_tiles(p, n, score, 4) == 4
    subset, best = mmosim.brute_force_select(p, n, 2, 4)
    assert best == 5
    assert subset == [0, 2]


def test_greedy_bound():
    import random

    rng = random.Random(3)
    for _ in range(50):
        n = [(rng.uniform(-18, 18), rng.uniform(-18, 18), rng.uniform(3, 12)) for _ in range(rng.randint(1, 7))]
        d = rng.randint(1, 4)
        p = (0.0, 0.0, 10.0)
        got = mmosim.covered_tiles(p, n, mmosim.greedy_select(p, n, d, 16), 16)
        _, opt = mmosim.brute_force_select(p, n, d, 16)
        assert got >= (1 - 1 / math.e) * opt


def test_jc():
    server = [(1, 0.0, 0.0), (2, 5.0, 5.0)]
    assert mmosim.jc(server, server, 10.0) == 1.0
    assert mmosim.jc([], server, 10.0) == 0.0
    shifted = [(1, 1.0, 0.0), (2, 5.0, 5.0)]
    assert 0.0 < mmosim.jc(shifted, server, 10.0) < 1.0


def test_migration_model():
    assert [mmosim.slow_start_rounds(k * 1024) for k in (2, 4, 8, 16)] == [1, 2, 2, 3]
    times = mmosim.sample_migration_times(2048, 2000, seed=7)
    assert len(times) == 2000
    assert sum(t < 1.0 for t in times) / len(times) > 0.9
    assert mmosim.migration_time(16384, 0.1, 0.0) > mmosim.migration_time(2048, 0.1, 0.0)


def test_placement_sandwich():
    cloud = {"kind": "cloud", "capacity": 4e6, "bandwidth_cost": 0.12 / 1e9, "rent_cost": 0.26 / 60}
    peer = {"kind": "peer", "capacity": 1e6, "fail_prob": 0.01}
    loads = [2e5, 4e5, 1e5, 3e5]
    kw = dict(objects=[3, 5, 1, 2], risk_limit=0.6, fresh_cloud=cloud)
    opt = mmosim.optimal_assignment([cloud, peer], loads, **kw)
    greedy = mmosim.greedy_assignment([cloud, peer], loads, **kw)
    clouds = mmosim.greedy_assignment([cloud, peer], loads, allow_peers=False, **kw)
    assert opt["feasible"] and greedy["feasible"] and clouds["feasible"]
    assert opt["cost"] <= greedy["cost"] + 1e-12 <= clouds["cost"] + 2e-12


def test_run_is_deterministic():
    a = mmosim.run(SMALL)
    b = mmosim.run(SMALL)
    assert len(a["rows"]) == 8
    assert a["rows"] == b["rows"]
    assert a["config_hash"] == b["config_hash"]
    c = mmosim.run(SMALL, ["run.seed=5"])
    assert c["rows"] != a["rows"]


def test_presets_and_sweeps():
    names = [p[0] for p in mmosim.presets()]
    assert "thesis_workload" in names and "pam_bandwidth" in names
    assert "P_max" in mmosim.preset_text("thesis_workload")
    runs = mmosim.expand_sweeps(["a.b=1,2", "c.d=x,y,z"])
    assert len(runs) == 6


def test_config_errors():
    with pytest.raises(mmosim.ConfigError):
        mmosim.run(SMALL, ["workload.bogus=1"])
    with pytest.raises(mmosim.ConfigError):
        mmosim.run_preset("no_such_preset")
