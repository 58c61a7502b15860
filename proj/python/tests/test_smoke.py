import pytest

import vmsim


def flat(name, pct, n=200):
    return vmsim.TimeSeries(name, 0, 3, [float(pct)] * n)


def config(**overrides):
    doc = {
        "schedule": "unused.json",
        "workloads": "unused",
        "initial_placement": "firstfit",
        "duration_s": 600,
        "servers": {"count": 4, "cpu_units": 100, "memory_mb": 16384},
    }
    doc.update(overrides)
    return doc


def schedule():
    return vmsim.build_schedule(
        id="smoke",
        rate=0.02,
        mean_lifetime_s=300,
        horizon_s=600,
        sizes=[(25, 2048, 0.5), (50, 4096, 0.5)],
        series_pool=["a", "b"],
        seed=3,
    )


def test_series_codec_round_trip():
    s = vmsim.TimeSeries("cpu", 12, 3, [0.0, 12.5, 100.0])
    blob = vmsim.encode_series(s)
    assert blob[:4] == b"TSB1"
    assert vmsim.decode_series(blob) == s


def test_bad_blob_raises_with_code():
    with pytest.raises(vmsim.VmsimError) as info:
        vmsim.decode_series(b"nope")
    assert info.value.args[0] == "BadMagic"


def test_sample_and_estimate():
    s = vmsim.TimeSeries("cpu", 0, 3, [10.0, 20.0, 50.0])
    assert vmsim.sample_at(s, 4) == 20.0
    assert vmsim.sample_at(s, 999) == 50.0
    assert vmsim.estimate_demand(s, "max", 50) == pytest.approx(25.0)


def test_exact_beats_ffd():
    items = [(40, 1), (40, 1), (30, 1), (30, 1), (20, 1), (20, 1)]
    bins = [(90, 10)] * 6
    sol = vmsim.solve_min_servers_exact(items, bins)
    assert sol["bins_used"] == 2 and sol["optimal"]
    capped = vmsim.solve_min_servers_exact(items, bins, max_nodes=1)
    assert capped["bins_used"] == 3 and not capped["optimal"]


def test_place_initial():
    servers = [vmsim.ServerSpec(f"s{i}", 100, 4096) for i in range(3)]
    vms = [("v1", 60.0, 1024), ("v2", 50.0, 1024), ("v3", 30.0, 1024)]
    assert vmsim.place_initial(vms, servers, "firstfit") == {"v1": "s0", "v2": "s1", "v3": "s0"}
    assert "ffd" in vmsim.registry_names("initial")


def test_schedule_is_deterministic_and_valid():
    a, b = schedule(), schedule()
    assert a == b
    assert a["entries"]
    assert vmsim.validate_schedule(a, ["a", "b"]) == []
    assert vmsim.validate_schedule(a, ["a"])


def test_simulate_in_memory():
    r = vmsim.simulate(config(), schedule(), [flat("a", 40), flat("b", 80)])
    assert r["status"] == "ok", r["message"]
    assert r["duration_s"] == 600
    assert r["avg_active_servers"] >= 1.0
    again = vmsim.simulate(config(), schedule(), [flat("a", 40), flat("b", 80)])
    r.pop("wall_ms"), again.pop("wall_ms")
    assert r == again


def test_simulate_reports_failure_as_status():
    r = vmsim.simulate(config(), schedule(), [flat("a", 40)])
    assert r["status"] == "failed"
    assert r["message"]


def test_config_errors_raise():
    with pytest.raises(vmsim.VmsimError):
        vmsim.normalize_config(config(duration_s=7))
    assert vmsim.normalize_config(config())["loop_interval_s"] == 3


def test_store_and_report(tmp_path):
    store = vmsim.FileStore(tmp_path / "store")
    store.put("w1", flat("w1", 30))
    assert store.list("w") == ["w1"]
    assert store.get("w1").samples[0] == 30.0

    matrix = vmsim.build_matrix(["firstfit", "ffd"], ["none"], ["none"], ["max"], [1, 2])
    assert [c["sim_id"] for c in matrix] == ["0000", "0001", "0002", "0003"]

    rows = [vmsim.CSV_HEADER]
    for c in matrix:
        r = vmsim.simulate(config(initial_placement=c["initial"], seed=c["seed"]), schedule(),
                           [flat("a", 40), flat("b", 80)])
        rows.append(",".join(str(r[k]) for k in vmsim.CSV_HEADER.split(",")))
    text = "\n".join(rows) + "\n"
    groups = vmsim.aggregate(text)
    assert sum(g["n"] for g in groups) == 4
    assert "<svg" in vmsim.render_report(text, "html", True)
