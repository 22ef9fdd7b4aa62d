import pytest

from allpairs.apps import CompositionVectorApp, ItemData, Stage
from allpairs.config import NodeShape, RunConfig
from allpairs.errors import DeadlockError, MalformedInput
from allpairs.rng import mix64
from allpairs.runner import run
from allpairs.simrun import SimEngine
from allpairs.slotcache import SlotState


def synthetic_config(n=16, *, mode="sim", nodes=1, device_slots=None, host_slots=None,
                     seed=1, costs=None, dist_cache=True, h=1, leaf_block=8,
                     job_limit=None, profiling=False, cpu_width=2, speeds=None,
                     storage_bandwidth=None):
    device_slots = device_slots if device_slots is not None else max(4, n)
    host_slots = host_slots if host_slots is not None else max(4, n)
    shapes = [
        NodeShape(device_speeds=list(speeds[k] if speeds else [1.0]),
                  device_slots=device_slots, host_slots=host_slots, cpu_width=cpu_width)
        for k in range(nodes)
    ]
    config = RunConfig(
        app={"kind": "synthetic", "n": n, "slot_size": 4096, "payload_bytes": 64,
             **({"costs": costs} if costs else {})},
        mode=mode, seed=seed, nodes=shapes, dist_cache=dist_cache, h=h,
        leaf_block=leaf_block, job_limit=job_limit, profiling=profiling,
    )
    if storage_bandwidth is not None:
        config.storage_bandwidth = storage_bandwidth
    return config


def write_corpus(tmp_path, count=16, seed=0):
    alphabet = "ACGT"
    for idx in range(count):
        state = mix64(seed, idx)
        chars = []
        for pos in range(120):
            state = mix64(state, pos)
            chars.append(alphabet[state % 4])
        (tmp_path / f"doc{idx:02d}.txt").write_text("".join(chars))
    return tmp_path


def sequential_reference(app):
    """Single-threaded oracle: run the pipeline per item, compare all pairs."""
    items = {}
    for key in range(app.n):
        raw = ItemData(Stage.RAW_FILE, app.fetch_raw(app.path_for_key(key)))
        items[key] = app.preprocess(key, app.parse(key, raw))
    matrix = {}
    for i in range(app.n):
        for j in range(i + 1, app.n):
            result = app.postprocess((i, j), app.compare((i, items[i]), (j, items[j])))
            matrix[(i, j)] = (result.value, result.match)
    return matrix


def matrix_of(metrics):
    return {pair: (res.value, res.match) for pair, res in metrics.results.items()}


class TestSingleNode:
    def test_perfect_reuse_counts(self):
        metrics = run(synthetic_config(n=64, device_slots=64, host_slots=64))
        assert sum(nm.comparisons for nm in metrics.per_node) == 2016
        assert metrics.total_loads == 64
        assert metrics.r_factor == 1.0
        assert metrics.per_node[0].load_counts == {k: 1 for k in range(64)}

    def test_single_item_run_exits_clean(self):
        metrics = run(synthetic_config(n=1))
        assert metrics.pairs == 0
        assert sum(nm.comparisons for nm in metrics.per_node) == 0
        assert metrics.total_loads == 0

    def test_two_items(self):
        metrics = run(synthetic_config(n=2))
        assert metrics.pairs == 1
        assert len(metrics.results) == 1

    def test_loads_only_on_remote_failure_or_single_node(self):
        metrics = run(synthetic_config(n=24, nodes=3, device_slots=8, host_slots=8))
        remote = metrics.remote_totals()
        assert metrics.total_loads == remote["failures"] + remote["timeouts"]

    def test_tight_device_tier_still_completes(self):
        # device tier of 2 slots with many in-flight jobs exercises the
        # all-pinned backoff path
        metrics = run(synthetic_config(n=12, device_slots=2, host_slots=12, job_limit=8))
        assert sum(nm.comparisons for nm in metrics.per_node) == 66
        assert len(metrics.results) == 66

    def test_cache_pressure_increases_loads(self):
        roomy = run(synthetic_config(n=32, device_slots=32, host_slots=32, seed=5))
        tight = run(synthetic_config(n=32, device_slots=8, host_slots=8, seed=5))
        assert roomy.total_loads == 32
        assert tight.total_loads > roomy.total_loads
        assert tight.r_factor > 1.0

    def test_io_accounting_identity(self):
        config = synthetic_config(n=24, nodes=2, device_slots=8, host_slots=10)
        config.app["file_bytes"] = 5000
        metrics = run(config)
        assert metrics.io_bytes == metrics.total_loads * 5000
        assert metrics.io_rate == pytest.approx(metrics.io_bytes / metrics.makespan)

    def test_capacity_in_bytes(self):
        from allpairs.simrun import SimEngine
        config = RunConfig(
            app={"kind": "synthetic", "n": 8, "slot_size": 1000, "payload_bytes": 64},
            nodes=[NodeShape.from_dict({"device_bytes": 4999, "host_bytes": 8000})],
        )
        config.validate()
        assert config.nodes[0].device_slots == 4  # floor(4999 / 1000)
        assert config.nodes[0].host_slots == 8
        engine = SimEngine(config, config.build_app())
        engine.run()
        assert engine.cores[0].devices[0].tier.capacity == 4


class TestLeaseHygieneAndWriteThrough:
    def test_run_leaves_tiers_quiescent(self):
        config = synthetic_config(n=24, nodes=2, device_slots=8, host_slots=12)
        engine = SimEngine(config, config.build_app())
        engine.run()
        for core in engine.cores:
            tiers = [core.host] + [dev.tier for dev in core.devices]
            for tier in tiers:
                for slot in tier.slots:
                    assert slot.readers == 0
                    assert slot.state is not SlotState.WRITE

    def test_device_keys_were_published_to_host(self):
        config = synthetic_config(n=24, nodes=2, device_slots=8, host_slots=12)
        engine = SimEngine(config, config.build_app())
        engine.run()
        for core in engine.cores:
            for dev in core.devices:
                for key in dev.tier.index:
                    assert key in core.host_published


class TestDeterminism:
    def test_identical_seeds_identical_traces(self):
        config = synthetic_config(n=20, nodes=2, device_slots=8, host_slots=10,
                                  profiling=True, seed=9)
        first = SimEngine(config, config.build_app())
        first.run()
        config2 = synthetic_config(n=20, nodes=2, device_slots=8, host_slots=10,
                                   profiling=True, seed=9)
        second = SimEngine(config2, config2.build_app())
        second.run()
        assert first.trace == second.trace
        assert first.now() == second.now()

    def test_different_seeds_change_schedule(self):
        outcomes = []
        for seed in (1, 2):
            config = synthetic_config(n=20, nodes=2, device_slots=6, host_slots=8,
                                      profiling=True, seed=seed,
                                      costs={"compare": [0.002, 0.001]})
            engine = SimEngine(config, config.build_app())
            engine.run()
            outcomes.append(tuple(engine.trace))
        assert outcomes[0] != outcomes[1]


class TestLaneExclusivity:
    @pytest.mark.parametrize("mode", ["sim", "real"])
    def test_no_overlap_per_lane(self, mode):
        config = synthetic_config(n=12, mode=mode, device_slots=6, host_slots=12,
                                  profiling=True,
                                  costs={"parse": [0.002, 0.001], "compare": [0.001, 0.0005]})
        if mode == "sim":
            engine = SimEngine(config, config.build_app())
            engine.run()
            trace = engine.trace
        else:
            from allpairs.realrun import RealEngine
            engine = RealEngine(config, config.build_app())
            engine.run()
            trace = engine.trace
        assert trace, "profiling should record events"
        lanes = {}
        for event in trace:
            lanes.setdefault((event.node, event.lane), []).append(event)
        for events in lanes.values():
            events.sort(key=lambda e: e.start_ns)
            for prev, cur in zip(events, events[1:]):
                assert prev.end_ns <= cur.start_ns


class TestDualMode:
    def test_counts_and_results_match_across_modes(self):
        sim = run(synthetic_config(n=12, mode="sim", seed=4))
        real = run(synthetic_config(n=12, mode="real", seed=4))
        assert matrix_of(sim) == matrix_of(real)
        assert sim.total_loads == real.total_loads == 12
        assert sim.per_node[0].load_counts == real.per_node[0].load_counts


class TestCompositionVectorRuns:
    def test_matrix_matches_sequential_reference(self, tmp_path):
        corpus = write_corpus(tmp_path, count=8)
        app_spec = {"kind": "cv", "corpus_dir": str(corpus), "k": 3, "slot_size": 1 << 16}
        reference = sequential_reference(
            CompositionVectorApp(str(corpus), k=3, slot_size=1 << 16))
        config = RunConfig(app=app_spec, mode="sim",
                           nodes=[NodeShape(device_slots=8, host_slots=8, cpu_width=2)])
        metrics = run(config)
        got = matrix_of(metrics)
        assert got.keys() == reference.keys()
        for pair, (value, match) in reference.items():
            assert got[pair][0] == pytest.approx(value, abs=1e-9)
            assert got[pair][1] == match

    def test_malformed_input_aborts_run(self, tmp_path):
        (tmp_path / "good.txt").write_text("ACGTACGTA")
        (tmp_path / "bad.txt").write_text("")
        config = RunConfig(app={"kind": "cv", "corpus_dir": str(tmp_path), "k": 3},
                           mode="sim",
                           nodes=[NodeShape(device_slots=4, host_slots=4, cpu_width=1)])
        with pytest.raises(MalformedInput):
            run(config)


class TestDeadlockDetection:
    def test_empty_event_queue_raises(self):
        config = synthetic_config(n=4)
        engine = SimEngine(config, config.build_app())
        engine.cores[0].boot = lambda: None  # nothing will ever happen
        with pytest.raises(DeadlockError, match="event queue empty"):
            engine.run()

    def test_stalled_clock_raises(self):
        config = synthetic_config(n=4)
        engine = SimEngine(config, config.build_app())
        engine.cores[0].boot = lambda: None
        engine.schedule(2000.0, lambda: None)
        with pytest.raises(DeadlockError, match="no stage completed"):
            engine.run()


class TestSimTimingModel:
    def test_makespan_at_least_device_busy_time(self):
        costs = {"preprocess": [0.010, 0.0], "compare": [0.002, 0.0],
                 "parse": [0.001, 0.0]}
        config = synthetic_config(n=24, costs=costs)
        metrics = run(config)
        expected_device = 24 * 0.010 + metrics.pairs * 0.002
        assert metrics.makespan >= expected_device - 1e-9
        busy = metrics.per_node[0].lane_busy
        assert busy["gpu0"] == pytest.approx(expected_device, rel=1e-6)

    def test_two_lanes_first_completion_advances_clock(self):
        # a 2-device node runs preprocess stages concurrently: with capacity
        # for all items, device busy time splits across the two gpu lanes
        costs = {"preprocess": [0.010, 0.0], "compare": [0.001, 0.0]}
        config = synthetic_config(n=16, costs=costs, speeds=[[1.0, 1.0]])
        metrics = run(config)
        busy = metrics.per_node[0].lane_busy
        assert busy.get("gpu0", 0) > 0 and busy.get("gpu1", 0) > 0

    def test_heterogeneous_speed_scales_durations(self):
        costs = {"compare": [0.010, 0.0]}
        slow = run(synthetic_config(n=8, costs=costs, speeds=[[1.0]]))
        fast = run(synthetic_config(n=8, costs=costs, speeds=[[4.0]]))
        slow_busy = slow.per_node[0].lane_busy["gpu0"]
        fast_busy = fast.per_node[0].lane_busy["gpu0"]
        assert fast_busy == pytest.approx(slow_busy / 4.0, rel=1e-6)


class TestMultiNode:
    def test_all_pairs_complete_with_stealing(self):
        metrics = run(synthetic_config(n=48, nodes=4, device_slots=12, host_slots=16,
                                       costs={"compare": [0.002, 0.001]}, seed=11))
        assert sum(nm.comparisons for nm in metrics.per_node) == 48 * 47 // 2
        working = [nm for nm in metrics.per_node if nm.comparisons > 0]
        assert len(working) >= 2, "work should spread across nodes"
        assert len(metrics.results) == metrics.pairs

    def test_dist_cache_reduces_loads(self):
        kwargs = dict(n=40, nodes=4, device_slots=4, host_slots=6, seed=3)
        with_cache = run(synthetic_config(dist_cache=True, **kwargs))
        without = run(synthetic_config(dist_cache=False, **kwargs))
        assert with_cache.total_loads < without.total_loads

    def test_message_kinds_expected(self):
        metrics = run(synthetic_config(n=24, nodes=3, device_slots=8, host_slots=10))
        kinds = set(metrics.message_totals())
        assert "stop" in kinds
        assert "steal_request" in kinds and "steal_response" in kinds
        assert "completions" in kinds
