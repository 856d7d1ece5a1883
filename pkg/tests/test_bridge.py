import threading

import pytest

from crossorch.bridge import (
    Bridge,
    FiberSwitchApplier,
    apply_fiber_switch,
    load_mapping,
    register_send_tool,
    rewire,
)
from crossorch.errors import QueueFull, UnknownGroup, UnmappedPort, ValidationError
from crossorch.otn import enumerate_paths
from crossorch.robot import FiberSwitched
from crossorch.tools import ToolRegistry, parse_action_script, run_action_script

from conftest import read_data


@pytest.fixture
def mapping():
    return load_mapping(read_data("demo_mapping.json"))


def make_bridge(*groups, cap=64):
    b = Bridge(queue_cap=cap)
    for g in groups:
        b.register_group(g)
    return b


def test_unknown_group():
    with pytest.raises(UnknownGroup):
        make_bridge("otn", "robot").send("otn", "5g", "hello")


def test_in_order_delivery():
    b = make_bridge("otn", "robot")
    assert b.send("otn", "robot", "first").seq == 1
    assert b.send("otn", "robot", "second").seq == 2
    assert [b.receive("robot").content, b.receive("robot").content] == ["first", "second"]
    assert b.receive("robot") is None


def test_seq_is_per_channel():
    b = make_bridge("otn", "robot")
    b.send("otn", "robot", "x")
    assert b.send("robot", "otn", "y", "result_report").seq == 1


def test_queue_full():
    b = make_bridge("robot", cap=2)
    b.send("otn", "robot", "1")
    b.send("otn", "robot", "2")
    with pytest.raises(QueueFull):
        b.send("otn", "robot", "3")
    assert len(b.log) == 2


def test_concurrent_senders_keep_seq_order():
    b = make_bridge("robot", cap=1000)

    def spam(i):
        for j in range(100):
            b.send("otn", "robot", f"{i}-{j}")

    threads = [threading.Thread(target=spam, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    seqs = [b.receive("robot").seq for _ in range(400)]
    assert seqs == list(range(1, 401))


def test_wait_idle():
    b = make_bridge("robot")
    b.send("otn", "robot", "x")
    assert not b.wait_idle(0.01)
    b.receive("robot")
    b.done()
    assert b.wait_idle(0.01)


def test_send_tool_uses_own_group_as_sender():
    b = make_bridge("otn", "robot")
    reg = register_send_tool(ToolRegistry(), b, "otn")
    res = run_action_script(parse_action_script('send_to_group("robot", "go")', reg), reg)
    assert res[0].value == {"seq": 1, "from": "otn", "to": "robot", "kind": "task_request"}
    assert b.receive("robot").from_group == "otn"


def test_demo_switch_rewires(demo_store, mapping):
    before = demo_store.topology
    version = apply_fiber_switch(FiberSwitched("f1", "A", "C"), mapping, demo_store)
    assert version == 1
    link = demo_store.topology.link("L23")
    assert (link.a, link.b) == ("N2", "N5")
    assert before.link("L23").b == "N3"


def test_unmapped_port_leaves_topology(demo_store, mapping):
    with pytest.raises(UnmappedPort):
        apply_fiber_switch(FiberSwitched("f2", "D", "B"), mapping, demo_store)
    assert demo_store.version == 0


def test_round_trip_restores_topology(demo_store, mapping):
    original = demo_store.topology
    apply_fiber_switch(FiberSwitched("f1", "A", "C"), mapping, demo_store)
    assert apply_fiber_switch(FiberSwitched("f1", "C", "A"), mapping, demo_store) == 2
    assert demo_store.topology == original


def test_stale_event_rejected(demo_topology, mapping):
    with pytest.raises(ValidationError):
        rewire(demo_topology, FiberSwitched("f1", "C", "A"), mapping)


def test_switch_changes_paths(demo_store, mapping):
    apply_fiber_switch(FiberSwitched("f1", "A", "C"), mapping, demo_store)
    paths = {p.label for p in enumerate_paths(demo_store.topology, "N1", "N4", 50)}
    assert "N1-N2-N5-N4" in paths and "N1-N2-N3-N4" not in paths


def test_applier_records_failures(demo_store, mapping):
    applier = FiberSwitchApplier(mapping, demo_store)
    applier(FiberSwitched("f2", "D", "B"))
    applier(FiberSwitched("f1", "A", "C"))
    assert [v for _, v in applier.applied] == [1]
    assert applier.failed[0][1].startswith("UnmappedPort")
