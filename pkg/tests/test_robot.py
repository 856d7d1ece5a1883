import pytest
from hypothesis import given, settings, strategies as st

from crossorch.errors import (
    HandsFull,
    NotAtPort,
    NotHoldingFiber,
    OutOfWorkspace,
    PortEmpty,
    PortOccupied,
    UnknownPort,
)
from crossorch.robot import (
    FiberSwitched,
    Gripper,
    RobotCommand,
    RobotController,
    execute_command_sequence,
    locate_port,
    move_to,
    plug,
    unplug,
)
from crossorch.robot.tools import register_robot_tools
from crossorch.robot.sim import load_panel
from crossorch.tools import ToolRegistry, parse_action_script, run_action_script

from conftest import read_data


def at(cfg, label):
    return move_to(cfg.initial_state(), locate_port(cfg.panel, label), cfg.workspace)


def test_locate_known_port(demo_panel):
    assert locate_port(demo_panel.panel, "A") == (0.4, 0.1, 0.3)
    with pytest.raises(UnknownPort):
        locate_port(demo_panel.panel, "Z")


def test_port_positions_distinct(demo_panel):
    positions = list(demo_panel.panel.positions.values())
    assert len(set(positions)) == len(positions)


def test_move_inside_and_outside(demo_panel):
    s0 = demo_panel.initial_state()
    s1 = move_to(s0, (0.1, 0.2, 0.3), demo_panel.workspace)
    assert s1.location == (0.1, 0.2, 0.3)
    with pytest.raises(OutOfWorkspace):
        move_to(s0, (2.0, 0.0, 0.0), demo_panel.workspace)
    assert s0.location == demo_panel.home


def test_moves_compose(demo_panel):
    targets = [(0.1, 0.1, 0.1), (0.5, -0.2, 0.7), (0.3, 0.3, 0.3)]
    cmds = [RobotCommand("move_to", t) for t in targets]
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel, cmds, demo_panel.workspace)
    assert out.ok and out.state.location == targets[-1]


def test_unplug_cases(demo_panel):
    state, panel = unplug(at(demo_panel, "A"), demo_panel.panel, "A")
    assert state.holding == "f1" and state.gripper is Gripper.CLOSED
    assert panel.ports["A"] is None
    with pytest.raises(PortEmpty):
        unplug(at(demo_panel, "B"), demo_panel.panel, "B")
    with pytest.raises(HandsFull):
        unplug(move_to(state, locate_port(panel, "D"), demo_panel.workspace), panel, "D")
    with pytest.raises(NotAtPort):
        unplug(demo_panel.initial_state(), demo_panel.panel, "A")


def test_plug_cases(demo_panel):
    state, panel = unplug(at(demo_panel, "A"), demo_panel.panel, "A")
    at_c = move_to(state, locate_port(panel, "C"), demo_panel.workspace)
    state2, panel2 = plug(at_c, panel, "C")
    assert panel2.ports["C"] == "f1" and state2.holding is None
    at_d = move_to(state, locate_port(panel, "D"), demo_panel.workspace)
    with pytest.raises(PortOccupied):
        plug(at_d, panel, "D")
    with pytest.raises(NotHoldingFiber):
        plug(at(demo_panel, "C"), demo_panel.panel, "C")


def test_tolerance_is_one_millimetre(demo_panel):
    x, y, z = locate_port(demo_panel.panel, "A")
    near = move_to(demo_panel.initial_state(), (x + 0.0009, y, z), demo_panel.workspace)
    far = move_to(demo_panel.initial_state(), (x + 0.0011, y, z), demo_panel.workspace)
    unplug(near, demo_panel.panel, "A")
    with pytest.raises(NotAtPort):
        unplug(far, demo_panel.panel, "A")


def test_switch_sequence_emits_event(demo_panel):
    cmds = [RobotCommand("unplug", "A"), RobotCommand("plug", "C")]
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel, cmds, demo_panel.workspace)
    assert out.ok
    assert out.panel.ports["A"] is None and out.panel.ports["C"] == "f1"
    assert out.events == [FiberSwitched("f1", "A", "C")]


def test_empty_sequence(demo_panel):
    s0 = demo_panel.initial_state()
    out = execute_command_sequence(s0, demo_panel.panel, [], demo_panel.workspace)
    assert out.state == s0 and out.panel == demo_panel.panel and out.results == []


def test_unplug_plug_same_port_is_identity(demo_panel):
    cmds = [RobotCommand("unplug", "A"), RobotCommand("plug", "A")]
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel, cmds, demo_panel.workspace)
    assert out.ok and out.panel == demo_panel.panel and out.events == []


def test_order_matters(demo_panel):
    cmds = [RobotCommand("plug", "C"), RobotCommand("unplug", "A")]
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel, cmds, demo_panel.workspace)
    assert [(r.ok, r.error_kind) for r in out.results] == [(False, "NotHoldingFiber")]
    assert out.panel == demo_panel.panel


def test_without_auto_approach(demo_panel):
    cmds = [RobotCommand("unplug", "A")]
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel, cmds,
                                   demo_panel.workspace, auto_approach=False)
    assert out.results[0].error_kind == "NotAtPort"


def test_controller_notifies_listeners(demo_panel):
    robot = RobotController(demo_panel)
    seen = []
    robot.subscribe(seen.append)
    robot.execute([RobotCommand("unplug", "A"), RobotCommand("plug", "C")])
    assert seen == [FiberSwitched("f1", "A", "C")]


def test_robot_tools(demo_panel):
    reg = register_robot_tools(ToolRegistry(), RobotController(demo_panel))
    ok = run_action_script(parse_action_script('unplug("A")\nplug("C")', reg), reg)
    assert [r.value for r in ok] == [{"action": "unplug", "port": "A", "fiber": "f1"},
                                     {"action": "plug", "port": "C", "fiber": "f1"}]
    bad = run_action_script(parse_action_script('unplug("B")', reg), reg)
    assert bad[0].error_kind == "PortEmpty"


_cmd = st.one_of(
    st.tuples(st.sampled_from(["unplug", "plug", "locate_port"]), st.sampled_from("ABCDZ")),
    st.tuples(st.just("move_to"), st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)),
)


@settings(max_examples=200, deadline=None)
@given(st.lists(_cmd, max_size=12))
def test_fibers_conserved(cmds):
    demo_panel = load_panel(read_data("demo_panel.json"))
    out = execute_command_sequence(demo_panel.initial_state(), demo_panel.panel,
                                   [RobotCommand(v, t) for v, t in cmds], demo_panel.workspace)
    held = [out.state.holding] if out.state.holding else []
    assert sorted(out.panel.fibers() + held) == ["f1", "f2"]
