"""Tools exposed to the robotic chat group.

plug/unplug approach the port automatically, so writer scripts can stay at
the level of "unplug A, plug C".
"""

from __future__ import annotations

from dataclasses import dataclass

from ..tools import Param, ToolRegistry, ToolSchema
from .sim import RobotController

LOCATE_PORT = ToolSchema(
    "locate_port", "Return the [x, y, z] position (m) of a patch-panel port.",
    (Param("port", "string"),))
MOVE_TO = ToolSchema(
    "move_to", "Move the gripper to a position inside the workspace (m).",
    (Param("x", "number"), Param("y", "number"), Param("z", "number")))
UNPLUG = ToolSchema(
    "unplug", "Unplug the fiber from a port and hold it in the gripper.",
    (Param("port", "string"),))
PLUG = ToolSchema(
    "plug", "Plug the held fiber into an empty port.",
    (Param("port", "string"),))


@dataclass(frozen=True)
class PortAction:
    verb: str
    port: str
    fiber: str

    def to_payload(self) -> dict:
        return {"action": self.verb, "port": self.port, "fiber": self.fiber}

    def describe(self) -> str:
        prep = "from" if self.verb == "unplug" else "into"
        return f"fiber {self.fiber} {self.verb}ged {prep} port {self.port}"


def register_robot_tools(registry: ToolRegistry, robot: RobotController) -> ToolRegistry:
    def _locate(port: str):
        return list(robot.run_one("locate_port", port))

    def _move(x: float, y: float, z: float):
        robot.run_one("move_to", (x, y, z))
        return [x, y, z]

    def _unplug(port: str):
        return PortAction("unplug", port, robot.run_one("unplug", port))

    def _plug(port: str):
        return PortAction("plug", port, robot.run_one("plug", port))

    registry.register(LOCATE_PORT, _locate)
    registry.register(MOVE_TO, _move)
    registry.register(UNPLUG, _unplug)
    registry.register(PLUG, _plug)
    return registry
