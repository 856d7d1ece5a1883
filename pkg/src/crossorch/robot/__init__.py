"""Simulated robotic fiber-switching domain."""

from .sim import (
    FiberSwitched,
    Gripper,
    PanelConfig,
    PortPanel,
    RobotCommand,
    RobotController,
    RobotState,
    Workspace,
    execute_command_sequence,
    load_panel,
    locate_port,
    move_to,
    plug,
    unplug,
)

__all__ = [
    "FiberSwitched", "Gripper", "PanelConfig", "PortPanel", "RobotCommand", "RobotController",
    "RobotState", "Workspace", "execute_command_sequence", "load_panel", "locate_port", "move_to",
    "plug", "unplug",
]
