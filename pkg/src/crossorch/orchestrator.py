"""Wire both chat groups, the bridge and the simulated domains, and run a request.

Each group gets a worker thread that drains its bridge inbox in order. A
task request starts a fresh chat; result reports are only collected. The run
ends once the bridge has no undelivered or unhandled messages left.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from .bridge import (
    Bridge,
    CrossDomainMessage,
    FiberSwitchApplier,
    PortBinding,
    check_mapping,
    load_mapping,
    register_send_tool,
)
from .errors import ConfigError, OrchestrationError
from .llm import Backend, HttpBackend, ScriptedBackend, load_script
from .otn.tools import register_otn_tools
from .otn.topology import TopologyStore
from .robot.sim import PanelConfig, RobotController, load_panel
from .robot.tools import register_robot_tools
from .runtime import (
    BACKEND_FAILURE,
    DEFAULT_MAX_TURNS,
    DEFAULT_RETRY_BUDGET,
    RETRY_EXHAUSTED,
    TURN_LIMIT,
    GroupChat,
    Message,
    Transcript,
    build_group,
    run_group_chat,
)
from .tools import ToolRegistry

logger = logging.getLogger(__name__)

OTN_GROUP = "otn"
ROBOT_GROUP = "robot"
ADMIN_SOURCE = "admin"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TURN_LIMIT = 3
EXIT_BACKEND = 4
EXIT_DOMAIN = 5

_EXIT_BY_KIND = {TURN_LIMIT: EXIT_TURN_LIMIT, BACKEND_FAILURE: EXIT_BACKEND,
                 RETRY_EXHAUSTED: EXIT_DOMAIN}

DEMO_REQUEST = (
    "Evaluate the GSNR of path1 N1-N2-N3-N4 and path2 N1-N6-N5-N4, determine the better path, "
    "and ask the robotic group to switch the fiber from port A to port C."
)


def data_path(name: str) -> Path:
    return Path(str(resources.files("crossorch") / "data" / name))


@dataclass
class RunConfig:
    topology_path: Path = field(default_factory=lambda: data_path("demo_topology.json"))
    panel_path: Path = field(default_factory=lambda: data_path("demo_panel.json"))
    mapping_path: Path = field(default_factory=lambda: data_path("demo_mapping.json"))
    script_path: Path | None = None
    llm_endpoint: str | None = None
    model: str | None = None
    request: str = DEMO_REQUEST
    transcript_out: Path | None = None
    max_turns: int = DEFAULT_MAX_TURNS
    retry_budget: int = DEFAULT_RETRY_BUDGET

    def __post_init__(self):
        if self.script_path is None and self.llm_endpoint is None:
            self.script_path = data_path("demo_script.json")


@dataclass
class Resources:
    store: TopologyStore
    panel: PanelConfig
    mapping: dict[str, PortBinding]
    backend: Backend
    llm_manager: bool


def _read(path: Path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path}: {exc.strerror or exc}") from None


def load_resources(config: RunConfig) -> Resources:
    """Load and cross-check every input before any chat starts."""
    if config.max_turns < 1 or config.retry_budget < 1:
        raise ConfigError("max_turns and retry_budget must be positive")
    if not config.request.strip():
        raise ConfigError("request is empty")
    if config.llm_endpoint and config.script_path:
        raise ConfigError("choose either a script or an LLM endpoint, not both")
    try:
        store = TopologyStore.from_document(_read(config.topology_path, "topology"))
        panel = load_panel(_read(config.panel_path, "panel"))
        mapping = load_mapping(_read(config.mapping_path, "mapping"))
        check_mapping(mapping, store.topology)
        for port in mapping:
            if port not in panel.panel.ports:
                raise ConfigError(f"mapping names port {port!r} that the panel does not have")
        if config.llm_endpoint:
            if not config.model:
                raise ConfigError("an LLM endpoint needs a model name")
            backend: Backend = HttpBackend(config.llm_endpoint, config.model)
            llm_manager = True
        else:
            backend = ScriptedBackend(load_script(_read(config.script_path, "script")))
            llm_manager = False
    except ConfigError:
        raise
    except OrchestrationError as exc:
        raise ConfigError(f"{exc.kind}: {exc}") from None
    return Resources(store, panel, mapping, backend, llm_manager)


@dataclass
class RunResult:
    transcripts: list[Transcript]
    reports: list[CrossDomainMessage]
    bridge_log: list[CrossDomainMessage]
    applied_switches: list
    failed_switches: list
    crashes: list[str]

    @property
    def messages(self) -> list[Message]:
        return [m for t in self.transcripts for m in t]

    @property
    def exit_code(self) -> int:
        for t in self.transcripts:
            kind = t[-1].error_kind
            if kind is not None:
                return _EXIT_BY_KIND.get(kind, EXIT_DOMAIN)
        if self.failed_switches or self.crashes:
            return EXIT_DOMAIN
        return EXIT_OK

    def transcript_for(self, group: str, chat: int = 1) -> Transcript:
        for t in self.transcripts:
            if t and t[0].group_id == group and t[0].chat == chat:
                return t
        raise KeyError((group, chat))


class Orchestrator:
    """Two chat groups linked through their executors."""

    def __init__(self, res: Resources, *, max_turns: int = DEFAULT_MAX_TURNS,
                 retry_budget: int = DEFAULT_RETRY_BUDGET,
                 on_message: Callable[[Message], None] | None = None):
        self.store = res.store
        self.robot = RobotController(res.panel)
        self.bridge = Bridge()
        self.applier = FiberSwitchApplier(res.mapping, self.store)
        self.robot.subscribe(self.applier)

        otn_tools = register_otn_tools(ToolRegistry(), self.store)
        robot_tools = register_robot_tools(ToolRegistry(), self.robot)
        self.groups: dict[str, GroupChat] = {}
        for name, registry in ((OTN_GROUP, otn_tools), (ROBOT_GROUP, robot_tools)):
            self.bridge.register_group(name)
            register_send_tool(registry, self.bridge, name)
            self.groups[name] = build_group(
                name, res.backend, registry, max_turns=max_turns, retry_budget=retry_budget,
                llm_manager=res.llm_manager, on_message=on_message)

        self._results: list[tuple[int, Transcript]] = []
        self._reports: list[CrossDomainMessage] = []
        self._crashes: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, config: RunConfig, on_message=None) -> "Orchestrator":
        return cls(load_resources(config), max_turns=config.max_turns,
                   retry_budget=config.retry_budget, on_message=on_message)

    def _handle(self, name: str, msg: CrossDomainMessage) -> None:
        if msg.kind != "task_request":
            with self._lock:
                self._reports.append(msg)
            return
        origin = None if msg.from_group == ADMIN_SOURCE else msg.from_group
        transcript = run_group_chat(self.groups[name], msg.content, origin=origin)
        with self._lock:
            self._results.append((list(self.groups).index(name), transcript))

    def _worker(self, name: str, stop: threading.Event) -> None:
        while not stop.is_set():
            msg = self.bridge.receive(name, timeout=0.02)
            if msg is None:
                continue
            try:
                self._handle(name, msg)
            except Exception as exc:  # noqa: BLE001 - keep the run from hanging
                logger.exception("group %s crashed", name)
                with self._lock:
                    self._crashes.append(f"{name}: {type(exc).__name__}: {exc}")
            finally:
                self.bridge.done()

    def run(self, request: str, entry_group: str = OTN_GROUP, timeout: float | None = 120.0) -> RunResult:
        stop = threading.Event()
        workers = [threading.Thread(target=self._worker, args=(name, stop), name=f"group-{name}",
                                    daemon=True)
                   for name in self.groups]
        for w in workers:
            w.start()
        try:
            self.bridge.send(ADMIN_SOURCE, entry_group, request)
            if not self.bridge.wait_idle(timeout):
                self._crashes.append(f"run did not finish within {timeout} s")
        finally:
            stop.set()
            for w in workers:
                w.join()
        ordered = [t for _, t in sorted(self._results, key=lambda it: (it[0], it[1][0].chat))]
        return RunResult(ordered, list(self._reports), list(self.bridge.log),
                         list(self.applier.applied), list(self.applier.failed), list(self._crashes))
