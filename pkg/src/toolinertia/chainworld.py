"""ChainWorld: a small deterministic environment with planted tool-usage inertia.

Every tool has one dominant successor (the tools form a single cycle) that is
chosen with probability ``rho`` when a task's goal sequence is generated; the
remaining mass is spread over the other tools. Each goal step names the
object to act on, and acting on it reveals the object for the next step, so
parameter values flow output -> input along the chain.

Executing the wrong tool, or the right tool on the wrong object, fails and
makes no progress.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .errors import ArgumentError
from .graph import ParamSpec, ToolSpec
from .params import EnvironmentAdapter, format_action, parse_action_text
from .trajectory import Status

VERBS = [
    "go_to", "look_around", "open", "pick_up", "focus_on", "inspect", "move", "pour",
    "heat", "wait", "use", "close", "mix", "read", "connect", "measure", "cool", "break",
    "fill", "weigh",
]
DESCRIPTIONS = {
    "go_to": "travel toward a location", "look_around": "survey surroundings",
    "open": "open a container or door", "pick_up": "grab an item into inventory",
    "focus_on": "signal attention on an item", "inspect": "examine an item closely",
    "move": "relocate an item", "pour": "pour liquid out of a vessel",
    "heat": "raise temperature of an item", "wait": "let time pass near an item",
    "use": "apply an item", "close": "shut a container or door",
    "mix": "stir contents together", "read": "read text written on an item",
    "connect": "attach wires between parts", "measure": "take a reading with an instrument",
    "cool": "lower temperature of an item", "break": "smash an item apart",
    "fill": "fill a vessel with liquid", "weigh": "place an item on a scale",
}
OBJECTS = [
    "beaker", "flask", "kettle", "stove", "sink", "lamp", "battery", "wire", "switch", "seed",
    "pot", "shovel", "apple", "orange", "banana", "jar", "cup", "thermometer", "scale", "book",
    "drawer", "cabinet", "fridge", "freezer", "door", "window", "table", "chair", "knife",
    "spoon", "bowl", "bottle", "bucket", "hose", "soil", "rock", "crystal", "magnet", "coin",
    "key", "box", "bag", "bell", "clock", "mirror", "lens", "candle", "match", "scroll", "pencil",
    "ruler", "sponge", "towel", "soap", "brush", "tray", "plate", "glass", "tube", "valve",
]
RECOVERY_ACTION = "check_valid_actions"
TARGET = "target"
FOUND = "found"


@dataclass(frozen=True)
class ChainWorldConfig:
    n_tools: int = 12
    rho: float = 0.887
    goal_length: int = 10
    n_start_tools: int = 3
    max_steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_tools < 3:
            raise ArgumentError("n_tools must be >= 3")
        if not 0.0 <= self.rho <= 1.0:
            raise ArgumentError("rho must lie in [0, 1]")
        if self.goal_length < 1 or self.goal_length + 1 > len(OBJECTS):
            raise ArgumentError(f"goal_length must lie in [1, {len(OBJECTS) - 1}]")
        if not 1 <= self.n_start_tools <= self.n_tools:
            raise ArgumentError("n_start_tools must lie in [1, n_tools]")

    @property
    def step_budget(self) -> int:
        return self.max_steps if self.max_steps is not None else 2 * self.goal_length + 6


@dataclass(frozen=True)
class StepResult:
    observation: str
    status: Status
    progress: float
    done: bool


class ChainWorld:
    recovery_action = RECOVERY_ACTION

    def __init__(self, config: ChainWorldConfig | None = None):
        self.config = config or ChainWorldConfig()
        n = self.config.n_tools
        self.tools = [VERBS[i] if i < len(VERBS) else f"tool_{i}" for i in range(n)]
        rng = random.Random(f"chainworld:{self.config.seed}")
        cycle = self.tools[:]
        rng.shuffle(cycle)
        self.dominant = {cycle[i]: cycle[(i + 1) % n] for i in range(n)}
        self.start_tools = sorted(rng.sample(self.tools, self.config.n_start_tools))
        self.task_id = None
        self.goal: list[str] = []
        self.objects: list[str] = []
        self.pos = 0
        self.actions = 0

    # -- task generation -------------------------------------------------

    def sample_task(self, task_id: int) -> tuple[list[str], list[str]]:
        rng = random.Random(f"chainworld:{self.config.seed}:task:{task_id}")
        seq = [rng.choice(self.start_tools)]
        while len(seq) < self.config.goal_length:
            prev = seq[-1]
            if rng.random() < self.config.rho:
                seq.append(self.dominant[prev])
            else:
                seq.append(rng.choice([t for t in self.tools if t not in (prev, self.dominant[prev])]))
        return seq, rng.sample(OBJECTS, self.config.goal_length + 1)

    def tool_specs(self) -> list[ToolSpec]:
        return [
            ToolSpec(
                t, DESCRIPTIONS.get(t, f"perform {t} on an item"),
                (ParamSpec(TARGET, "string", True, "object the action applies to"),),
                (ParamSpec(FOUND, "string", False, "object revealed by the action"),),
            )
            for t in self.tools
        ]

    @property
    def task_goal(self) -> str:
        return f"Carry out procedure {self.task_id} starting from the {self.objects[0]}."

    @property
    def progress(self) -> float:
        return self.pos / len(self.goal) if self.goal else 0.0

    def reset(self, task_id: int) -> str:
        self.task_id = task_id
        self.goal, self.objects = self.sample_task(task_id)
        self.pos = 0
        self.actions = 0
        return f"{self.task_goal} Start with the {self.objects[0]}."

    def expected_action(self) -> str:
        return format_action(self.goal[self.pos], {TARGET: self.objects[self.pos]})

    def valid_actions(self) -> list[str]:
        return list(self.tools)

    @property
    def done(self) -> bool:
        return self.pos >= len(self.goal) or self.actions >= self.config.step_budget

    def step(self, action_text: str) -> StepResult:
        if self.task_id is None:
            raise RuntimeError("reset() must be called before step()")
        self.actions += 1
        if action_text.strip() == RECOVERY_ACTION:
            obs = "Valid actions: " + ", ".join(f"{t}(target=...)" for t in self.valid_actions())
            return StepResult(obs, Status.SUCCESS, self.progress, self.done)
        parsed = parse_action_text(action_text)
        if parsed is None or parsed[0] not in self.dominant:
            return StepResult("Unknown action.", Status.FAILURE, self.progress, self.done)
        tool, inputs = parsed
        if self.pos < len(self.goal) and tool == self.goal[self.pos] and inputs == {TARGET: self.objects[self.pos]}:
            target, found = self.objects[self.pos], self.objects[self.pos + 1]
            self.pos += 1
            obs = f"You {tool.replace('_', ' ')} the {target}. You notice a {found}."
            return StepResult(obs, Status.SUCCESS, self.progress, self.done)
        return StepResult(f"Nothing happens: {tool} cannot be applied now.", Status.FAILURE,
                          self.progress, self.done)


_FOUND = re.compile(r"You notice an? ([^.]+)\.")
_START = re.compile(r"Start with the ([^.]+)\.")


class ChainWorldAdapter(EnvironmentAdapter):
    """Tracks the most recently revealed object as the environment's key state."""

    def __init__(self, debug: bool = False):
        super().__init__(debug)
        self.current: str | None = None

    def reset(self, init_observation=None):
        m = _START.search(init_observation or "")
        self.current = m.group(1) if m else None

    def parse_action(self, action_text, tool_descriptions):
        parsed = parse_action_text(action_text)
        if parsed is None:
            return None
        tool, inputs = parsed
        if tool_descriptions and tool not in tool_descriptions:
            return None
        return {"tool_name": tool, "inputs": inputs}

    def infer_output(self, tool_name, inputs, result):
        m = _FOUND.search(result or "")
        return {FOUND: m.group(1)} if m else {}

    def update_state(self, action_parsed, structured_outputs):
        if FOUND in structured_outputs:
            self.current = structured_outputs[FOUND]

    def get_contextual_params(self, action_type, missing_params, required_params_info):
        if TARGET in missing_params and self.current:
            return {TARGET: self.current}
        return {}

    def generate_action_from_params(self, action_type, params):
        return format_action(action_type, params)


@dataclass(frozen=True)
class OracleDecision:
    action_text: str
    tokens_in: int
    tokens_out: int


class ChainWorldOracle:
    """Scripted stand-in for the LLM: knows the goal, errs with probability ``noise``.

    Token counts model a prompt that grows with the episode history.
    """

    def __init__(self, env: ChainWorld, noise: float = 0.1, seed: int = 0,
                 prompt_tokens: int = 380, tokens_per_step: int = 42):
        if not 0.0 <= noise <= 1.0:
            raise ArgumentError("noise must lie in [0, 1]")
        self.env = env
        self.noise = noise
        self.seed = seed
        self.prompt_tokens = prompt_tokens
        self.tokens_per_step = tokens_per_step
        self._task = None
        self._rng = random.Random()

    def decide(self, observation, task_goal, history) -> OracleDecision:
        if self._task != self.env.task_id:
            self._task = self.env.task_id
            self._rng = random.Random(f"oracle:{self.seed}:{self._task}")
        rng = self._rng
        env = self.env
        action = env.expected_action()
        if rng.random() < self.noise:
            tool, target = env.goal[env.pos], env.objects[env.pos]
            if rng.random() < 0.5:
                tool = rng.choice([t for t in env.tools if t != tool])
            else:
                target = rng.choice([o for o in OBJECTS if o != target])
            action = format_action(tool, {TARGET: target})
        tokens_in = self.prompt_tokens + self.tokens_per_step * len(history)
        tokens_out = 24 + rng.randrange(12)
        return OracleDecision(action, tokens_in, tokens_out)
