"""Tool Inertia Graph: learn tool-usage inertia from agent trajectories."""
from .errors import (AdapterError, ArgumentError, ConflictError, NotFoundError, ParseError, SchemaError,
                     ToolInertiaError, UnknownToolError)
from .graph import ParamSpec, ToolInertiaGraph, ToolSpec, export_graph, import_graph, infer_tool_specs
from .kernels import BACKEND
from .predictor import PredictionResult, PredictorConfig, gate_inertial_call, predict_next_tool
from .trajectory import Source, Status, ToolInvocation, Trajectory, TrajectoryLog, load_log

__version__ = "0.1.0"
