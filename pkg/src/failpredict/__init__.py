"""Log-driven failure prediction for deployed network elements."""

from .engine import Engine, EnginePolicy, PredictionReport, Strictness, Verdict, prune_candidates
from .graph import build_dag, build_hop_matrix, failure_probability, has_edge
from .model import EventFailureMatrix, EventMask, load_model, row_mask, validate_matrix
from .parser import EventRecord, WindowConfig, compile_rules, parse_line, parse_window, serialize

__version__ = "0.1.0"
