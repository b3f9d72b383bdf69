"""Package implementing the trace files, run configuration and reports"""
from .config import OUTPUT_ENV
from .config import AnalysisConfig
from .config import BaselineConfig
from .config import BudgetConfig
from .config import DataConfig
from .config import RunConfig
from .config import default_output
from .local import FORMAT_VERSION
from .local import MANIFEST
from .local import ROW_SUM_TOLERANCE
from .local import TraceManifest
from .local import read_corpus
from .local import read_manifest
from .local import read_trace
from .local import write_corpus
from .local import write_trace
from .reports import cost_frame
from .reports import read_json
from .reports import retained_frame
from .reports import write_csv
from .reports import write_json

export = [write_trace, read_trace, write_corpus, read_corpus, RunConfig]

__all__ = [
    "FORMAT_VERSION",
    "MANIFEST",
    "OUTPUT_ENV",
    "ROW_SUM_TOLERANCE",
    "AnalysisConfig",
    "BaselineConfig",
    "BudgetConfig",
    "DataConfig",
    "RunConfig",
    "TraceManifest",
    "cost_frame",
    "default_output",
    "read_corpus",
    "read_json",
    "read_manifest",
    "read_trace",
    "retained_frame",
    "write_corpus",
    "write_csv",
    "write_json",
    "write_trace"
]
