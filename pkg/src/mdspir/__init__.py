"""Private information retrieval from MDS array-coded distributed storage."""

from .analysis import capacity_mds, capacity_replicated, comparison_table, expected_download, msr_mbr_params
from .codes import EvenOddCode, MDSArrayCode, StackedRSCode, make_evenodd, make_stacked_rs
from .gf import GF, field
from .protocol import (
    QueryMatrix,
    Response,
    ServerQuery,
    SystemParams,
    answer,
    build_server_query,
    decode_file,
    derive_params,
    encode_system,
    response_length,
    sample_query_matrix,
)
from .storage import Cluster, SessionReport, ingest

__version__ = "0.1.0"

__all__ = [
    "GF",
    "field",
    "MDSArrayCode",
    "StackedRSCode",
    "EvenOddCode",
    "make_stacked_rs",
    "make_evenodd",
    "SystemParams",
    "QueryMatrix",
    "ServerQuery",
    "Response",
    "derive_params",
    "encode_system",
    "sample_query_matrix",
    "build_server_query",
    "answer",
    "response_length",
    "decode_file",
    "Cluster",
    "SessionReport",
    "ingest",
    "capacity_mds",
    "capacity_replicated",
    "expected_download",
    "msr_mbr_params",
    "comparison_table",
]
