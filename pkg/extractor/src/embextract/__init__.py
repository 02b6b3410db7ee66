"""Pooler-output embedding extractor writing EMBF v1 files."""

from .embf import EmbfError, read_embf, write_embf
from .extract import CHECKPOINTS, ExtractError, ExtractorConfig, extract
from .verify import VerifyReport, verify

__version__ = "0.1.0"

__all__ = [
    "CHECKPOINTS",
    "EmbfError",
    "ExtractError",
    "ExtractorConfig",
    "VerifyReport",
    "extract",
    "read_embf",
    "verify",
    "write_embf",
    "__version__",
]
