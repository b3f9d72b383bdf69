"""Package implementing the local experiment runner"""
from .local import LocalRunner

export = [LocalRunner]

__all__ = [
    "LocalRunner"
]
