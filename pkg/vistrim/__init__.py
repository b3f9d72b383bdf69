"""Text-guided vision token pruning on a toy vision-language transformer"""
import importlib.metadata

try:
    __version__ = importlib.metadata.version("vistrim")
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.0.0"
