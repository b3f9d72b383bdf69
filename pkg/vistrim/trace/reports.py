"""CSV and JSON report files"""
import json
from pathlib import Path

import pandas as pd

from vistrim.errors import TraceError
from vistrim.prune import RetainedSet


def write_csv(frame: pd.DataFrame, filename: str | Path) -> Path:
    """Write a table with '.' decimals, comma separators and a header

    :param frame: Table to write,
    :param filename: Destination file,
    :return: The written path
    """
    filename = Path(filename)
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(filename, index=False, sep=",", decimal=".",
                     lineterminator="\n")
    except OSError as err:
        raise TraceError(f"cannot write {filename}: {err}") from err
    return filename


def write_json(content: dict[str, any], filename: str | Path) -> Path:
    """Write a JSON report, keys kept in insertion order"""
    filename = Path(filename)
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        with open(filename, "w", encoding="utf-8") as json_file:
            json.dump(content, json_file, indent=2)
            json_file.write("\n")
    except OSError as err:
        raise TraceError(f"cannot write {filename}: {err}") from err
    return filename


def read_json(filename: str | Path) -> dict[str, any]:
    """Read a JSON report"""
    try:
        with open(filename, "r", encoding="utf-8") as json_file:
            return json.load(json_file)
    except FileNotFoundError as err:
        raise TraceError(f"missing report {filename}") from err
    except (OSError, json.JSONDecodeError) as err:
        raise TraceError(f"cannot read {filename}: {err}") from err


def retained_frame(rows: list[tuple[str, RetainedSet]]) -> pd.DataFrame:
    """Retained set log: one (sample_id, layer, kept) row per stage

    The kept positions are joined with spaces.
    """
    return pd.DataFrame(
        [{"sample_id": sample_id,
          "layer": retained.layer_index,
          "kept": " ".join(str(int(i)) for i in retained.kept)}
         for sample_id, retained in rows],
        columns=["sample_id", "layer", "kept"])


def cost_frame(rows: list[tuple[str, float, int, float]]) -> pd.DataFrame:
    """FLOPs table with (method, tokens, flops_T, ratio) rows

    :param rows: (method, average vision tokens, FLOPs, ratio vs dense),
    :return: The table, TFLOPs printed with 3 decimals
    """
    return pd.DataFrame(
        [{"method": method,
          "tokens": f"{tokens:.3f}".rstrip("0").rstrip("."),
          "flops_T": f"{flops / 10 ** 12:.3f}",
          "ratio": f"{ratio:.4f}"}
         for method, tokens, flops, ratio in rows],
        columns=["method", "tokens", "flops_T", "ratio"])
