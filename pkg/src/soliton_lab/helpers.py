# ============================================================
# soliton_lab.helpers: value parsing and seed helpers
# ============================================================

import re
import zlib

import numpy as np

DEFAULT_SEED = 20240601


def infer_value(raw: str, type_hint: str | None = None):
    """
    Infer the Python type of a parameter value given as text.

    - Optional type hints ("int", "float", "bool", "string", "floats") win.
    - Otherwise try bool words, int, float, then comma lists of numbers,
      else keep the string.
    """
    if raw is None:
        return None

    raw = str(raw)
    stripped = raw.strip()

    if type_hint == "string":
        return raw

    if type_hint == "bool":
        upper = stripped.upper()
        if upper in {"TRUE", "YES", "1"}:
            return True
        if upper in {"FALSE", "NO", "0"}:
            return False
        raise ValueError(f"Expected a boolean, got '{raw}'")

    if type_hint == "int":
        try:
            return int(stripped)
        except ValueError:
            raise ValueError(f"Expected an integer, got '{raw}'") from None

    if type_hint == "float":
        try:
            return float(stripped)
        except ValueError:
            raise ValueError(f"Expected a number, got '{raw}'") from None

    if type_hint == "floats":
        return parse_float_list(stripped)

    if stripped.upper() in {"TRUE", "FALSE"}:
        return stripped.upper() == "TRUE"
    if re.fullmatch(r"[+-]?\d+", stripped):
        return int(stripped)
    if re.fullmatch(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", stripped):
        return float(stripped)
    if "," in stripped:
        try:
            return parse_float_list(stripped)
        except ValueError:
            pass

    return raw


def parse_float_list(text: str) -> list[float]:
    """
    Parse "1, 10, 100" into [1.0, 10.0, 100.0].

    Raises:
        ValueError: If any item is not a number or the list is empty
    """
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise ValueError(f"Expected a comma separated list of numbers, got '{text}'")
    values = []
    for item in items:
        try:
            values.append(float(item))
        except ValueError:
            raise ValueError(f"Invalid number '{item}' in list '{text}'") from None
    return values


def parse_override(text: str) -> tuple[str, str]:
    """
    Split a "key=value" override.

    Examples:
        >>> parse_override("r_max=100")
        ('r_max', '100')
        >>> parse_override("L = 1,10,100")
        ('L', '1,10,100')
    """
    if "=" not in text:
        raise ValueError(f"Override must have format 'key=value', got: {text}")
    key, value = text.split("=", 1)
    key = key.strip().replace("-", "_")
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
        raise ValueError(f"Invalid parameter name: '{key}'")
    return key, value.strip()


def stream_counter(name: str) -> int:
    """Stable per-stream counter derived from a name (crc32)."""
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, name: str) -> np.random.Generator:
    """
    Counter-based generator for one named stream.

    Philox keyed by the run seed, counter offset by ``stream_counter(name)``,
    so every experiment and module gets an independent, platform-stable
    stream from a single 64-bit seed.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed, counter=stream_counter(name)))
