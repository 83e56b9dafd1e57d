# ============================================================
# soliton_lab.validator: experiment parameter checks
# ============================================================

from .helpers import infer_value


def _type_name(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, list):
        return "list of numbers"
    return "string"


def _accepts(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if isinstance(default, int):
        return isinstance(value, int)
    if isinstance(default, float):
        return isinstance(value, (int, float))
    if isinstance(default, list):
        if isinstance(value, (int, float)):
            return True
        return isinstance(value, list) and len(value) > 0 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    return isinstance(value, str)


def validate_params(defaults: dict, overrides: dict) -> list[str]:
    """
    Check typed overrides against an experiment's default parameters.

    Checks:
      - every key is a declared parameter
      - the value type matches the default (ints pass where floats are
        expected, a single number passes where a list is expected)
      - counts and sizes declared as ints are positive
    """
    errors: list[str] = []

    for key, value in overrides.items():
        if key not in defaults:
            known = ", ".join(sorted(defaults)) or "(none)"
            errors.append(f"unknown parameter '{key}' (known: {known})")
            continue
        default = defaults[key]
        if not _accepts(default, value):
            errors.append(
                f"parameter '{key}' expects {_type_name(default)}, "
                f"got {_type_name(value)} {value!r}"
            )
            continue
        if isinstance(default, int) and not isinstance(default, bool) and default > 0 and value <= 0:
            errors.append(f"parameter '{key}' must be >= 1, got {value}")

    return errors


def validate_config(defaults: dict, entries: dict[str, str]) -> list[str]:
    """Type raw ``key = value`` text with infer_value, then validate_params."""
    return validate_params(defaults, {k: infer_value(v) for k, v in entries.items()})
