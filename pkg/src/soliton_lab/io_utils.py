# ============================================================
# soliton_lab.io_utils: file I/O utilities for CLI
# ============================================================

import csv
import json
import logging
from pathlib import Path

from openpyxl import Workbook
from openpyxl.styles import Font

from .geometry import SurfacePatch

logger = logging.getLogger(__name__)

# Excel limits sheet titles to 31 characters
MAX_SHEET_TITLE = 31


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    Read a flat ``key = value`` config file with UTF-8 encoding.

    Blank lines and lines starting with ``#`` are skipped; later keys win.

    Args:
        path: Path to the config file

    Returns:
        Mapping of parameter name to raw value text

    Raises:
        FileNotFoundError: If file doesn't exist
        ValueError: On a line without '=' (reported with its line number)
    """
    path = Path(path)
    entries: dict[str, str] = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ValueError(f"{path.name}:{number}: expected 'key = value', got '{text}'")
        key, value = text.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def write_json(path: str | Path, data) -> None:
    """Write JSON with sorted keys and two-space indent (byte-stable output)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: str | Path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _number(text: str):
    try:
        value = float(text)
    except ValueError:
        return text
    return int(value) if value.is_integer() and "." not in text and "e" not in text.lower() else value


def read_csv(path: str | Path) -> tuple[list[str], list[list]]:
    """Read a series CSV back as (header, rows) with numeric cells converted."""
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[_number(cell) for cell in row] for row in reader]
    return header, rows


def load_report(report_dir: str | Path) -> dict:
    """
    Load report.json from an experiment output directory.

    Raises:
        FileNotFoundError: If the directory has no report.json
    """
    path = Path(report_dir) / "report.json"
    return json.loads(path.read_text(encoding="utf-8"))


def export_workbook(report_dir: str | Path, output_path: str | Path) -> int:
    """
    Export a report directory to an Excel workbook.

    A ``Summary`` sheet lists scalars and verdicts under bold headers; every
    series CSV becomes its own sheet.

    Args:
        report_dir: Directory holding report.json and the series CSVs
        output_path: Path for output .xlsx file

    Returns:
        Number of sheets written

    Raises:
        FileNotFoundError: report.json or a referenced CSV is missing
    """
    report_dir = Path(report_dir)
    report = load_report(report_dir)

    wb = Workbook()
    wb.remove(wb.active)
    bold = Font(bold=True)

    ws = wb.create_sheet(title="Summary")
    ws.cell(row=1, column=1, value="experiment").font = bold
    ws.cell(row=1, column=2, value=report["experiment"])
    ws.cell(row=2, column=1, value="seed").font = bold
    ws.cell(row=2, column=2, value=report["seed"])

    row = 4
    for col, title in enumerate(["scalar", "value", "tolerance", "provenance"], start=1):
        ws.cell(row=row, column=col, value=title).font = bold
    for name, entry in sorted(report["scalars"].items()):
        row += 1
        ws.cell(row=row, column=1, value=name)
        ws.cell(row=row, column=2, value=entry["value"])
        ws.cell(row=row, column=3, value=entry["tolerance"])
        ws.cell(row=row, column=4, value=entry["provenance"])

    row += 2
    for col, title in enumerate(["verdict", "passed", "provenance", "detail"], start=1):
        ws.cell(row=row, column=col, value=title).font = bold
    for name, entry in sorted(report["verdicts"].items()):
        row += 1
        ws.cell(row=row, column=1, value=name)
        ws.cell(row=row, column=2, value=entry["passed"])
        ws.cell(row=row, column=3, value=entry["provenance"])
        ws.cell(row=row, column=4, value=entry["detail"])

    for name, filename in sorted(report["series"].items()):
        header, rows = read_csv(report_dir / filename)
        sheet = wb.create_sheet(title=name[:MAX_SHEET_TITLE])
        for col, title in enumerate(header, start=1):
            sheet.cell(row=1, column=col, value=title).font = bold
        for r, values in enumerate(rows, start=2):
            for col, value in enumerate(values, start=1):
                sheet.cell(row=r, column=col, value=value)

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(str(output_path))
    logger.info("exported %s to %s (%d sheets)", report_dir, output_path, len(wb.sheetnames))
    return len(wb.sheetnames)


def validate_config_file(path: str | Path, experiment: str) -> tuple[bool, list[str]]:
    """
    Validate a config file against an experiment's parameters.

    Args:
        path: Path to the config file
        experiment: Experiment name from the catalog

    Returns:
        Tuple of (is_valid, error_list)

    Raises:
        FileNotFoundError: If file doesn't exist
        KeyError: Unknown experiment
    """
    from .experiments import get_experiment
    from .validator import validate_config

    defaults = get_experiment(experiment).defaults
    try:
        entries = read_config_file(path)
    except ValueError as e:
        return (False, [str(e)])
    errors = validate_config(defaults, entries)
    return (len(errors) == 0, errors)


def write_patch(path: str | Path, patch: SurfacePatch) -> None:
    """Store a surface patch in its JSON container."""
    write_json(path, patch.to_dict())


def read_patch(path: str | Path) -> SurfacePatch:
    """
    Load a surface patch from its JSON container.

    Raises:
        FileNotFoundError: If file doesn't exist
        ValueError: Malformed container or invalid patch
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"patch file is not valid JSON: {e}") from None
    return SurfacePatch.from_dict(data)
