"""Parsers for the CLI output schemas, used to round-trip emitted files."""
import csv
import io
import json

JSON_KEYS = {"schema_version", "command", "config", "results", "checks", "passed", "timing"}
FLUX_COLUMNS = ["u", "component", "value", "est_error"]
FIELD_COLUMNS = ["point", "quantity", "component", "value"]


def evolve_columns(D):
    return (["tau"] + [f"z{i}" for i in range(D)] + [f"u{i}" for i in range(D)]
            + [f"a{i}" for i in range(D)] + ["flags"])


def parse_report(text):
    rep = json.loads(text)
    missing = JSON_KEYS - set(rep)
    if missing:
        raise ValueError(f"report lacks keys {sorted(missing)}")
    if rep["schema_version"] != "1.0":
        raise ValueError(f"unknown schema version {rep['schema_version']}")
    for c in rep["checks"]:
        if set(c) != {"name", "error", "tol", "pass"}:
            raise ValueError(f"malformed check {c}")
    if rep["passed"] != all(c["pass"] for c in rep["checks"]):
        raise ValueError("passed flag inconsistent with checks")
    return rep


def parse_csv(text, columns):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != columns:
        raise ValueError(f"header {header} != {columns}")
    rows = []
    for row in reader:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        rec = dict(zip(columns, row))
        for key in columns:
            if key not in ("component", "quantity", "flags"):
                rec[key] = float(rec[key])
        rows.append(rec)
    return rows
