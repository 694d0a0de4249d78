"""Result writers: CSV (primary) and JSON mirror.

One comment line with provenance (config hash, code version, subcommand),
one header line with fixed column order, then rows; '.' decimal, full
precision scientific notation.  Formatting is fully deterministic so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .runner import RunResult


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if bool(v) else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    return str(v)


def render_csv(result: RunResult) -> str:
    meta = result.meta
    lines = [f"# config_hash={meta['config_hash']} version={meta['version']} "
             f"subcommand={meta['subcommand']}"]
    lines.append(",".join(result.columns))
    for row in result.rows:
        lines.append(",".join(_fmt(v) for v in row))
    for s in result.summary:
        lines.append(f"# {s}")
    return "\n".join(lines) + "\n"


def render_json(result: RunResult) -> str:
    payload = {
        "meta": result.meta,
        "columns": list(result.columns),
        "rows": [[_fmt(v) if isinstance(v, float) else v for v in row]
                 for row in result.rows],
        "summary": result.summary,
        "all_converged": result.all_converged,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_result(result: RunResult, path: str, fmt: str) -> None:
    text = render_csv(result) if fmt == "csv" else render_json(result)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
