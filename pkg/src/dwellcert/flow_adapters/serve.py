"""Serve a builtin system over the external dynamics line protocol.

    python -m dwellcert.flow_adapters.serve --system lotka_volterra \\
        --param a=1 --param b=1

Parameter values are parsed as JSON when possible (``--param decay=[1,2]``)
and used as strings otherwise. Malformed requests are answered with an
``ERROR <message>`` line, which clients report as a protocol error.
"""

from __future__ import annotations

import argparse
import json
import sys
import typing

import numpy as np

from dwellcert.core.flowmap import VectorFieldFlowMap
from dwellcert.core.registry import get_system
from dwellcert.flow_adapters.process import format_floats

if typing.TYPE_CHECKING:
    from typing import IO, Any, Dict, List, Optional

    from dwellcert.core.dynamics import VectorField


def parse_params(pairs: List[str]) -> Dict[str, Any]:
    params: Dict[str, Any] = dict()
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise ValueError(f"--param must look like key=value (got {pair!r})")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _answer(flows: Dict[int, VectorFieldFlowMap], n: int, m: int, line: str) -> str:
    fields = line.split()
    if len(fields) != 3 + n + m or fields[0] != "STEP":
        return f"ERROR expected 'STEP <mode> <{n} states> <{m} inputs> <dt>'"
    try:
        mode = int(fields[1])
        numbers = [float(f) for f in fields[2:]]
    except ValueError:
        return "ERROR non-numeric field"
    if mode not in flows:
        return f"ERROR unknown mode {mode}"
    x = np.array(numbers[:n])
    u = np.array(numbers[n : n + m])
    try:
        return format_floats(flows[mode].step(x, u, numbers[-1]))
    except ValueError as exc:
        return f"ERROR {exc}"


def serve(field: VectorField, stdin: IO[str], stdout: IO[str]) -> None:
    """Answer STEP requests from ``stdin`` until it is closed."""
    flows = {p: VectorFieldFlowMap(field, p) for p in field.modes}
    stdout.write(f"HELLO {field.n} {field.m} {len(field.modes)}\n")
    stdout.flush()
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(_answer(flows, field.n, field.m, line) + "\n")
        stdout.flush()


def main(argv: Optional[List[str]] = None) -> None:
    parser = argparse.ArgumentParser(
        prog="python -m dwellcert.flow_adapters.serve",
        description="Serve a builtin system over the dynamics line protocol.",
    )
    parser.add_argument("--system", required=True, help="Registered system name")
    parser.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Keyword parameter of the system (repeatable)",
    )
    args = parser.parse_args(argv)
    try:
        field = get_system(args.system)(**parse_params(args.param))
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
    serve(field, sys.stdin, sys.stdout)


if __name__ == "__main__":
    main()
