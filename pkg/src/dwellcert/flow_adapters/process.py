"""Black-box dynamics running in a subprocess.

The subprocess speaks a line protocol on its stdin and stdout:

    <- HELLO <n> <m> <l>                  (once, on startup)
    -> STEP <mode> <x_1..x_n> <u_1..u_m> <dt>
    <- <x'_1..x'_n>

Numbers are decimal floats written with full round-trip precision. Exactly
one request is in flight at a time.
"""

from __future__ import annotations

import logging
import queue
import subprocess
import threading
import typing

import numpy as np

from dwellcert.core.constants import FlowKind
from dwellcert.core.errors import (
    FlowProtocolError,
    FlowTransportError,
    NonFiniteStateError,
    ValidationError,
)
from dwellcert.core.flowmap import FlowMapHandle

if typing.TYPE_CHECKING:
    from types import TracebackType
    from typing import IO, List, Optional, Sequence, Type

    from dwellcert.core.constants import FloatArray

logger = logging.getLogger(__name__)

_EOF = None


def format_floats(values: Sequence[float]) -> str:
    """Space separated, with repr precision (round-trips exactly)."""
    return " ".join(repr(float(v)) for v in values)


def parse_floats(line: str, count: int) -> List[float]:
    """Parse exactly ``count`` floats from a response line.

    Raises
    ------
    FlowProtocolError
        If the line has the wrong number of fields or a field is not a
        number.
    """
    fields = line.split()
    if len(fields) != count:
        raise FlowProtocolError(
            f"Expected {count} numbers, got {len(fields)} fields", line=line
        )
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise FlowProtocolError("Response is not numeric", line=line) from None


class ExternalProcess:
    """Owns one dynamics subprocess. Use as a context manager, or call
    :meth:`close` when done.

    Parameters
    ----------
    command:
        The argv of the subprocess.
    n, m, modes:
        State and input dimension and the number of modes. The handshake of
        the subprocess must announce the same values.
    timeout:
        Seconds to wait for the handshake and for every response.
    """

    def __init__(
        self,
        command: Sequence[str],
        n: int,
        m: int,
        modes: int,
        timeout: float = 10.0,
    ) -> None:
        if not command:
            raise ValidationError("command must not be empty")
        if not timeout > 0:
            raise ValidationError(f"timeout must be positive (got {timeout})")
        self.command = list(command)
        self.n = n
        self.m = m
        self.modes = modes
        self.timeout = timeout
        self._lock = threading.Lock()
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._closed = False

        logger.debug("Starting dynamics process %s", self.command)
        try:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise FlowTransportError(
                f"Could not start dynamics process {self.command}: {exc}"
            ) from exc
        assert self._process.stdout is not None
        self._reader = threading.Thread(
            target=self._read_lines,
            args=(self._process.stdout,),
            name="dwellcert-flow-reader",
            daemon=True,
        )
        self._reader.start()
        try:
            self._handshake()
        except BaseException:
            self.close()
            raise

    def _read_lines(self, stream: IO[str]) -> None:
        for line in stream:
            self._lines.put(line.rstrip("\r\n"))
        self._lines.put(_EOF)

    def _readline(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            # A late answer would pair with the next request.
            self.close()
            raise FlowTransportError(
                f"Dynamics process did not answer within {self.timeout} s"
            ) from None
        if line is _EOF:
            code = self._process.poll()
            raise FlowTransportError(
                f"Dynamics process closed its output (exit code {code})"
            )
        return line

    def _handshake(self) -> None:
        line = self._readline()
        logger.debug("Handshake: %s", line)
        fields = line.split()
        if len(fields) != 4 or fields[0] != "HELLO":
            raise FlowProtocolError("Expected 'HELLO <n> <m> <l>'", line=line)
        try:
            announced = tuple(int(f) for f in fields[1:])
        except ValueError:
            raise FlowProtocolError("Non-integer handshake field", line=line) from None
        expected = (self.n, self.m, self.modes)
        if announced != expected:
            raise FlowProtocolError(
                f"Process announces (n, m, l) = {announced}, configured {expected}",
                line=line,
            )

    @property
    def alive(self) -> bool:
        return not self._closed and self._process.poll() is None

    def step(self, mode: int, x: FloatArray, u: FloatArray, dt: float) -> FloatArray:
        """Send one STEP request and return the state it answers with.

        Raises
        ------
        FlowTransportError
            If the process has exited, the pipe is broken or the response
            timed out.
        FlowProtocolError
            If the response is malformed.
        NonFiniteStateError
            If the returned state has NaN or infinite entries.
        """
        if not 1 <= mode <= self.modes:
            raise ValidationError(f"mode must be in 1..{self.modes} (got {mode})")
        request = (
            f"STEP {mode} {format_floats(np.ravel(x))} "
            f"{format_floats(np.ravel(u))} {float(dt)!r}\n"
        )
        with self._lock:
            if not self.alive:
                raise FlowTransportError("Dynamics process is not running")
            assert self._process.stdin is not None
            try:
                self._process.stdin.write(request)
                self._process.stdin.flush()
            except OSError as exc:
                raise FlowTransportError(
                    f"Could not write to dynamics process: {exc}"
                ) from exc
            line = self._readline()
        state = np.array(parse_floats(line, self.n))
        if not np.all(np.isfinite(state)):
            raise NonFiniteStateError(
                f"Dynamics process returned a non-finite state {state.tolist()} "
                f"for mode {mode}, x={np.ravel(x).tolist()}"
            )
        return state

    def flow_map(self, mode: int) -> ProcessFlowMap:
        return ProcessFlowMap(self, mode)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        process = self._process
        try:
            if process.stdin is not None:
                process.stdin.close()
        except OSError:
            pass
        try:
            process.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired:
            logger.warning("Dynamics process did not exit; killing it")
            process.kill()
            process.wait()
        if process.stdout is not None:
            process.stdout.close()
        logger.debug("Dynamics process exited with code %s", process.returncode)

    def __enter__(self) -> ExternalProcess:
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        self.close()

    def __repr__(self) -> str:
        state = "running" if self.alive else "closed"
        return f"<ExternalProcess {' '.join(self.command)!r} ({state})>"


class ProcessFlowMap(FlowMapHandle):
    """Flow map of one mode of an ExternalProcess. Closing the handle leaves
    the process running; it belongs to the ExternalProcess."""

    kind = FlowKind.EXTERNAL

    def __init__(self, process: ExternalProcess, mode: int) -> None:
        if not 1 <= mode <= process.modes:
            raise ValidationError(f"mode must be in 1..{process.modes} (got {mode})")
        super().__init__(mode, process.n, process.m)
        self.process = process

    def _advance(self, xs: FloatArray, us: FloatArray, dt: float) -> FloatArray:
        out = np.empty_like(xs)
        for i, (x, u) in enumerate(zip(xs, us)):
            out[i] = self.process.step(self.mode, x, u, dt)
        return out
