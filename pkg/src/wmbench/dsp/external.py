"""Conditions hosted by an external program (codecs, neural enhancers).

Contract: ``tool <in.wav> <out.wav> [args...]``. The input is 16-bit mono PCM
at the waveform's rate; the tool writes any PCM WAVE file and exits 0.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..audio import Waveform, read_pcm, require_content, resample_array, write_pcm
from ..errors import CorruptHeader, MalformedToolOutput, SkippedCondition, ToolFailure, UnsupportedFormat


@dataclass(frozen=True)
class ToolSpec:
    command: tuple[str, ...]
    args: tuple[str, ...] = ()
    timeout_s: float = 300.0

    @classmethod
    def parse(cls, command: str | Sequence[str], args: Sequence[str] = (),
              timeout_s: float = 300.0) -> "ToolSpec":
        cmd = tuple(shlex.split(command)) if isinstance(command, str) else tuple(command)
        if not cmd:
            raise ValueError("empty tool command")
        return cls(cmd, tuple(str(a) for a in args), float(timeout_s))

    def available(self) -> bool:
        exe = self.command[0]
        return Path(exe).is_file() or shutil.which(exe) is not None


@dataclass
class ToolRun:
    output: Waveform
    raw_length: int
    raw_rate: int
    stderr: str = field(default="", repr=False)


def align_length(x: np.ndarray, n: int) -> np.ndarray:
    """Trim or zero-pad at the end to exactly ``n`` samples."""
    if len(x) >= n:
        return x[:n]
    return np.concatenate((x, np.zeros(n - len(x))))


def run_tool(w: Waveform, tool: ToolSpec | None, extra_args: Sequence[str] = ()) -> ToolRun:
    require_content(w)
    if tool is None:
        raise SkippedCondition("no tool configured")
    if not tool.available():
        raise SkippedCondition(f"tool not found: {tool.command[0]}")
    with tempfile.TemporaryDirectory(prefix="wmbench-") as tmp:
        src = Path(tmp) / "in.wav"
        dst = Path(tmp) / "out.wav"
        write_pcm(w, src, bit_depth=16)
        argv = [*tool.command, str(src), str(dst), *tool.args, *map(str, extra_args)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=tool.timeout_s)
        except FileNotFoundError as exc:
            raise SkippedCondition(f"tool not found: {tool.command[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ToolFailure(f"{tool.command[0]} timed out after {tool.timeout_s} s") from exc
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] if proc.stderr else []
            raise ToolFailure(f"{tool.command[0]} exited {proc.returncode}"
                              + (f": {tail[0]}" if tail else ""))
        if not dst.exists():
            raise MalformedToolOutput(f"{tool.command[0]} wrote no output file")
        try:
            out = read_pcm(dst)
        except (CorruptHeader, UnsupportedFormat) as exc:
            raise MalformedToolOutput(f"unreadable tool output: {exc}") from exc
    raw_len, raw_rate = len(out), out.sample_rate
    x = out.samples
    if raw_rate != w.sample_rate:
        x = resample_array(x, raw_rate, w.sample_rate)
    x = np.clip(align_length(x, len(w)), -1.0, 1.0)
    return ToolRun(w.replace(x), raw_len, raw_rate, proc.stderr)


def external_condition(w: Waveform, tool: ToolSpec | None, extra_args: Sequence[str] = ()) -> Waveform:
    return run_tool(w, tool, extra_args).output
