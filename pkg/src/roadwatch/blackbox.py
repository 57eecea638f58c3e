"""Append-only local event log with an acked watermark sidecar.

The log file holds one encoded report frame per line and is never
rewritten; the sidecar ``<path>.ack`` holds the highest log_seq whose ack
has been received (acks arrive in order, so acked entries form a prefix).
Together they survive connectivity loss and process crashes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .wire import EventReport, WireError, decode_report, encode_report


class BlackBoxError(Exception):
    pass


@dataclass(frozen=True)
class BlackBoxEntry:
    log_seq: int  # dense, starts at 1; doubles as the report seq
    report: EventReport
    acked: bool


class BlackBox:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.ack_path = Path(str(path) + ".ack")
        self._reports: list[EventReport] = []
        self._watermark = 0
        self._load()

    def _load(self) -> None:
        if self.path.exists():
            data = self.path.read_bytes()
            lines = data.split(b"\n")
            tail = lines.pop()  # b"" when the file ends with a newline
            for n, line in enumerate(lines, start=1):
                try:
                    report = decode_report(line)
                except WireError as e:
                    raise BlackBoxError(f"{self.path}:{n}: corrupt entry: {e}") from None
                if report.seq != n:
                    raise BlackBoxError(f"{self.path}:{n}: log_seq not dense (got {report.seq})")
                self._reports.append(report)
            if tail:
                # interrupted final append: drop the partial line once
                self.path.write_bytes(data[: len(data) - len(tail)])
        if self.ack_path.exists():
            try:
                self._watermark = int(self.ack_path.read_text().strip() or 0)
            except ValueError:
                raise BlackBoxError(f"{self.ack_path}: corrupt watermark") from None
            self._watermark = min(self._watermark, len(self._reports))

    def __len__(self) -> int:
        return len(self._reports)

    @property
    def watermark(self) -> int:
        return self._watermark

    def next_seq(self) -> int:
        return len(self._reports) + 1

    def append(self, report: EventReport) -> int:
        """Durably append one report; its seq must be the next log_seq."""
        if report.seq != self.next_seq():
            raise BlackBoxError(f"expected seq {self.next_seq()}, got {report.seq}")
        frame = encode_report(report)
        with open(self.path, "ab") as fh:
            fh.write(frame)
            fh.flush()
            os.fsync(fh.fileno())
        self._reports.append(report)
        return report.seq

    def advance(self, seq: int) -> None:
        """Record an ack; only the next unacked seq moves the watermark."""
        if seq != self._watermark + 1:
            return
        tmp = self.ack_path.with_suffix(".ack.tmp")
        tmp.write_text(str(seq))
        os.replace(tmp, self.ack_path)
        self._watermark = seq

    def entries(self) -> list[BlackBoxEntry]:
        return [
            BlackBoxEntry(i + 1, r, i + 1 <= self._watermark)
            for i, r in enumerate(self._reports)
        ]

    def unacked(self) -> list[BlackBoxEntry]:
        return [e for e in self.entries() if not e.acked]
