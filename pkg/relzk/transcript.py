"""
Round transcripts
One tab-separated line per round; `#` lines at the top carry the run manifest.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from relzk.errors import MalformedTranscriptError

logger = logging.getLogger(__name__)

MODE_NAMES = ("COLOUR_TEST", "CONSIST_FIRST", "CONSIST_SECOND")
REASON_NAMES = ("COLOUR_OK", "COLOUR_FAIL", "CONSIST_OK", "CONSIST_FAIL")
VERDICT_NAMES = ("REJECT", "ACCEPT")
FIELD_COUNT = 12


@dataclass(frozen=True, eq=False)
class TranscriptBlock:
    """Column arrays for consecutive rounds; left/right are (B, 4) of i, j, r, s"""

    rounds: np.ndarray
    modes: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_answers: np.ndarray
    right_answers: np.ndarray
    accepted: np.ndarray
    reasons: np.ndarray
    stamps: np.ndarray

    def __len__(self) -> int:
        return int(self.rounds.shape[0])


@dataclass(frozen=True)
class TranscriptRecord:
    round: int
    mode: str
    left: Tuple[int, int, int, int]
    right: Tuple[int, int, int, int]
    left_answer: Tuple[int, int]
    right_answer: Tuple[int, int]
    accepted: bool
    reason: str
    t_emit_left: int
    t_recv_left: int
    t_emit_right: int
    t_recv_right: int

    def to_line(self) -> str:
        return "\t".join(
            [
                str(self.round),
                self.mode,
                ",".join(map(str, self.left)),
                ",".join(map(str, self.right)),
                ",".join(map(str, self.left_answer)),
                ",".join(map(str, self.right_answer)),
                VERDICT_NAMES[int(self.accepted)],
                self.reason,
                str(self.t_emit_left),
                str(self.t_recv_left),
                str(self.t_emit_right),
                str(self.t_recv_right),
            ]
        )


def format_block(block: TranscriptBlock) -> List[str]:
    rows = zip(
        block.rounds.tolist(),
        block.modes.tolist(),
        block.left.tolist(),
        block.right.tolist(),
        block.left_answers.tolist(),
        block.right_answers.tolist(),
        block.accepted.tolist(),
        block.reasons.tolist(),
        block.stamps.tolist(),
    )
    return [
        f"{n}\t{MODE_NAMES[m]}\t{l[0]},{l[1]},{l[2]},{l[3]}\t{r[0]},{r[1]},{r[2]},{r[3]}"
        f"\t{la[0]},{la[1]}\t{ra[0]},{ra[1]}\t{VERDICT_NAMES[ok]}\t{REASON_NAMES[why]}"
        f"\t{t[0]}\t{t[1]}\t{t[2]}\t{t[3]}\n"
        for n, m, l, r, la, ra, ok, why, t in rows
    ]


class TranscriptWriter:
    """Streams transcript blocks to a text handle, header lines first"""

    def __init__(self, handle: IO[str], header: Sequence[str] = ()):
        self.handle = handle
        self.records = 0
        for line in header:
            handle.write(line + "\n")

    def write_block(self, block: TranscriptBlock) -> None:
        self.handle.writelines(format_block(block))
        self.records += len(block)


class MemoryTranscript:
    """Keeps blocks in memory; used by tests and the attack simulator"""

    def __init__(self):
        self.blocks: List[TranscriptBlock] = []

    def write_block(self, block: TranscriptBlock) -> None:
        self.blocks.append(block)

    def lines(self) -> List[str]:
        return [line for block in self.blocks for line in format_block(block)]

    def records(self) -> List[TranscriptRecord]:
        return list(parse_transcript_lines(self.lines()))


def _tuple(text: str, size: int, line_no: int) -> Tuple[int, ...]:
    parts = text.split(",")
    if len(parts) != size:
        raise MalformedTranscriptError(f"expected {size} comma-separated values, got {text!r}", line_no)
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise MalformedTranscriptError(f"non-integer value in {text!r}", line_no)


def parse_transcript_line(line: str, line_no: int) -> TranscriptRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != FIELD_COUNT:
        raise MalformedTranscriptError(f"expected {FIELD_COUNT} fields, got {len(fields)}", line_no)
    mode, verdict, reason = fields[1], fields[6], fields[7]
    if mode not in MODE_NAMES:
        raise MalformedTranscriptError(f"unknown mode {mode!r}", line_no)
    if verdict not in VERDICT_NAMES:
        raise MalformedTranscriptError(f"unknown verdict {verdict!r}", line_no)
    if reason not in REASON_NAMES:
        raise MalformedTranscriptError(f"unknown reason {reason!r}", line_no)
    try:
        round_index = int(fields[0])
        stamps = [int(f) for f in fields[8:12]]
    except ValueError:
        raise MalformedTranscriptError("round and timestamps must be integers", line_no)
    if stamps[1] < stamps[0] or stamps[3] < stamps[2]:
        raise MalformedTranscriptError("answer received before its challenge was emitted", line_no)
    return TranscriptRecord(
        round=round_index,
        mode=mode,
        left=_tuple(fields[2], 4, line_no),
        right=_tuple(fields[3], 4, line_no),
        left_answer=_tuple(fields[4], 2, line_no),
        right_answer=_tuple(fields[5], 2, line_no),
        accepted=verdict == "ACCEPT",
        reason=reason,
        t_emit_left=stamps[0],
        t_recv_left=stamps[1],
        t_emit_right=stamps[2],
        t_recv_right=stamps[3],
    )


def parse_transcript_lines(lines: Iterable[str]) -> Iterator[TranscriptRecord]:
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        yield parse_transcript_line(line, line_no)


def read_transcript(path: Union[str, Path]) -> Iterator[TranscriptRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        yield from parse_transcript_lines(handle)


def read_header(path: Union[str, Path]) -> List[str]:
    """Leading `#` lines of an artefact"""
    header = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            header.append(line.rstrip("\n"))
    return header
