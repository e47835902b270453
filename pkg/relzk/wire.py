"""
Verifier/prover wire frames
Challenge frames are 8 bytes (round u32 LE, edge id u16 LE, flags, reserved zero);
answer frames are 5 bytes (round u32 LE, a1 + 3*a2).
"""

from typing import Tuple

import numpy as np

from relzk.errors import FrameError

CHALLENGE_DTYPE = np.dtype([("round", "<u4"), ("edge", "<u2"), ("flags", "u1"), ("reserved", "u1")])
ANSWER_DTYPE = np.dtype([("round", "<u4"), ("answer", "u1")])

FLAG_R = 0b001
FLAG_S = 0b010
FLAG_SWAPPED = 0b100

MAX_EDGE_ID = 0xFFFF
MAX_ROUND = 0xFFFFFFFF


def encode_challenges(rounds: np.ndarray, edge_ids: np.ndarray, swapped: np.ndarray, r: np.ndarray, s: np.ndarray) -> bytes:
    rounds = np.asarray(rounds, dtype=np.int64)
    edge_ids = np.asarray(edge_ids, dtype=np.int64)
    if rounds.size and (rounds.min() < 0 or rounds.max() > MAX_ROUND):
        raise FrameError("round index does not fit in 32 bits")
    if edge_ids.size and (edge_ids.min() < 0 or edge_ids.max() > MAX_EDGE_ID):
        raise FrameError("edge id does not fit in 16 bits")

    frames = np.zeros(rounds.shape[0], dtype=CHALLENGE_DTYPE)
    frames["round"] = rounds
    frames["edge"] = edge_ids
    frames["flags"] = (np.asarray(r) - 1) | ((np.asarray(s) - 1) << 1) | (np.asarray(swapped) << 2)
    return frames.tobytes()


def decode_challenges(data: bytes) -> np.ndarray:
    """Structured array of challenge frames; rejects bad length, flags or reserved byte"""
    if len(data) % CHALLENGE_DTYPE.itemsize:
        raise FrameError(f"challenge payload of {len(data)} bytes is not a whole number of frames")
    frames = np.frombuffer(data, dtype=CHALLENGE_DTYPE)
    if np.any(frames["reserved"] != 0):
        raise FrameError("reserved byte must be zero")
    if np.any(frames["flags"] > 0b111):
        raise FrameError("unknown flag bits set")
    return frames


def challenge_fields(frames: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(round, edge id, swapped, r, s) as int64 arrays"""
    flags = frames["flags"].astype(np.int64)
    return (
        frames["round"].astype(np.int64),
        frames["edge"].astype(np.int64),
        (flags & FLAG_SWAPPED) >> 2,
        (flags & FLAG_R) + 1,
        ((flags & FLAG_S) >> 1) + 1,
    )


def encode_answers(rounds: np.ndarray, a1: np.ndarray, a2: np.ndarray) -> bytes:
    frames = np.zeros(np.asarray(rounds).shape[0], dtype=ANSWER_DTYPE)
    frames["round"] = rounds
    frames["answer"] = np.asarray(a1) + 3 * np.asarray(a2)
    return frames.tobytes()


def decode_answers(data: bytes) -> np.ndarray:
    """Structured answer frames; value range is checked by the verifier"""
    if len(data) % ANSWER_DTYPE.itemsize:
        raise FrameError(f"answer payload of {len(data)} bytes is not a whole number of frames")
    return np.frombuffer(data, dtype=ANSWER_DTYPE)
