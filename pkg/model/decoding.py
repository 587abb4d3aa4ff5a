"""
Transflex - Decoding
====================
Greedy and beam decoding for a trained InflectionModel, plus an order-preserving
fan-out over many inputs.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from encoding.vocab import BOW_ID, EOW_ID, SymbolVocab, decode_output
from numerics.tape import Node, Tape
from .network import EncoderStates, InflectionModel

logger = logging.getLogger(__name__)


@dataclass
class DecodeResult:
    """A decoded form with its total log-probability."""
    form: str
    log_prob: float
    truncated: bool = False
    ids: Tuple[int, ...] = ()
    attention_history: Optional[List[np.ndarray]] = None


@dataclass
class _Hypothesis:
    score: float
    ids: Tuple[int, ...]
    state: Node
    history: List[np.ndarray] = field(default_factory=list)


def _start(model: InflectionModel, input_ids: Sequence[int]) -> Tuple[Tape, EncoderStates, Node]:
    tape = Tape(enabled=False)
    ids = np.asarray(input_ids, dtype=np.int64)[None, :]
    enc = model.encode(tape, ids, np.ones(ids.shape, dtype=bool))
    return tape, enc, model.init_state(tape, enc)


def greedy_decode(
    model: InflectionModel,
    input_ids: Sequence[int],
    vocab: SymbolVocab,
    max_len: Optional[int] = None,
    keep_attention: bool = False,
) -> DecodeResult:
    """
    Pick the most probable symbol at each step, starting from BOW, until EOW
    or ``max_len`` steps. Ties go to the lowest symbol id.
    """
    max_len = model.config.max_decode_length if max_len is None else max_len
    tape, enc, s = _start(model, input_ids)
    y = BOW_ID
    chosen: List[int] = []
    total = 0.0
    history: List[np.ndarray] = []
    for _ in range(max_len):
        s, log_probs, alpha = model.step_log_probs(tape, np.array([y]), s, enc)
        row = log_probs[0]
        y = int(np.argmax(row))
        total += float(row[y])
        if keep_attention:
            history.append(alpha[0])
        if y == EOW_ID:
            return DecodeResult(decode_output(chosen, vocab), total, False, tuple(chosen), history if keep_attention else None)
        chosen.append(y)
    return DecodeResult(decode_output(chosen, vocab), total, True, tuple(chosen), history if keep_attention else None)


def beam_decode(
    model: InflectionModel,
    input_ids: Sequence[int],
    vocab: SymbolVocab,
    beam_width: int,
    max_len: Optional[int] = None,
    keep_attention: bool = False,
) -> DecodeResult:
    """
    Beam search ranked by summed log-probability.

    Each step expands every live hypothesis by every supported symbol and keeps
    the best ``beam_width`` candidates (ties: lexicographically smaller id
    sequence). Candidates ending in EOW retire to the finished pool. The search
    stops once no live hypothesis can beat the best finished one. For widths
    above 1 the greedy completion is also a candidate, so the result never
    scores below greedy; width 1 is exactly greedy.
    """
    if beam_width < 1:
        raise ValueError(f"beam_width must be >= 1, got {beam_width}")
    if beam_width == 1:
        return greedy_decode(model, input_ids, vocab, max_len, keep_attention)

    max_len = model.config.max_decode_length if max_len is None else max_len
    tape, enc, s0 = _start(model, input_ids)
    live = [_Hypothesis(0.0, (), s0)]
    finished: List[_Hypothesis] = []

    for _ in range(max_len):
        candidates = []
        for hyp in live:
            y_prev = hyp.ids[-1] if hyp.ids else BOW_ID
            s, log_probs, alpha = model.step_log_probs(tape, np.array([y_prev]), hyp.state, enc)
            row = log_probs[0]
            history = hyp.history + [alpha[0]] if keep_attention else hyp.history
            for y in np.flatnonzero(np.isfinite(row)):
                candidates.append(_Hypothesis(hyp.score + float(row[y]), hyp.ids + (int(y),), s, history))

        candidates.sort(key=lambda h: (-h.score, h.ids))
        live = []
        for cand in candidates[:beam_width]:
            if cand.ids[-1] == EOW_ID:
                finished.append(_Hypothesis(cand.score, cand.ids[:-1], cand.state, cand.history))
            else:
                live.append(cand)
        if not live:
            break
        if finished and max(f.score for f in finished) >= live[0].score:
            break

    greedy = greedy_decode(model, input_ids, vocab, max_len, keep_attention)
    if finished:
        best = min(finished, key=lambda h: (-h.score, h.ids))
        if greedy.truncated or best.score >= greedy.log_prob:
            return DecodeResult(
                decode_output(best.ids, vocab), best.score, False, best.ids,
                best.history if keep_attention else None,
            )
        return greedy
    if not greedy.truncated:
        return greedy
    best = live[0] if live else None
    if best is None or best.score < greedy.log_prob:
        return greedy
    return DecodeResult(decode_output(best.ids, vocab), best.score, True, best.ids, best.history if keep_attention else None)


def decode_many(
    model: InflectionModel,
    inputs: Sequence[Sequence[int]],
    vocab: SymbolVocab,
    beam_width: int = 1,
    max_len: Optional[int] = None,
    workers: int = 1,
) -> List[DecodeResult]:
    """Decode every input; results come back in input order regardless of ``workers``."""

    def run(ids):
        return beam_decode(model, ids, vocab, beam_width, max_len)

    if workers <= 1:
        return [run(ids) for ids in inputs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, inputs))
