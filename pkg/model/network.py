"""
Transflex - Attentional Encoder-Decoder
=======================================
Character-level sequence transducer with:

- one shared input embedding table (language codes, subtags, characters)
- a bidirectional GRU encoder whose per-position states are [forward; backward]
- additive attention from the previous decoder state
- a GRU decoder fed [embedding of previous symbol; context]
- an output layer over [embedding of previous symbol; decoder state; context]

All activations are batched: (B, dim) per step, (B, T, dim) for sequences.
"""

import logging
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from encoding.batching import Batch, EncodedSample, collate
from encoding.vocab import BOW_ID, EOW_ID, PAD_ID
from numerics.params import ParamStore, identity_init, uniform_init
from numerics.tape import Node, Tape, masked_log_softmax
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

INIT_IDENTITY = "identity"
INIT_UNIFORM = "uniform"

GATES = ("z", "r", "h")
DECODER_GRU_MATRICES = tuple(f"dec.{kind}_{gate}" for kind in ("W", "U") for gate in GATES)


@dataclass
class ModelConfig:
    """Sizes and initialization of one model."""
    input_vocab_size: int
    output_vocab_size: int
    hidden_size: int = 100
    embedding_size: int = 300
    attention_size: Optional[int] = None
    max_decode_length: int = 30
    init_scheme: str = INIT_IDENTITY
    init_range: float = 0.08

    def __post_init__(self):
        for name in ("input_vocab_size", "output_vocab_size", "hidden_size", "embedding_size", "max_decode_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.attention_size is None:
            self.attention_size = self.hidden_size
        if self.init_scheme not in (INIT_IDENTITY, INIT_UNIFORM):
            raise ValueError(f"unknown init scheme '{self.init_scheme}'")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        """Create from a mapping whose values may be strings."""
        return cls(
            input_vocab_size=int(data["input_vocab_size"]),
            output_vocab_size=int(data["output_vocab_size"]),
            hidden_size=int(data["hidden_size"]),
            embedding_size=int(data["embedding_size"]),
            attention_size=int(data["attention_size"]),
            max_decode_length=int(data["max_decode_length"]),
            init_scheme=str(data["init_scheme"]),
            init_range=float(data["init_range"]),
        )


def param_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Name -> shape for every parameter, in serialization order."""
    E, H, A = config.embedding_size, config.hidden_size, config.attention_size
    shapes: Dict[str, Tuple[int, ...]] = {
        "embed.input": (config.input_vocab_size, E),
        "embed.output": (config.output_vocab_size, E),
    }
    for direction in ("fwd", "bwd"):
        for gate in GATES:
            shapes[f"enc.{direction}.W_{gate}"] = (E, H)
            shapes[f"enc.{direction}.U_{gate}"] = (H, H)
            shapes[f"enc.{direction}.b_{gate}"] = (H,)
    shapes["dec.init.W"] = (H, H)
    shapes["dec.init.b"] = (H,)
    shapes["att.W_a"] = (H, A)
    shapes["att.U_a"] = (2 * H, A)
    shapes["att.v_a"] = (A, 1)
    for gate in GATES:
        shapes[f"dec.W_{gate}"] = (E + 2 * H, H)
        shapes[f"dec.U_{gate}"] = (H, H)
        shapes[f"dec.b_{gate}"] = (H,)
    shapes["out.W"] = (E + H + 2 * H, config.output_vocab_size)
    shapes["out.b"] = (config.output_vocab_size,)
    return shapes


def init_params(config: ModelConfig, seed: int) -> ParamStore:
    """
    Build the parameter store.

    ``identity``: every matrix gets the truncated identity and every bias zero,
    except the six decoder GRU matrices, which are drawn uniformly from
    [-init_range, init_range]. ``uniform``: everything is drawn uniformly,
    biases included (used for gradient checks).
    """
    rng = make_rng(seed)
    store = ParamStore()
    for name, shape in param_shapes(config).items():
        if config.init_scheme == INIT_UNIFORM:
            value = rng.uniform(-config.init_range, config.init_range, size=shape)
        elif len(shape) == 1:
            value = np.zeros(shape)
        elif name in DECODER_GRU_MATRICES:
            value = uniform_init(shape[0], shape[1], rng, config.init_range)
        else:
            value = identity_init(*shape)
        store.add(name, value)
    logger.info(
        f"Initialized {len(store)} tensors ({store.num_values()} values, scheme {config.init_scheme}, seed {seed})"
    )
    return store


def default_support(output_vocab_size: int) -> np.ndarray:
    """Output symbols the softmax ranges over: everything except BOW and PAD."""
    support = np.ones(output_vocab_size, dtype=bool)
    support[BOW_ID] = False
    support[PAD_ID] = False
    return support


@dataclass
class EncoderStates:
    """Per-position encoder states and the pieces the decoder reuses."""
    H: Node  # (B, T, 2H): [forward; backward]
    mask: np.ndarray  # (B, T)
    keys: Node  # (B, T, A): H @ U_a
    backward_final: Node  # (B, H): backward state at position 0


class InflectionModel:
    """The transducer bound to one parameter store."""

    def __init__(self, config: ModelConfig, params: ParamStore, support: Optional[np.ndarray] = None):
        self.config = config
        self.params = params
        self.support = default_support(config.output_vocab_size) if support is None else support

    # ------------------------------------------------------------------
    # Building blocks
    # ------------------------------------------------------------------

    def _p(self, tape: Tape, name: str) -> Node:
        return self.params.node(tape, name)

    def gru_cell(self, tape: Tape, prefix: str, x: Node, h_prev: Node) -> Node:
        """
        z = sigmoid(x W_z + h U_z + b_z)
        r = sigmoid(x W_r + h U_r + b_r)
        h~ = tanh(x W_h + (r * h) U_h + b_h)
        h' = (1 - z) * h + z * h~
        """
        p = lambda name: self._p(tape, f"{prefix}.{name}")
        z = tape.sigmoid(tape.add_bias(tape.add(tape.matmul(x, p("W_z")), tape.matmul(h_prev, p("U_z"))), p("b_z")))
        r = tape.sigmoid(tape.add_bias(tape.add(tape.matmul(x, p("W_r")), tape.matmul(h_prev, p("U_r"))), p("b_r")))
        candidate = tape.tanh(
            tape.add_bias(
                tape.add(tape.matmul(x, p("W_h")), tape.matmul(tape.mul(r, h_prev), p("U_h"))),
                p("b_h"),
            )
        )
        return tape.add(tape.mul(tape.one_minus(z), h_prev), tape.mul(z, candidate))

    def encode(
        self,
        tape: Tape,
        input_ids: np.ndarray,
        input_mask: np.ndarray,
        dropout_mask: Optional[np.ndarray] = None,
    ) -> EncoderStates:
        """
        Run both GRU directions over (B, T) ids. Padded positions carry the
        previous state forward, so every row sees only its own symbols.
        """
        B, T = input_ids.shape
        table = self._p(tape, "embed.input")
        inputs: List[Node] = []
        for t in range(T):
            x = tape.gather_rows(table, input_ids[:, t])
            if dropout_mask is not None:
                x = tape.mul(x, tape.constant(dropout_mask[:, t, :]))
            inputs.append(x)

        zeros = tape.constant(np.zeros((B, self.config.hidden_size)))
        forward: List[Node] = []
        h = zeros
        for t in range(T):
            h = tape.blend(self.gru_cell(tape, "enc.fwd", inputs[t], h), h, input_mask[:, t])
            forward.append(h)

        backward: List[Optional[Node]] = [None] * T
        h = zeros
        for t in reversed(range(T)):
            h = tape.blend(self.gru_cell(tape, "enc.bwd", inputs[t], h), h, input_mask[:, t])
            backward[t] = h

        H = tape.stack_time([tape.concat([forward[t], backward[t]]) for t in range(T)])
        keys = tape.matmul(H, self._p(tape, "att.U_a"))
        return EncoderStates(H=H, mask=input_mask, keys=keys, backward_final=backward[0])

    def init_state(self, tape: Tape, enc: EncoderStates) -> Node:
        """s_0 = tanh(backward_final W + b)."""
        return tape.tanh(
            tape.add_bias(tape.matmul(enc.backward_final, self._p(tape, "dec.init.W")), self._p(tape, "dec.init.b"))
        )

    def attend(self, tape: Tape, s_prev: Node, enc: EncoderStates) -> Tuple[Node, Node]:
        """e_i = v_a . tanh(s W_a + H_i U_a); alpha = masked softmax(e); c = sum_i alpha_i H_i."""
        B, T = enc.mask.shape
        query = tape.matmul(s_prev, self._p(tape, "att.W_a"))
        energies = tape.tanh(tape.expand_add(enc.keys, query))
        scores = tape.reshape(tape.matmul(energies, self._p(tape, "att.v_a")), (B, T))
        alpha = tape.masked_softmax(scores, enc.mask)
        return alpha, tape.weighted_sum(alpha, enc.H)

    def decode_step(
        self, tape: Tape, y_prev: np.ndarray, s_prev: Node, enc: EncoderStates
    ) -> Tuple[Node, Node, Node]:
        """
        One decoder step for (B,) previous symbol ids.

        Returns:
            (new state s, output logits (B, V), attention weights (B, T))
        """
        alpha, context = self.attend(tape, s_prev, enc)
        embedded = tape.gather_rows(self._p(tape, "embed.output"), y_prev)
        s = self.gru_cell(tape, "dec", tape.concat([embedded, context]), s_prev)
        logits = tape.add_bias(
            tape.matmul(tape.concat([embedded, s, context]), self._p(tape, "out.W")),
            self._p(tape, "out.b"),
        )
        return s, logits, alpha

    def step_log_probs(
        self, tape: Tape, y_prev: np.ndarray, s_prev: Node, enc: EncoderStates
    ) -> Tuple[Node, np.ndarray, np.ndarray]:
        """Decoder step returning log-probabilities (-inf outside the support)."""
        s, logits, alpha = self.decode_step(tape, y_prev, s_prev, enc)
        mask = np.broadcast_to(self.support, logits.shape)
        return s, masked_log_softmax(logits.value, mask), alpha.value

    def step_distribution(
        self, y_prev: np.ndarray, s_prev: Node, enc: EncoderStates
    ) -> Tuple[Node, np.ndarray]:
        """Probability vectors over the full output vocabulary (BOW and PAD get 0)."""
        s, log_probs, _ = self.step_log_probs(Tape(enabled=False), y_prev, s_prev, enc)
        return s, np.exp(log_probs)

    # ------------------------------------------------------------------
    # Losses
    # ------------------------------------------------------------------

    def batch_loss(self, tape: Tape, batch: Batch, dropout_mask: Optional[np.ndarray] = None) -> Node:
        """
        Mean over rows of the teacher-forced sequence NLL. Each row sums
        -log p(y_t) over its target positions after BOW, EOW included.
        """
        enc = self.encode(tape, batch.input_matrix, batch.input_mask, dropout_mask)
        s = self.init_state(tape, enc)
        B, L = batch.target_matrix.shape
        terms = []
        for t in range(1, L):
            s, logits, _ = self.decode_step(tape, batch.target_matrix[:, t - 1], s, enc)
            weights = batch.target_mask[:, t].astype(np.float64) / B
            terms.append(tape.softmax_nll(logits, batch.target_matrix[:, t], self.support, weights))
        return tape.add_scalars(terms)

    def sequence_nll(self, encoded: EncodedSample) -> float:
        """Standalone NLL of one sample."""
        return float(self.batch_loss(Tape(enabled=False), collate([encoded])).value)


def build_model(config: ModelConfig, seed: int) -> InflectionModel:
    return InflectionModel(config, init_params(config, seed))


def toy_batch(config: ModelConfig, batch_size: int = 3, max_length: int = 6, seed: int = 0) -> Batch:
    """
    Random framed sequences of mixed lengths over the config's vocab sizes,
    for gradient checks and smoke runs. ``max_length`` counts BOW and EOW.
    """
    rng = make_rng(seed)
    first_symbol = PAD_ID + 1
    rows = []
    for _ in range(batch_size):
        n_in = int(rng.integers(1, max_length - 1))
        n_out = int(rng.integers(1, max_length - 1))
        inputs = rng.integers(first_symbol, config.input_vocab_size, size=n_in)
        targets = rng.integers(first_symbol, config.output_vocab_size, size=n_out)
        rows.append(EncodedSample(
            input_ids=(BOW_ID, *(int(i) for i in inputs), EOW_ID),
            target_ids=(BOW_ID, *(int(i) for i in targets), EOW_ID),
            language="",
        ))
    return collate(rows)
