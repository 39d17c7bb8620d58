"""Latent-state linear-chain CRF with low-rank transition embeddings.

Exact forward/Viterbi inference over a large hidden state space that is
deterministically partitioned onto output labels, analytic maximum
likelihood training, and tooling for NER-style sequence labeling.
"""

from .data import SyntheticTaskSpec, TokenSequence, generate_synthetic, read_conll
from .evaluation import extract_spans, score
from .inference import (
    DecodeResult,
    Marginals,
    clamped_log_z,
    forward_log_z,
    posterior_marginals,
    sequence_log_likelihood,
    viterbi,
)
from .kernels import backend_name
from .model import (
    CONLL_LABELS,
    LabelSet,
    Lattice,
    ModelParams,
    StatePartition,
    TransitionFactors,
    build_state_partition,
    energy,
    init_model_params,
    sentence_lattice,
    transition_logits,
)
from .serialize import load_model, save_model
from .training import (
    AdamState,
    TrainConfig,
    adam_step,
    finite_difference_check,
    nll_and_gradients,
    train,
)

__version__ = "0.1.0"
