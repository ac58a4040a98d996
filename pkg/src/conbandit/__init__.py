"""Conversational bandit recommender for cold-start users.

Items and attributes share one arm space; a Gaussian posterior over the user
vector drives both what to ask and what to recommend. The package bundles the
posterior engine, the decision policies and their ablations, UCB baselines, an
offline BPR embedding trainer, a multi-round user simulator, and an experiment
CLI with SR@t / average-turn evaluation.
"""

from .bandit import (
    ArmKind,
    ArmRef,
    PosteriorState,
    debias_reward,
    init_posterior,
    sample_user,
    score_arm,
    ucb_score,
    update_f_only,
    update_posterior,
)
from .config import ExperimentConfig, load_config, parse_config_text, serialize_config
from .data import (
    Catalog,
    DatasetSplit,
    InteractionLog,
    ItemRecord,
    QuestionSetting,
    RewardTable,
    load_dataset,
    save_dataset,
    split_cold_start,
)
from .embeddings import EmbeddingStore, read_embeddings, write_embeddings
from .experiments import run_experiment
from .fm import FmHyperParams, bpr_loss, bpr_step, fm_score_item, train_fm
from .metrics import ComparisonResult, MetricsReport, compute_metrics, paired_test
from .policies import (
    Action,
    PolicyConfig,
    PolicyState,
    ask_turns,
    init_policy_state,
    observe_feedback,
    select_action,
)
from .simulator import (
    Feedback,
    SessionResult,
    SessionState,
    apply_feedback,
    derive_session_seed,
    new_session,
    run_session,
    run_user,
    simulate_feedback,
)
from .synth import SynthParams, generate_synthetic

__version__ = "0.1.0"
