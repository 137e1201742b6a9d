"""logicprobe: solver-verified adversarial perturbations for entailment models
over stratified logic programs."""

__version__ = "0.1.0"

DATASET_SCHEMA_VERSION = 1
OUTCOME_SCHEMA_VERSION = 1
CHECKPOINT_SCHEMA_VERSION = 1
PROTOCOL_VERSION = 1

from .logic import (  # noqa: E402,F401
    Atom,
    Literal,
    PerfectModel,
    ProofInfo,
    Query,
    Rule,
    Sample,
    Term,
    Theory,
    entails,
    evaluate,
    extract_proof,
    naive_fixpoint_oracle,
    parse_program,
    parse_query_text,
    program_to_text,
    stratify,
)
from .errors import (  # noqa: E402,F401
    GenerationExhausted,
    InsufficientFacts,
    LogicProbeError,
    NoQueryFound,
    NonFiniteGradient,
    NonStratifiedError,
    ParseError,
    UnsupportedShape,
    VictimUnavailable,
)
from .generate import (  # noqa: E402,F401
    Dataset,
    GenConfig,
    generate_dataset,
    generate_sample,
    generate_theory,
)
from .metrics import f1_sentence_overlap, rouge1, tokenize  # noqa: E402,F401
from .perturb import (  # noqa: E402,F401
    AttackOutcome,
    PerturbConfig,
    PerturbationSet,
    apply_equiv_sub,
    apply_ques_flip,
    apply_sent_elim,
    apply_set,
)
from .policy import (  # noqa: E402,F401
    BaselineState,
    CategoricalParams,
    LearnedPolicy,
    PolicyParameters,
    RandomSelector,
    TrainConfig,
    TrainResult,
    UnigramSelector,
    attack_signal,
    compute_features,
    compute_params,
    reinforce_step,
    sample_perturbation,
    train,
)
from .victims import (  # noqa: E402,F401
    DepthLimitedVictim,
    EchoVictim,
    HttpVictim,
    OracleVictim,
    OverlapHeuristicVictim,
    StdioVictim,
    Victim,
    resolve_victim,
)
from .harness import (  # noqa: E402,F401
    AttackRunConfig,
    RunReport,
    attack_one,
    attack_strength,
    export_rows,
    run_attack,
    stratified_asr,
    transferability,
)
from .seeding import rng_for  # noqa: E402,F401
