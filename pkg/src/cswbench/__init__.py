"""cswbench: code-switched text generation, benchmark switching, and evaluation."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    AR,
    DE,
    EN,
    FR,
    ZH,
    BenchmarkItem,
    LanguageCode,
    ParallelPair,
    Token,
    language,
    load_benchmark,
    load_parallel_corpus,
    tokenize,
)
from .align import AlignmentLink, AlignmentSet, align_pair, dice_scores, train_ibm1  # noqa: F401
from .tag import Pos, TaggedToken, tag_tokens  # noqa: F401
from .switchgen import (  # noqa: F401
    MASK,
    CswInstance,
    Method,
    SwitchPlan,
    SwitchPoint,
    apply_switch_plan,
    generate_instance,
    mask_placeholders,
    select_extreme_switch_points,
    select_noun_switch_points,
    select_ratio_switch_points,
)
from .gateway import judge_pair, llm_generate_csw, prepend_mitigation, render  # noqa: F401
from .judging import PreferenceReport, aggregate_verdicts, run_comparison  # noqa: F401
from .evalbench import (  # noqa: F401
    AccuracyReport,
    CswBenchmark,
    EvalRecord,
    ModelRef,
    accuracy,
    accuracy_delta,
    build_csw_benchmark,
    evaluate,
    summarize,
    weighted_accuracy,
)
from .ift import IftExample, build_ift_dataset, filter_long  # noqa: F401
