from .records import (
    MEMORY_FLAG,
    TARGET_FLAG,
    CorpusStats,
    DecodeStep,
    DiversityStats,
    ParallelPair,
    PosDistribution,
    PredictionRecord,
    ProbabilityWithCI,
    RankSumResult,
    RoutedSequence,
    RunManifest,
    ScorePair,
    ScoredKeyword,
    TrendFit,
)
from .vocabulary import (
    END_ID,
    PAD_ID,
    START_ID,
    UNK_ID,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    merge_subword_pieces,
    tokenize_words,
)
from .masks import make_look_ahead_mask, make_memory_ablation_mask
from .transformer import (
    ActivationTrace,
    EncoderOutput,
    WorkingMemoryTransformer,
    decoder_layer_forward,
    embed_tokens_with_flags,
    encoder_forward,
    init_params,
    positional_encoding,
    project_output,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
