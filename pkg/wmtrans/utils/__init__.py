from .data_formatter import DataFormatter
from .pos_tagger import TAG_SET, pos_tag, tag_sentence
from .rake import rake_extract, rake_scores
from .stats import ols_fit, trend_fit, wilcoxon_rank_sum, wilson_interval
from .stoplist import STOPLIST_SHA256, load_stoplist
