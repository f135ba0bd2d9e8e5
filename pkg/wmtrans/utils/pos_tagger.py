"""
规则词性标注: 先查封闭词类词表，再按大小写与后缀判断，默认 NOUN
"""

import re
from typing import List, Optional, Sequence

TAG_SET = ('DET', 'NOUN', 'PROPN', 'VERB', 'PRON', 'CCONJ', 'PUNCT', 'ADJ', 'ADV', 'ADP', 'NUM', 'OTHER')

DETERMINERS = frozenset({
    'a', 'an', 'the', 'this', 'that', 'these', 'those', 'every', 'each', 'some', 'any',
    'no', 'another', 'either', 'neither', 'all', 'both',
})
PRONOUNS = frozenset({
    'i', 'you', 'he', 'she', 'it', 'we', 'they', 'me', 'him', 'her', 'us', 'them',
    'his', 'its', 'our', 'their', 'my', 'your', 'mine', 'yours', 'hers', 'ours', 'theirs',
    'myself', 'yourself', 'himself', 'herself', 'itself', 'ourselves', 'themselves',
    'who', 'whom', 'whose', 'what', 'which', 'someone', 'everyone', 'nobody', 'something',
})
CONJUNCTIONS = frozenset({
    'and', 'or', 'but', 'nor', 'yet', 'so', 'because', 'while', 'although', 'though',
    'if', 'unless', 'whereas', 'since', 'until',
})
ADPOSITIONS = frozenset({
    'in', 'on', 'at', 'by', 'with', 'from', 'to', 'of', 'for', 'into', 'onto', 'over',
    'under', 'near', 'about', 'after', 'before', 'behind', 'between', 'through', 'across',
    'along', 'among', 'around', 'beside', 'beyond', 'inside', 'outside', 'toward', 'upon',
    'within', 'without', 'during', 'against', 'via', 'per', 'up', 'down', 'off', 'out',
})

LEXICON = {}
for _tag, _words in (('ADP', ADPOSITIONS), ('CCONJ', CONJUNCTIONS), ('PRON', PRONOUNS), ('DET', DETERMINERS)):
    for _word in _words:
        LEXICON[_word] = _tag

ADVERB_SUFFIXES = ('ly',)
VERB_SUFFIXES = ('ed', 'ing', 'ize', 'ise')
ADJECTIVE_SUFFIXES = ('ous', 'ful', 'ive', 'ic', 'able', 'ible', 'less', 'ish', 'al')

_NUMBER_RE = re.compile(r'^\d+([.,]\d+)*$')
_PUNCT_RE = re.compile(r'^[^\w\s]+$')


def _suffix_tag(lowered: str) -> Optional[str]:
    if len(lowered) < 4:
        return None
    if lowered.endswith(ADVERB_SUFFIXES):
        return 'ADV'
    if lowered.endswith(VERB_SUFFIXES):
        return 'VERB'
    if lowered.endswith(ADJECTIVE_SUFFIXES):
        return 'ADJ'
    return None


def pos_tag(word: str, position: Optional[int] = None) -> str:
    """position 为句中下标；None 表示上下文未知（例如记忆 token）"""
    if not word:
        return 'OTHER'
    if _PUNCT_RE.match(word):
        return 'PUNCT'
    if _NUMBER_RE.match(word):
        return 'NUM'
    lowered = word.lower()
    if lowered in LEXICON:
        return LEXICON[lowered]
    if not word.isalpha():
        return 'OTHER'
    suffix = _suffix_tag(lowered)
    if word[0].isupper():
        if position is not None and position > 0:
            return 'PROPN'
        if position is None and suffix is None:
            return 'PROPN'
    return suffix or 'NOUN'


def tag_sentence(tokens: Sequence[str]) -> List[str]:
    return [pos_tag(token, i) for i, token in enumerate(tokens)]
