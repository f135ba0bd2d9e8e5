"""
分级合成平行语料

目标端是规则生成的类英语句子，源端是一种 SOV 语序、名词在形容词前、使用后置词的伪语言。
四个等级依次增大词表、压平 Zipf 分布，并加入多词表达、专有名词、指代歧义从句与数字。
每个目标 token 带有生成时的金标准词性。
"""

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import _MappingMixin, parse_key_values
from ..errors import InputError
from ..models.records import ParallelPair
from ..models.vocabulary import tokenize_words
from ..utils.pos_tagger import LEXICON
from ..utils.stoplist import load_stoplist

logger = logging.getLogger(__name__)

TIERS = (1, 2, 3, 4)
LEXICON_SEED = 7919

_ONSETS = 'bdfgklmnprstvz'
_VOWELS = 'aeiou'
# 这些词尾不会触发词性后缀规则
_CODAS = 'nrtkmpxz'
_ADJ_SUFFIXES = ('ous', 'ful', 'ive', 'ic')
_SOURCE_ONSETS = ('h', 'j', 'q', 'w', 'x', 'c', 'y', 'sh', 'ch')
_SOURCE_VOWELS = 'aiuoe'

DETERMINERS = ('the', 'this', 'that', 'every', 'some', 'each', 'another')
ADPOSITIONS = ('in', 'on', 'with', 'near', 'under', 'from', 'for', 'behind')
CONJUNCTIONS = ('and', 'but', 'or')
CAUSAL = 'because'
PRONOUNS = ('he', 'she')

SOURCE_FUNCTION_WORDS = {
    'the': 'ko', 'this': 'si', 'that': 'sa', 'every': 've', 'some': 'mo', 'each': 'ke', 'another': 'ano',
    'in': 'de', 'on': 'ue', 'with': 'pa', 'near': 'ri', 'under': 'ta', 'from': 'ga', 'for': 'bo', 'behind': 'zu',
    'and': 'ti', 'but': 'mu', 'or': 'vo', 'because': 'zan', 'he': 'ho', 'she': 'sho',
}

IT_NOUNS = (
    'server', 'router', 'kernel', 'cache', 'cluster', 'container', 'database', 'driver', 'firewall',
    'folder', 'gateway', 'host', 'index', 'laptop', 'monitor', 'network', 'packet', 'password', 'printer',
    'process', 'proxy', 'queue', 'script', 'socket', 'switch', 'thread', 'token', 'update', 'user',
    'volume', 'backup', 'browser', 'buffer', 'client', 'compiler', 'console', 'cursor', 'daemon', 'desktop',
    'device', 'domain', 'editor', 'file', 'format', 'keyboard', 'module', 'mouse', 'node', 'patch',
    'pointer', 'port', 'query', 'registry', 'schema', 'sensor', 'session', 'shell', 'tablet', 'timeout',
    'widget', 'account', 'adapter', 'bug', 'byte', 'cookie', 'core', 'disk', 'email', 'hub', 'icon',
    'image', 'link', 'log', 'memory', 'menu', 'modem', 'plugin', 'screen', 'storage', 'tab', 'task',
    'version', 'virus', 'window', 'bit', 'service', 'interface', 'package', 'chip', 'kiosk', 'backlog',
    'endpoint', 'payload', 'bucket', 'sandbox', 'snapshot', 'bridge', 'tunnel', 'cipher', 'certificate',
)
IT_PROPER_NOUNS = (
    'Linux', 'Debian', 'Ubuntu', 'Windows', 'Python', 'Java', 'Docker', 'Redis', 'Nginx', 'Apache',
    'Oracle', 'Kafka', 'Git', 'Firefox', 'Chrome', 'Android', 'Intel', 'Nvidia', 'Postgres', 'Kubernetes',
    'Jenkins', 'Gradle', 'Maven', 'Emacs', 'Vim', 'Excel', 'Outlook', 'Skype', 'Slack', 'Zoom',
    'Dropbox', 'Safari', 'Opera', 'Perl', 'Ruby', 'Rust', 'Fedora', 'Mint', 'Solaris', 'Unix',
    'Azure', 'Heroku', 'Jira', 'Trello', 'Figma', 'Unity', 'Blender', 'Steam',
)
EVERYDAY_MWES = (
    ('bus', 'stop'), ('post', 'office'), ('front', 'door'), ('tea', 'cup'), ('ice', 'cream'),
    ('car', 'park'), ('train', 'station'), ('phone', 'call'), ('birthday', 'cake'), ('coffee', 'shop'),
    ('rain', 'coat'), ('book', 'shop'), ('fire', 'truck'), ('school', 'bag'), ('garden', 'gate'),
)
IT_MWES = (
    ('hard', 'disk'), ('file', 'system'), ('access', 'point'), ('web', 'server'), ('data', 'center'),
    ('user', 'account'), ('mouse', 'button'), ('source', 'code'), ('error', 'message'), ('task', 'bar'),
    ('home', 'page'), ('search', 'engine'), ('login', 'screen'), ('power', 'button'), ('text', 'editor'),
    ('boot', 'sector'), ('disk', 'image'), ('network', 'card'), ('port', 'number'), ('job', 'queue'),
    ('memory', 'leak'), ('stack', 'trace'), ('time', 'zone'), ('cloud', 'storage'), ('screen', 'lock'),
)

_TAG_CODES = {'DET': 'd', 'ADJ': 'j', 'NOUN': 'n', 'PROPN': 'p', 'NUM': 'u', 'PRON': 'r',
              'VERB': 'v', 'ADP': 'a', 'ADV': 'b', 'CCONJ': 'c', 'OTHER': 'o'}


@dataclass(frozen=True)
class GeneratorConfig(_MappingMixin):
    tier: int = 1
    n_nouns: int = 20
    n_verbs: int = 12
    n_adjs: int = 8
    n_advs: int = 4
    n_names: int = 0
    it_vocabulary: bool = False
    zipf: float = 1.1
    p_adj: float = 0.3
    max_adjs: int = 1
    p_pp: float = 0.1
    p_adv: float = 0.2
    p_coord: float = 0.0
    p_because: float = 0.0
    p_name: float = 0.0
    p_number: float = 0.0
    p_mwe: float = 0.0
    lowercase: bool = True


TIER_DEFAULTS = {
    1: GeneratorConfig(),
    2: GeneratorConfig(tier=2, n_nouns=80, n_verbs=40, n_adjs=30, n_advs=20, zipf=1.0, p_adj=0.4,
                       max_adjs=2, p_pp=0.3, p_adv=0.3, p_coord=0.2, p_mwe=0.1, lowercase=False),
    3: GeneratorConfig(tier=3, n_nouns=160, n_verbs=80, n_adjs=60, n_advs=30, n_names=20, zipf=0.9,
                       p_adj=0.4, max_adjs=2, p_pp=0.3, p_adv=0.3, p_coord=0.2, p_because=0.5,
                       p_name=0.2, p_mwe=0.1, lowercase=False),
    4: GeneratorConfig(tier=4, n_nouns=200, n_verbs=120, n_adjs=80, n_advs=30, n_names=72,
                       it_vocabulary=True, zipf=0.8, p_adj=0.5, max_adjs=3, p_pp=0.5, p_adv=0.3,
                       p_coord=0.3, p_because=0.2, p_name=0.25, p_number=0.2, p_mwe=0.25, lowercase=False),
}


def default_generator_config(tier: int) -> GeneratorConfig:
    if tier not in TIER_DEFAULTS:
        raise InputError(f"unknown tier {tier}; expected one of {TIERS}")
    return TIER_DEFAULTS[tier]


def load_generator_config(path, tier: int) -> GeneratorConfig:
    """等级默认值之上叠加键值文件中的设置"""
    base = default_generator_config(tier).to_dict()
    overrides = parse_key_values(path, GeneratorConfig.keys())
    if 'tier' in overrides and int(overrides['tier']) != tier:
        raise InputError(f"{path}: config is for tier {overrides['tier']}, not {tier}")
    return GeneratorConfig.from_mapping({**base, **overrides})


@dataclass(frozen=True)
class Lexicon:
    nouns: Tuple[str, ...]
    verbs: Tuple[str, ...]
    adjs: Tuple[str, ...]
    advs: Tuple[str, ...]
    names: Tuple[str, ...]
    mwes: Tuple[Tuple[str, str], ...]
    # 目标词（多词表达以空格连接）到源端词
    source: Dict[str, str]


def _pseudo_stems(rng: np.random.Generator, count: int, taken: set) -> List[str]:
    stems = []
    while len(stems) < count:
        letters = (_ONSETS, _VOWELS, _ONSETS, _VOWELS, _CODAS)
        stem = ''.join(pool[int(rng.integers(len(pool)))] for pool in letters)
        if stem in taken:
            continue
        taken.add(stem)
        stems.append(stem)
    return stems


def _source_words(rng: np.random.Generator, count: int, taken: set) -> List[str]:
    words = []
    while len(words) < count:
        word = ''.join(_SOURCE_ONSETS[int(rng.integers(len(_SOURCE_ONSETS)))]
                       + _SOURCE_VOWELS[int(rng.integers(len(_SOURCE_VOWELS)))] for _ in range(3))
        if word in taken:
            continue
        taken.add(word)
        words.append(word)
    return words


@lru_cache(maxsize=16)
def build_lexicon(config: GeneratorConfig) -> Lexicon:
    """词表只依赖等级配置，不依赖样本种子"""
    rng = np.random.default_rng([LEXICON_SEED, config.tier])
    taken = set(LEXICON) | set(load_stoplist()) | set(IT_NOUNS) | {w for pair in IT_MWES + EVERYDAY_MWES for w in pair}
    total = config.n_nouns + config.n_verbs + config.n_adjs + config.n_advs + config.n_names
    stems = iter(_pseudo_stems(rng, total, taken))

    nouns = list(IT_NOUNS) if config.it_vocabulary else []
    nouns += [next(stems) for _ in range(config.n_nouns)]
    verbs = [next(stems) + 'ed' for _ in range(config.n_verbs)]
    adjs = [next(stems) + _ADJ_SUFFIXES[i % len(_ADJ_SUFFIXES)] for i in range(config.n_adjs)]
    advs = [next(stems) + 'ly' for _ in range(config.n_advs)]
    names = list(IT_PROPER_NOUNS) if config.it_vocabulary else []
    names += [next(stems).capitalize() + ('a' if i % 2 else 'o') for i in range(config.n_names)]
    mwes = list(EVERYDAY_MWES) if config.p_mwe > 0 else []
    if config.it_vocabulary:
        mwes += list(IT_MWES)

    content = nouns + verbs + adjs + advs + [' '.join(m) for m in mwes]
    source_taken = set(SOURCE_FUNCTION_WORDS.values())
    mapping = dict(zip(content, _source_words(rng, len(content), source_taken)))
    mapping.update(SOURCE_FUNCTION_WORDS)
    return Lexicon(tuple(nouns), tuple(verbs), tuple(adjs), tuple(advs), tuple(names), tuple(mwes), mapping)


def _zipf_weights(size: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.power(np.arange(1, size + 1, dtype=np.float64), exponent)
    return weights / weights.sum()


class _SentenceBuilder:
    """逐个成分拼出目标 token、金标准词性与源端 token"""

    def __init__(self, lexicon: Lexicon, config: GeneratorConfig, rng: np.random.Generator):
        self.lex = lexicon
        self.cfg = config
        self.rng = rng
        self._weights = {}

    def _pick(self, words: Sequence):
        key = id(words)
        if key not in self._weights:
            self._weights[key] = _zipf_weights(len(words), self.cfg.zipf)
        return words[int(self.rng.choice(len(words), p=self._weights[key]))]

    def _uniform(self, words: Sequence):
        return words[int(self.rng.integers(len(words)))]

    def noun_phrase(self, allow_name: bool = True):
        """返回 (目标 tokens, 词性, 源端 tokens)"""
        cfg = self.cfg
        if allow_name and self.lex.names and self.rng.random() < cfg.p_name:
            name = self._pick(self.lex.names)
            return [name], ['PROPN'], [name]
        if cfg.p_number > 0 and self.rng.random() < cfg.p_number:
            number = str(int(self.rng.integers(2, 10000)))
            noun = self._pick(self.lex.nouns)
            return [number, noun], ['NUM', 'NOUN'], [self.lex.source[noun], number]
        det = self._uniform(DETERMINERS)
        adjs = []
        while len(adjs) < cfg.max_adjs and self.rng.random() < cfg.p_adj:
            adjs.append(self._pick(self.lex.adjs))
        if self.lex.mwes and self.rng.random() < cfg.p_mwe:
            head = list(self._uniform(self.lex.mwes))
            src_head = self.lex.source[' '.join(head)]
        else:
            noun = self._pick(self.lex.nouns)
            head, src_head = [noun], self.lex.source[noun]
        target = [det] + adjs + head
        tags = ['DET'] + ['ADJ'] * len(adjs) + ['NOUN'] * len(head)
        source = [src_head] + [self.lex.source[a] for a in adjs] + [SOURCE_FUNCTION_WORDS[det]]
        return target, tags, source

    def clause(self, subject=None):
        subject = subject or self.noun_phrase()
        obj = self.noun_phrase()
        verb = self._pick(self.lex.verbs)
        target, tags = subject[0] + [verb] + obj[0], subject[1] + ['VERB'] + obj[1]
        source = subject[2] + obj[2]
        if self.rng.random() < self.cfg.p_pp:
            adp = self._uniform(ADPOSITIONS)
            np_ = self.noun_phrase()
            target, tags = target + [adp] + np_[0], tags + ['ADP'] + np_[1]
            source = source + np_[2] + [SOURCE_FUNCTION_WORDS[adp]]
        return target, tags, source + [self.lex.source[verb]]

    def sentence(self):
        cfg, lex = self.cfg, self.lex
        target, tags, source = [], [], []
        causal = bool(lex.names) and self.rng.random() < cfg.p_because
        if causal:
            # 主语与宾语都是人名，从句中的代词指代不明
            first = self.clause(subject=self._name_phrase())
        else:
            first = self.clause()
        fronted = bool(lex.advs) and (first[1][0] == 'PROPN' or self.rng.random() < cfg.p_adv / 2)
        if fronted:
            adv = self._pick(lex.advs)
            target, tags, source = [adv, ','], ['ADV', 'PUNCT'], [lex.source[adv], ',']
        target, tags, source = target + first[0], tags + first[1], source + first[2]
        if causal:
            pron, verb = self._uniform(PRONOUNS), self._pick(lex.verbs)
            obj = self.noun_phrase()
            target += [CAUSAL, pron, verb] + obj[0]
            tags += ['CCONJ', 'PRON', 'VERB'] + obj[1]
            source += [SOURCE_FUNCTION_WORDS[CAUSAL], SOURCE_FUNCTION_WORDS[pron]] + obj[2] + [lex.source[verb]]
        elif self.rng.random() < cfg.p_coord:
            conj = self._uniform(CONJUNCTIONS)
            second = self.clause()
            target, tags = target + [conj] + second[0], tags + ['CCONJ'] + second[1]
            source = source + [SOURCE_FUNCTION_WORDS[conj]] + second[2]
        if lex.advs and not fronted and self.rng.random() < cfg.p_adv:
            adv = self._pick(lex.advs)
            target, tags = target + [adv], tags + ['ADV']
            source = source + [lex.source[adv]]
        return target + ['.'], tags + ['PUNCT'], source + ['.']

    def _name_phrase(self):
        name = self._pick(self.lex.names)
        return [name], ['PROPN'], [name]


def _render(tokens: List[str], capitalize: bool) -> str:
    if capitalize and tokens:
        tokens = [tokens[0][:1].upper() + tokens[0][1:]] + tokens[1:]
    text = ' '.join(tokens)
    return re.sub(r' ([,.])', r'\1', text)


def generate_synthetic_tier(tier: int, n: int, seed: int, config: Optional[GeneratorConfig] = None) -> List[ParallelPair]:
    """同一 (tier, n, seed, config) 总是生成相同的样本"""
    if tier not in TIERS:
        raise InputError(f"unknown tier {tier}; expected one of {TIERS}")
    if n <= 0:
        raise InputError(f"sample count must be positive, got {n}")
    config = config or default_generator_config(tier)
    if config.tier != tier:
        raise InputError(f"generator config is for tier {config.tier}, not {tier}")
    lexicon = build_lexicon(config)
    rng = np.random.default_rng([tier, seed])
    builder = _SentenceBuilder(lexicon, config, rng)
    pairs = []
    for _ in range(n):
        target, tags, source = builder.sentence()
        capitalize = not config.lowercase
        pairs.append(ParallelPair(_render(source, capitalize), _render(target, capitalize),
                                  f"tier{tier}", tuple(tags)))
    logger.info(f"Generated {n} tier-{tier} pairs (seed {seed})")
    return pairs


def tier_grammar(config: GeneratorConfig) -> re.Pattern:
    """等级语法，作用在词性编码串上，标点保留原字符"""
    heads = ['dj*n' + ('n?' if config.p_mwe > 0 else '')]
    if config.n_names or config.it_vocabulary:
        heads.append('p')
    if config.p_number > 0:
        heads.append('un')
    np_ = f"(?:{'|'.join(heads)})"
    clause = f"{np_}v{np_}(?:a{np_})?"
    tail = f"(?:c{clause}|crv{np_})?"
    return re.compile(f"^(?:b,)?{clause}{tail}b?\\.$")


def encode_tags(tokens: Sequence[str], tags: Sequence[str]) -> str:
    return ''.join(tok if tag == 'PUNCT' else _TAG_CODES.get(tag, 'o') for tok, tag in zip(tokens, tags))


def parse_target(text: str, tags: Sequence[str], config: GeneratorConfig) -> bool:
    """目标句的词性序列能否被该等级语法接受"""
    tokens = tokenize_words(text)
    if len(tokens) != len(tags):
        return False
    return tier_grammar(config).match(encode_tags(tokens, tags)) is not None


def type_token_ratio(pairs: Sequence[ParallelPair]) -> float:
    tokens = [t for p in pairs for t in tokenize_words(p.reference, lowercase=True)]
    return len(set(tokens)) / len(tokens) if tokens else 0.0
