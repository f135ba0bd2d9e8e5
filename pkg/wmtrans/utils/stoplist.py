"""
随仓库发布的英文功能词表，按 SHA-256 固定版本
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, Optional

from config.digest import file_digest
from ..errors import InputError

logger = logging.getLogger(__name__)

STOPLIST_PATH = Path(__file__).parent / 'data' / 'stoplist_en.txt'
STOPLIST_SHA256 = '2b494abac41352008b1bb723d6bf694e35da90bd0c4f5e9fcb4b0b3eebd0a400'


def read_stoplist(path) -> FrozenSet[str]:
    words = set()
    with open(path, 'r', encoding='utf-8') as f:
        for raw in f:
            word = raw.strip().lower()
            if word and not word.startswith('#'):
                words.add(word)
    return frozenset(words)


@lru_cache(maxsize=4)
def load_stoplist(path: Optional[str] = None, verify: bool = True) -> FrozenSet[str]:
    """默认读取内置词表，并校验摘要"""
    if path is None:
        if verify:
            actual = file_digest(STOPLIST_PATH)
            if actual != STOPLIST_SHA256:
                raise InputError(f"stoplist digest mismatch: {actual}")
        return read_stoplist(STOPLIST_PATH)
    logger.info(f"Using custom stoplist {path}")
    return read_stoplist(path)
