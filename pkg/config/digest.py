import logging
import os
from pathlib import Path
from typing import Iterable, Union

from cryptography.hazmat.backends import default_backend
from cryptography.hazmat.primitives import hashes

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16


def _new_hash():
    return hashes.Hash(hashes.SHA256(), backend=default_backend())


def bytes_digest(data: bytes) -> str:
    """计算字节串的 SHA-256"""
    h = _new_hash()
    h.update(data)
    return h.finalize().hex()


def file_digest(path: Union[str, Path]) -> str:
    """计算单个文件的 SHA-256"""
    h = _new_hash()
    with open(path, 'rb') as f:
        while True:
            chunk = f.read(CHUNK_SIZE)
            if not chunk:
                break
            h.update(chunk)
    return h.finalize().hex()


def tree_digest(root: Union[str, Path], exclude: Iterable[str] = ()) -> str:
    """目录摘要：按相对路径排序后逐个文件累加"""
    root = Path(root)
    skip = set(exclude)
    h = _new_hash()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if name in skip:
                continue
            path = Path(dirpath) / name
            rel = path.relative_to(root).as_posix()
            h.update(rel.encode('utf-8'))
            h.update(b'\0')
            h.update(file_digest(path).encode('ascii'))
            h.update(b'\n')
    return h.finalize().hex()


class ContentDigest:
    """记录一组输入文件的摘要，用于运行清单"""

    def __init__(self):
        self.entries = {}

    def add_file(self, label: str, path: Union[str, Path]):
        path = Path(path)
        if path.is_dir():
            self.entries[label] = tree_digest(path)
        elif path.exists():
            self.entries[label] = file_digest(path)
        else:
            logger.warning(f"Digest skipped, missing input: {path}")
        return self

    def combined(self) -> str:
        """所有条目合成一个摘要"""
        payload = '\n'.join(f"{k}={v}" for k, v in sorted(self.entries.items()))
        return bytes_digest(payload.encode('utf-8'))
