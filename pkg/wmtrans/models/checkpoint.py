"""
检查点读写

格式: 魔数行, 8 字节小端头部长度, JSON 头部 (配置、数组名、形状、dtype、元信息),
随后按头部顺序排列的原始数组字节。不含时间戳，同样的内容写出的文件逐字节相同。
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional

import numpy as np

from config.settings import ModelConfig
from ..autograd import Tensor
from ..errors import InputError

logger = logging.getLogger(__name__)

MAGIC = b"WMTCKPT1\n"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray] = field(default_factory=dict)
    meta: Dict = field(default_factory=dict)

    @property
    def epoch(self) -> int:
        return int(self.meta.get('epoch', 0))

    def tensors(self) -> Dict[str, Tensor]:
        return {name: Tensor(array, requires_grad=True, name=name, dtype=array.dtype)
                for name, array in self.params.items()}


def _entries(prefix: str, arrays: Mapping[str, np.ndarray]):
    for name in arrays:
        array = np.ascontiguousarray(arrays[name])
        yield f"{prefix}{name}", array


def save_checkpoint(path, config: ModelConfig, params: Mapping, optimizer: Optional[Mapping] = None,
                    meta: Optional[Dict] = None):
    """params 可以是 Tensor 或 ndarray 的映射"""
    params = {name: (p.data if isinstance(p, Tensor) else np.asarray(p)) for name, p in params.items()}
    entries = list(_entries('param:', params)) + list(_entries('optim:', optimizer or {}))
    header = {
        'version': FORMAT_VERSION,
        'config': config.to_dict(),
        'meta': meta or {},
        'arrays': [{'name': name, 'shape': list(array.shape), 'dtype': array.dtype.str}
                   for name, array in entries],
    }
    blob = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<Q', len(blob)))
        f.write(blob)
        for _, array in entries:
            f.write(array.tobytes(order='C'))
    logger.info(f"Saved checkpoint {path} ({len(params)} params)")
    return path


def load_checkpoint(path) -> Checkpoint:
    with open(path, 'rb') as f:
        raw = f.read()
    if not raw.startswith(MAGIC):
        raise InputError(f"{path} is not a checkpoint file")
    offset = len(MAGIC)
    try:
        (size,) = struct.unpack_from('<Q', raw, offset)
        offset += 8
        header = json.loads(raw[offset:offset + size].decode('utf-8'))
    except (struct.error, ValueError):
        raise InputError(f"{path}: corrupt checkpoint header")
    offset += size
    if header.get('version') != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {header.get('version')}")

    params, optimizer = {}, {}
    for entry in header['arrays']:
        dtype = np.dtype(entry['dtype'])
        shape = tuple(entry['shape'])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + nbytes > len(raw):
            raise InputError(f"{path}: truncated array {entry['name']}")
        array = np.frombuffer(raw, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset).reshape(shape).copy()
        offset += nbytes
        kind, name = entry['name'].split(':', 1)
        (params if kind == 'param' else optimizer)[name] = array
    if offset != len(raw):
        raise InputError(f"{path}: trailing bytes after arrays")
    return Checkpoint(ModelConfig.from_mapping(header['config']), params, optimizer, header.get('meta', {}))
