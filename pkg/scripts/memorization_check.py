"""
记忆化检查: 在小型复制语料或等级 1 语料上训练，并在训练集上打分

    python -m scripts.memorization_check --out runs/memo --epochs 30
    python -m scripts.memorization_check --out runs/memo_base --mem-size 0
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from config.settings import RunSettings
from wmtrans.models.records import ParallelPair
from wmtrans.models.vocabulary import build_vocab
from wmtrans.services.synthetic_service import generate_synthetic_tier
from wmtrans.services.train_service import TrainingService
from wmtrans.utils.data_formatter import DataFormatter
from wmtrans.validators import ConfigValidator

logger = logging.getLogger(__name__)

PASS_BLEU = 95.0


def copy_corpus(n: int, vocab_size: int, seed: int, min_len: int = 3, max_len: int = 8):
    """源句与目标句相同的随机词序列"""
    rng = np.random.default_rng(seed)
    words = [f"w{i:02d}" for i in range(vocab_size)]
    pairs = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        sentence = ' '.join(words[int(i)] for i in rng.integers(0, vocab_size, length))
        pairs.append(ParallelPair(sentence, sentence, 'copy'))
    return pairs


def memorization_check(out_dir, corpus='copy', n=500, vocab_size=58, mem_size=10, epochs=30, seed=13,
                       config_path=None):
    """训练集即评测集，返回最后一个 epoch 的 BLEU-4"""
    pairs = copy_corpus(n, vocab_size, seed) if corpus == 'copy' else generate_synthetic_tier(1, n, seed)
    settings = RunSettings.load(config_path, mem_size=mem_size, epochs=epochs, seed=seed,
                                warm=min(5, epochs - 1), eval_limit=n)
    ConfigValidator(settings).ensure_valid()
    src_vocab = build_vocab([p.source for p in pairs])
    tgt_vocab = build_vocab([p.reference for p in pairs])
    service = TrainingService(settings, src_vocab, tgt_vocab)
    service.run_training(pairs, pairs, out_dir)
    last = DataFormatter.read_csv(Path(out_dir) / 'metrics.csv')[-1]
    return float(last['bleu'])


def main():
    parser = argparse.ArgumentParser(description='训练集记忆化检查')
    parser.add_argument('--out', required=True, help='输出目录')
    parser.add_argument('--corpus', choices=['copy', 'tier1'], default='copy')
    parser.add_argument('--n', type=int, default=500)
    parser.add_argument('--vocab-size', type=int, default=58, help='复制语料的词数（不含 4 个保留符号）')
    parser.add_argument('--mem-size', type=int, default=10)
    parser.add_argument('--epochs', type=int, default=30)
    parser.add_argument('--seed', type=int, default=13)
    parser.add_argument('--config', default=None)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
    bleu = memorization_check(args.out, args.corpus, args.n, args.vocab_size, args.mem_size,
                              args.epochs, args.seed, args.config)
    if bleu >= PASS_BLEU:
        print(f"[✓] 训练集 BLEU-4 {DataFormatter.format_score(bleu)} >= {PASS_BLEU}")
        return 0
    print(f"[✗] 训练集 BLEU-4 {DataFormatter.format_score(bleu)} < {PASS_BLEU}")
    return 1


if __name__ == '__main__':
    print("=" * 50)
    print("记忆化检查".center(40))
    print("=" * 50)
    sys.exit(main())
