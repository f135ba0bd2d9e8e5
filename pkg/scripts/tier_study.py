"""
等级研究: 四个复杂度等级各训练一次，比较分数与记忆内容

    python -m scripts.tier_study --out runs/tiers --n 500 --epochs 20
"""

import argparse
import logging
import sys
from pathlib import Path

from config.settings import RunSettings
from wmtrans.models.vocabulary import build_vocab
from wmtrans.services.analysis_service import build_report
from wmtrans.services.corpus_service import dedup
from wmtrans.services.synthetic_service import TIERS, generate_synthetic_tier, type_token_ratio
from wmtrans.services.train_service import TrainingService, load_predictions
from wmtrans.utils.data_formatter import DataFormatter
from wmtrans.validators import ConfigValidator

logger = logging.getLogger(__name__)

STUDY_HEADER = ('tier', 'train_pairs', 'type_token_ratio', 'bleu', 'meteor_lite')


def run_tier(tier, out_dir, n, eval_n, settings):
    """返回 (汇总行, 最后一个 epoch 的预测导出)"""
    pairs = dedup(generate_synthetic_tier(tier, n + eval_n, settings.train.seed))
    train, evaluation = pairs[:len(pairs) - eval_n], pairs[len(pairs) - eval_n:]
    service = TrainingService(settings, build_vocab([p.source for p in train]),
                              build_vocab([p.reference for p in train]))
    service.run_training(train, evaluation, out_dir)
    last = DataFormatter.read_csv(Path(out_dir) / 'metrics.csv')[-1]
    records = load_predictions(Path(out_dir) / 'dumps' / f"epoch_{settings.train.epochs:03d}.jsonl")
    row = [tier, len(train), type_token_ratio(train), float(last['bleu']), float(last['meteor'])]
    return row, records


def tier_study(out_dir, n=500, eval_n=100, epochs=20, mem_size=10, seed=13, config_path=None):
    settings = RunSettings.load(config_path, epochs=epochs, mem_size=mem_size, seed=seed,
                                eval_limit=eval_n, dump_every=epochs)
    ConfigValidator(settings).ensure_valid()
    out_dir = Path(out_dir)
    rows, corpora = [], {}
    for tier in TIERS:
        row, records = run_tier(tier, out_dir / f"tier{tier}", n, eval_n, settings)
        rows.append(row)
        corpora[f"tier{tier}"] = records
        print(f"[✓] tier{tier}: BLEU-4 {DataFormatter.format_score(row[3])}, "
              f"METEOR-lite {DataFormatter.format_score(row[4])}")
    table = DataFormatter.write_csv(out_dir / 'tier_study.csv', STUDY_HEADER, rows)
    comparisons = [(f"tier{a}", f"tier{b}") for a, b in zip(TIERS, TIERS[1:])]
    build_report(corpora, out_dir / 'report', comparisons, settings.model.mem_size)
    return table


def main():
    parser = argparse.ArgumentParser(description='按复杂度等级训练并比较')
    parser.add_argument('--out', required=True)
    parser.add_argument('--n', type=int, default=500)
    parser.add_argument('--eval-n', type=int, default=100)
    parser.add_argument('--epochs', type=int, default=20)
    parser.add_argument('--mem-size', type=int, default=10)
    parser.add_argument('--seed', type=int, default=13)
    parser.add_argument('--config', default=None)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
    table = tier_study(args.out, args.n, args.eval_n, args.epochs, args.mem_size, args.seed, args.config)
    print(f"\n[✓] 汇总 -> {table}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
