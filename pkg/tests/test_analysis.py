import tempfile
import unittest
from pathlib import Path

from wmtrans.errors import InputError
from wmtrans.models.records import PredictionRecord
from wmtrans.services.analysis_service import (
    REFERENCES,
    build_report,
    content_word_probability,
    diversity_by_length,
    diversity_histogram,
    epoch_diversity_trend,
    keyword_hit,
    keyword_in_memory_probability,
    load_labelled_dumps,
    memory_words,
    pairwise_tests,
    pos_distribution,
    unique_memory_tokens,
)
from wmtrans.services.train_service import dump_header, load_predictions, write_predictions
from wmtrans.utils.data_formatter import DataFormatter

FIXTURES = Path(__file__).parent / 'fixtures'


def rec(pred, mem, ref=None, epoch=1, tag='t'):
    return PredictionRecord(src='src', pred=pred, mem=list(mem), flags=[1] + [0] * len(mem) + [1],
                            tag=tag, epoch=epoch, seed=0, ref=ref)


CORPUS_A = [
    rec('the server crashed', ['server', 'the', 'server'], 'the server crashed'),
    rec('a cat', [], 'a cat'),
    rec('he ran away quickly', ['Linux', 'ran'], 'he ran'),
]
CORPUS_B = [
    rec('the router', ['router'], 'the router'),
    rec('the disk failed', ['disk', 'failed', 'the'], 'the disk failed'),
]
GOLDEN_CORPORA = {
    'C': [
        rec('the server crashed', ['server', 'crashed'], 'the server crashed'),
        rec('the disk failed', ['disk'], 'the disk failed'),
    ],
    'D': [
        rec('a cat', [], 'a cat'),
        rec('the router', ['the'], 'the router'),
    ],
}


class TestDiversity(unittest.TestCase):
    def test_unique_tokens_ignore_case(self):
        """去重前先去空白并转小写"""
        self.assertEqual(unique_memory_tokens(rec('x', ['Cat', 'cat ', 'dog'])), 2)

    def test_histogram_lists_every_bin(self):
        """0..M 每个 bin 都出现，空记忆计入 0"""
        stats = diversity_histogram(CORPUS_A, mem_size=3)
        self.assertEqual(stats.histogram, {0: 1, 1: 0, 2: 2, 3: 0})
        self.assertAlmostEqual(stats.mean, 4 / 3)

    def test_histogram_overflow(self):
        """唯一记忆数超过 M 时报错"""
        with self.assertRaises(InputError):
            diversity_histogram(CORPUS_B, mem_size=2)

    def test_epoch_trend(self):
        """平均多样性每个 epoch 减 1，斜率为 -1"""
        dumps = {epoch: [rec('x', [str(i) for i in range(4 - epoch)], epoch=epoch)] for epoch in (1, 2, 3)}
        fit = epoch_diversity_trend(dumps)
        self.assertAlmostEqual(fit.slope, -1.0)
        self.assertAlmostEqual(fit.intercept, 4.0)
        with self.assertRaises(InputError):
            epoch_diversity_trend({1: CORPUS_A})

    def test_length_buckets(self):
        """按预测长度分桶，x 为桶起点"""
        records = [rec('a b', ['a']), rec('a b c', ['a', 'b', 'c']), rec('a b c d e f', [])]
        fit = diversity_by_length(records, width=5)
        self.assertEqual(fit.xs, [0.0, 5.0])
        self.assertEqual(fit.means, [2.0, 0.0])
        self.assertEqual(fit.sizes, [2, 1])
        self.assertAlmostEqual(fit.slope, -0.4)

    def test_single_bucket_is_undefined(self):
        fit = diversity_by_length(CORPUS_A, width=5)
        self.assertFalse(fit.defined)


class TestKeywordsAndContent(unittest.TestCase):
    def test_memory_words_merge_subwords(self):
        """子词片段合成词，尾部未闭合的片段标记为不完整"""
        record = rec('x', ['serv@@', 'er', 'rou@@'])
        self.assertEqual(memory_words(record), [('server', True), ('rou', False)])

    def test_keyword_hit(self):
        """RAKE 关键词的成员词出现在记忆中即命中"""
        self.assertTrue(keyword_hit(CORPUS_A[0]))
        self.assertFalse(keyword_hit(CORPUS_A[1]))
        self.assertTrue(keyword_hit(CORPUS_A[2], REFERENCES))

    def test_incomplete_piece_does_not_hit(self):
        self.assertFalse(keyword_hit(rec('the server crashed', ['server@@'])))

    def test_missing_reference(self):
        with self.assertRaises(InputError):
            keyword_hit(rec('the server', ['server']), REFERENCES)

    def test_probabilities(self):
        """两个语料的命中数与 Wilson 区间"""
        p = keyword_in_memory_probability(CORPUS_A)
        self.assertEqual((p.hits, p.n), (2, 3))
        self.assertTrue(p.lower < 2 / 3 < p.upper)
        content = content_word_probability(CORPUS_B)
        self.assertEqual((content.hits, content.n, content.estimate), (2, 2, 1.0))

    def test_function_words_are_not_content(self):
        self.assertEqual(content_word_probability([rec('x', ['the', 'of', ','])]).hits, 0)


class TestPosDistribution(unittest.TestCase):
    def test_counts_per_record(self):
        """每条记录按该词性唯一记忆词个数计入对应列"""
        distribution = pos_distribution(CORPUS_A + CORPUS_B, mem_size=3)
        self.assertEqual(distribution.counts['NOUN'], {1: 4, 2: 0, 3: 0})
        self.assertEqual(distribution.counts['DET'], {1: 2, 2: 0, 3: 0})
        self.assertEqual(distribution.counts['PROPN'], {1: 1, 2: 0, 3: 0})
        self.assertEqual(distribution.counts['VERB'], {1: 1, 2: 0, 3: 0})


class TestPairwise(unittest.TestCase):
    def test_diversity_rank_sum(self):
        """[2,0,2] 对 [1,3]: 秩和 8，10 种分组中 7 种同样极端"""
        rows = pairwise_tests({'A': CORPUS_A, 'B': CORPUS_B}, metrics=('diversity',))
        self.assertEqual(len(rows), 1)
        metric, a, b, n_a, n_b, statistic, p_value, method = rows[0]
        self.assertEqual((metric, a, b, n_a, n_b, method), ('diversity', 'A', 'B', 3, 2, 'exact'))
        self.assertEqual(statistic, 8.0)
        self.assertAlmostEqual(p_value, 0.7)

    def test_unknown_label(self):
        with self.assertRaises(InputError):
            pairwise_tests({'A': CORPUS_A}, comparisons=[('A', 'C')])

    def test_reference_metric_skipped_without_refs(self):
        """缺少参考文本时跳过 keyword_ref"""
        no_refs = [rec('the server', ['server'])]
        rows = pairwise_tests({'A': no_refs, 'B': no_refs}, metrics=('keyword_ref', 'content'))
        self.assertEqual([row[0] for row in rows], ['content'])


class TestReport(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_golden_histogram(self):
        """直方图 CSV 与固定文件逐字节一致"""
        written = build_report({'A': CORPUS_A, 'B': CORPUS_B}, self.root, mem_size=3)
        self.assertEqual(sorted(p.name for p in written),
                         ['content_prob.csv', 'corpus_stats.csv', 'diversity_hist.csv', 'diversity_trend.csv',
                          'keyword_prob.csv', 'pairwise_pvalues.csv', 'pos_dist.csv'])
        self.assertEqual((self.root / 'diversity_hist.csv').read_bytes(),
                         (FIXTURES / 'diversity_hist.csv').read_bytes())

    def test_golden_report(self):
        """全部报告 CSV 与固定文件逐字节一致"""
        written = build_report(GOLDEN_CORPORA, self.root, mem_size=2,
                               metrics=('diversity', 'keyword_pred', 'content'))
        self.assertEqual(len(written), 7)
        for path in written:
            with self.subTest(report=path.name):
                self.assertEqual(path.read_bytes(), (FIXTURES / 'report' / path.name).read_bytes())

    def test_report_rerun_is_identical(self):
        """打乱记录顺序后重跑，直方图与区间表不变"""
        shuffled = {label: list(reversed(records)) for label, records in GOLDEN_CORPORA.items()}
        build_report(GOLDEN_CORPORA, self.root / 'a', mem_size=2, metrics=('diversity',))
        build_report(shuffled, self.root / 'b', mem_size=2, metrics=('diversity',))
        for name in ('diversity_hist.csv', 'keyword_prob.csv', 'content_prob.csv', 'pos_dist.csv'):
            self.assertEqual((self.root / 'a' / name).read_bytes(), (self.root / 'b' / name).read_bytes())

    def test_report_rows(self):
        """关键词表含预测与参考两行，长度统计两侧都有"""
        build_report({'A': CORPUS_A}, self.root, mem_size=3)
        keyword = DataFormatter.read_csv(self.root / 'keyword_prob.csv')
        self.assertEqual([(r['source'], r['hits'], r['n']) for r in keyword],
                         [('predictions', '2', '3'), ('references', '2', '3')])
        stats = DataFormatter.read_csv(self.root / 'corpus_stats.csv')
        self.assertEqual([(r['side'], r['min_len'], r['max_len']) for r in stats],
                         [('prediction', '2', '4'), ('reference', '2', '3')])
        self.assertFalse((self.root / 'pairwise_pvalues.csv').exists())

    def test_empty_corpus_rejected(self):
        with self.assertRaises(InputError):
            build_report({'A': []}, self.root)

    def test_epoch_directory(self):
        """目录输入按 epoch 分组，最后一个 epoch 作为语料，并写出 epoch 趋势"""
        run = self.root / 'dumps'
        for epoch in (1, 2):
            records = [rec('a b', ['a'] * epoch, epoch=epoch), rec('c', ['c'], epoch=epoch)]
            write_predictions(records, run / f"epoch_{epoch:03d}.jsonl", dump_header('t', epoch, 0, False))
        corpora, epochs = load_labelled_dumps([('run', run)], load_predictions)
        self.assertEqual(sorted(epochs['run']), [1, 2])
        self.assertTrue(all(r.epoch == 2 for r in corpora['run']))
        build_report(corpora, self.root / 'out', mem_size=2, epoch_dumps=epochs)
        trend = DataFormatter.read_csv(self.root / 'out' / 'diversity_trend.csv')
        self.assertEqual([r['axis'] for r in trend], ['epoch', 'epoch', 'length'])

    def test_duplicate_label(self):
        with self.assertRaises(InputError):
            load_labelled_dumps([('a', self.root), ('a', self.root)], load_predictions)


if __name__ == '__main__':
    unittest.main()
