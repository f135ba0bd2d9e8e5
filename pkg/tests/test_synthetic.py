import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

from wmtrans.errors import InputError
from wmtrans.services.synthetic_service import (
    IT_NOUNS,
    TIERS,
    build_lexicon,
    default_generator_config,
    generate_synthetic_tier,
    load_generator_config,
    parse_target,
    type_token_ratio,
)


class TestGenerator(unittest.TestCase):
    def test_same_seed_same_corpus(self):
        """同一种子生成相同语料，不同种子不同"""
        a = generate_synthetic_tier(2, 50, seed=1)
        self.assertEqual(a, generate_synthetic_tier(2, 50, seed=1))
        self.assertNotEqual(a, generate_synthetic_tier(2, 50, seed=2))

    def test_every_target_parses(self):
        """所有目标句都能被本等级语法接受"""
        for tier in TIERS:
            config = default_generator_config(tier)
            for pair in generate_synthetic_tier(tier, 300, seed=9):
                self.assertTrue(parse_target(pair.reference, pair.pos, config), pair.reference)

    def test_tier_one_is_lowercase(self):
        """等级 1 全小写，无专名与数字"""
        pairs = generate_synthetic_tier(1, 100, seed=3)
        self.assertTrue(all(p.reference == p.reference.lower() for p in pairs))
        self.assertTrue(all('PROPN' not in p.pos and 'NUM' not in p.pos for p in pairs))
        self.assertEqual({p.tag for p in pairs}, {'tier1'})

    def test_higher_tiers_are_harder(self):
        """等级 4 含 IT 词汇且词型比例高于等级 1"""
        easy = generate_synthetic_tier(1, 300, seed=5)
        hard = generate_synthetic_tier(4, 300, seed=5)
        words = {w.strip('.,').lower() for p in hard for w in p.reference.split()}
        self.assertTrue(words & set(IT_NOUNS))
        self.assertGreater(type_token_ratio(hard), type_token_ratio(easy))

    def test_lexicon_ignores_sample_seed(self):
        """词表只由等级配置决定"""
        config = default_generator_config(3)
        self.assertIs(build_lexicon(config), build_lexicon(config))
        self.assertEqual(len(build_lexicon(config).names), config.n_names)

    def test_tagged_grammar_rejects_bad_order(self):
        """动词开头的词性序列不被接受"""
        config = default_generator_config(1)
        self.assertFalse(parse_target('gabored the kemun .', ['VERB', 'DET', 'NOUN', 'PUNCT'], config))

    def test_invalid_arguments(self):
        with self.assertRaises(InputError):
            generate_synthetic_tier(5, 10, seed=0)
        with self.assertRaises(InputError):
            generate_synthetic_tier(1, 0, seed=0)
        with self.assertRaises(InputError):
            generate_synthetic_tier(1, 10, seed=0, config=default_generator_config(2))


class TestGeneratorConfig(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.path = Path(self.temp_dir.name) / 'gen.cfg'

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_overrides_tier_defaults(self):
        """文件中的键覆盖等级默认值"""
        self.path.write_text('# 更多形容词\np_adj = 0.9\n', encoding='utf-8')
        config = load_generator_config(self.path, 2)
        self.assertEqual(config, replace(default_generator_config(2), p_adj=0.9))

    def test_tier_mismatch(self):
        self.path.write_text('tier = 3\n', encoding='utf-8')
        with self.assertRaises(InputError):
            load_generator_config(self.path, 2)

    def test_unknown_key(self):
        self.path.write_text('n_planets = 3\n', encoding='utf-8')
        with self.assertRaises(InputError):
            load_generator_config(self.path, 1)


if __name__ == '__main__':
    unittest.main()
