import unittest

from wmtrans.models.vocabulary import tokenize_words
from wmtrans.services.synthetic_service import TIERS, generate_synthetic_tier
from wmtrans.utils.pos_tagger import pos_tag, tag_sentence


class TestPosTagger(unittest.TestCase):
    def test_closed_classes(self):
        """封闭词类按词表标注，不区分大小写"""
        self.assertEqual(pos_tag('The'), 'DET')
        self.assertEqual(pos_tag('she'), 'PRON')
        self.assertEqual(pos_tag('because'), 'CCONJ')
        self.assertEqual(pos_tag('under'), 'ADP')

    def test_punctuation_and_numbers(self):
        self.assertEqual(pos_tag(','), 'PUNCT')
        self.assertEqual(pos_tag('1024'), 'NUM')
        self.assertEqual(pos_tag(''), 'OTHER')

    def test_suffixes(self):
        """后缀规则: -ly 副词, -ed 动词, -ous 形容词, 其余名词"""
        self.assertEqual(pos_tag('quickly'), 'ADV')
        self.assertEqual(pos_tag('parsed'), 'VERB')
        self.assertEqual(pos_tag('famous'), 'ADJ')
        self.assertEqual(pos_tag('compiler'), 'NOUN')
        self.assertEqual(pos_tag('red'), 'NOUN')

    def test_capitalized_words(self):
        """句中大写词为专名；句首大写词看后缀"""
        self.assertEqual(tag_sentence(['Linux', 'runs', 'Docker']), ['NOUN', 'NOUN', 'PROPN'])
        self.assertEqual(pos_tag('Quickly', 0), 'ADV')
        self.assertEqual(pos_tag('Docker'), 'PROPN')

    def test_accuracy_on_generated_corpora(self):
        """在各等级生成语料的金标准词性上准确率不低于 95%"""
        for tier in TIERS:
            correct = total = 0
            for pair in generate_synthetic_tier(tier, 200, seed=4):
                tokens = tokenize_words(pair.reference)
                predicted = tag_sentence(tokens)
                correct += sum(p == g for p, g in zip(predicted, pair.pos))
                total += len(pair.pos)
            self.assertGreaterEqual(correct / total, 0.95, f"tier {tier}")


if __name__ == '__main__':
    unittest.main()
