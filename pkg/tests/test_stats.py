import unittest

import numpy as np

from wmtrans.errors import InputError
from wmtrans.utils.data_formatter import DataFormatter
from wmtrans.utils.stats import ols_fit, trend_fit, wilcoxon_rank_sum, wilson_interval


class TestWilson(unittest.TestCase):
    def test_empty_sample(self):
        """n=0 时区间为 [0, 1]"""
        ci = wilson_interval(0, 0)
        self.assertEqual((ci.estimate, ci.lower, ci.upper), (0.0, 0.0, 1.0))

    def test_half(self):
        """5/10 的 95% 区间约为 (0.2366, 0.7634)"""
        ci = wilson_interval(5, 10)
        self.assertAlmostEqual(ci.estimate, 0.5)
        self.assertAlmostEqual(ci.lower, 0.2366, places=3)
        self.assertAlmostEqual(ci.upper, 0.7634, places=3)

    def test_bounds_contain_estimate(self):
        """区间包含点估计且落在 [0, 1]"""
        for hits in range(0, 21):
            ci = wilson_interval(hits, 20)
            self.assertTrue(0.0 <= ci.lower <= ci.estimate <= ci.upper <= 1.0)

    def test_invalid(self):
        with self.assertRaises(InputError):
            wilson_interval(3, 2)


class TestRankSum(unittest.TestCase):
    def test_exact_separated_samples(self):
        """[1,2,3] 对 [4,5,6]：20 种分组中只有 2 种同样极端，p=0.1"""
        result = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
        self.assertEqual(result.method, 'exact')
        self.assertEqual(result.statistic, 6.0)
        self.assertAlmostEqual(result.p_value, 0.1)

    def test_symmetric(self):
        """交换两组时 p 值不变，秩和互补"""
        a, b = [0.3, 1.2, 2.5, 0.7], [1.0, 3.1, 2.2]
        ab, ba = wilcoxon_rank_sum(a, b), wilcoxon_rank_sum(b, a)
        self.assertAlmostEqual(ab.p_value, ba.p_value)
        self.assertEqual(ab.statistic + ba.statistic, 28.0)

    def test_identical_samples(self):
        """全部并列时 p=1"""
        self.assertEqual(wilcoxon_rank_sum([2, 2, 2], [2, 2]).p_value, 1.0)
        self.assertEqual(wilcoxon_rank_sum([2] * 10, [2] * 10).p_value, 1.0)

    def test_normal_approximation(self):
        """样本较大时用正态近似，明显分离的两组 p < 0.001"""
        result = wilcoxon_rank_sum(np.arange(10), np.arange(10, 20))
        self.assertEqual(result.method, 'normal')
        self.assertEqual(result.statistic, 55.0)
        self.assertLess(result.p_value, 1e-3)

    def test_large_separated_samples_keep_positive_p(self):
        """每组 1000 个且完全分离时 p 极小但仍大于 0"""
        result = wilcoxon_rank_sum(np.arange(1000), np.arange(1000, 2000))
        self.assertEqual(result.method, 'normal')
        self.assertGreater(result.p_value, 0.0)
        self.assertLessEqual(result.p_value, 1e-300)
        self.assertNotEqual(DataFormatter.format_pvalue(result.p_value), '0.000000e+00')

    def test_normal_matches_exact_at_six(self):
        """n1=n2=6 无并列时，正态近似与精确枚举相差不超过 0.02"""
        rng = np.random.default_rng(6)
        for _ in range(40):
            values = rng.permutation(12).astype(float)
            a, b = values[:6], values[6:]
            exact = wilcoxon_rank_sum(a, b, method='exact')
            normal = wilcoxon_rank_sum(a, b, method='normal')
            self.assertEqual(exact.statistic, normal.statistic)
            self.assertLessEqual(abs(exact.p_value - normal.p_value), 0.02)

    def test_normal_matches_exact_in_tails(self):
        """完全分离与只差一位的分组同样满足 0.02 的误差"""
        for a, b in (([1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12]),
                     ([1, 2, 3, 4, 5, 7], [6, 8, 9, 10, 11, 12]),
                     ([1, 3, 5, 7, 9, 11], [2, 4, 6, 8, 10, 12])):
            exact = wilcoxon_rank_sum(a, b, method='exact').p_value
            normal = wilcoxon_rank_sum(a, b, method='normal').p_value
            self.assertLessEqual(abs(exact - normal), 0.02)
        self.assertAlmostEqual(wilcoxon_rank_sum([1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12],
                                                 method='exact').p_value, 2 / 924)

    def test_empty_sample(self):
        with self.assertRaises(InputError):
            wilcoxon_rank_sum([], [1.0])


class TestLeastSquares(unittest.TestCase):
    def test_line(self):
        """y = 4 - x"""
        slope, intercept, defined = ols_fit([1, 2, 3], [3, 2, 1])
        self.assertAlmostEqual(slope, -1.0)
        self.assertAlmostEqual(intercept, 4.0)
        self.assertTrue(defined)

    def test_single_x(self):
        """x 只有一个取值时斜率未定义"""
        fit = trend_fit([2, 2], [1.0, 3.0], [5, 5])
        self.assertFalse(fit.defined)
        self.assertEqual(fit.slope, 0.0)
        self.assertEqual(fit.intercept, 2.0)


if __name__ == '__main__':
    unittest.main()
