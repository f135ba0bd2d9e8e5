import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np

from config.settings import ModelConfig
from wmtrans.autograd import Tensor, cross_entropy, grad_check
from wmtrans.errors import ContractError, DimensionError, InputError
from wmtrans.models.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from wmtrans.models.masks import make_look_ahead_mask, make_memory_ablation_mask
from wmtrans.models.vocabulary import PAD_ID
from wmtrans.models.transformer import (
    ActivationTrace,
    WorkingMemoryTransformer,
    embed_tokens_with_flags,
    param_shapes,
    positional_encoding,
)

TINY = ModelConfig(d_model=8, n_layers=1, n_heads=2, d_ff=16, src_vocab_size=7, tgt_vocab_size=7,
                   mem_size=2, max_len=8, dtype='float64', seed=5)


class TestMasks(unittest.TestCase):
    def test_look_ahead(self):
        """因果掩码是下三角"""
        np.testing.assert_array_equal(make_look_ahead_mask(3), np.tril(np.ones((3, 3), dtype=bool)))

    def test_memory_ablation(self):
        """消融掩码屏蔽全部记忆位置；目标位置保留对角线，可以注意自身"""
        expected = np.array([[True, False, False],
                             [True, False, False],
                             [True, False, True]])
        np.testing.assert_array_equal(make_memory_ablation_mask([1, 0, 1]), expected)

    def test_invalid_inputs(self):
        """长度为 0 或标记非法时报错"""
        with self.assertRaises(InputError):
            make_look_ahead_mask(0)
        with self.assertRaises(ContractError):
            make_memory_ablation_mask([1, 2])


class TestEmbedding(unittest.TestCase):
    def test_positional_encoding_values(self):
        """位置 0 的正弦列为 0，余弦列为 1"""
        table = positional_encoding(4, 6)
        np.testing.assert_array_equal(table[0, 0::2], 0.0)
        np.testing.assert_array_equal(table[0, 1::2], 1.0)
        self.assertAlmostEqual(table[1, 0], np.sin(1.0))

    def test_flag_table_must_have_two_rows(self):
        """标记嵌入表必须恰好两行"""
        tokens = Tensor(np.zeros((5, 4)))
        with self.assertRaises(ContractError):
            embed_tokens_with_flags([1, 2], [1, 0], tokens, Tensor(np.zeros((3, 4))), positional_encoding(8, 4))

    def test_flags_change_the_input(self):
        """同一 token 不同标记得到不同输入向量"""
        rng = np.random.default_rng(0)
        tokens, flags = Tensor(rng.normal(size=(5, 4))), Tensor(rng.normal(size=(2, 4)))
        out = embed_tokens_with_flags([3, 3], [0, 1], tokens, flags, np.zeros((8, 4))).data
        np.testing.assert_allclose(out[1] - out[0], flags.data[1] - flags.data[0])


class TestWorkingMemoryTransformer(unittest.TestCase):
    def setUp(self):
        self.model = WorkingMemoryTransformer(TINY)
        self.enc = self.model.encode([4, 5, 6])

    def test_output_width(self):
        """输出层宽度为 V+2"""
        logits = self.model.decode([1, 4, 5], [1, 0, 1], self.enc)
        self.assertEqual(logits.shape, (3, TINY.tgt_vocab_size + 2))

    def test_parameter_names(self):
        """参数名与形状和配置一致"""
        shapes = param_shapes(TINY)
        self.assertEqual(shapes['flag_embed'], (2, 8))
        self.assertEqual(shapes['out.w'], (8, 9))
        self.assertIn('dec.0.cross.q.w', shapes)
        self.assertNotIn('enc.0.cross.q.w', shapes)
        self.assertEqual(set(self.model.parameters()), set(shapes))

    def test_prefix_rows_are_causal(self):
        """前缀的 logits 与完整序列的前几行相同"""
        full = self.model.decode([1, 4, 5, 6, 3], [1, 0, 1, 1, 0], self.enc).data
        prefix = self.model.decode([1, 4, 5], [1, 0, 1], self.enc).data
        np.testing.assert_allclose(full[:3], prefix, rtol=0, atol=1e-12)

    def test_flag_affects_logits(self):
        """翻转标记会改变之后位置的输出"""
        a = self.model.decode([1, 4, 5], [1, 1, 1], self.enc).data
        b = self.model.decode([1, 4, 5], [1, 0, 1], self.enc).data
        self.assertFalse(np.allclose(a[1:], b[1:]))

    def test_ablation_mask_hides_memory(self):
        """消融掩码下记忆 token 的取值不影响目标位置"""
        mask = make_memory_ablation_mask([1, 0, 1])
        a = self.model.decode([1, 4, 5], [1, 0, 1], self.enc, self_mask=mask).data
        b = self.model.decode([1, 6, 5], [1, 0, 1], self.enc, self_mask=mask).data
        np.testing.assert_allclose(a[2], b[2], rtol=0, atol=1e-12)

    def test_pad_tail_does_not_change_source_rows(self):
        """源句尾部补不同数量的 pad，非 pad 位置的编码输出不变"""
        plain = self.model.encode([4, 5, 6]).activation.data
        for tail in (1, 3, 5):
            padded = self.model.encode([4, 5, 6] + [PAD_ID] * tail)
            self.assertEqual(padded.activation.shape[0], 3 + tail)
            np.testing.assert_array_equal(padded.key_mask, [True] * 3 + [False] * tail)
            np.testing.assert_allclose(padded.activation.data[:3], plain, rtol=0, atol=1e-12)

    def test_activation_trace(self):
        """每层记录 A_self、A_cross、D_out"""
        trace = ActivationTrace()
        self.model.decode([1, 4], [1, 1], self.enc, trace=trace)
        self.assertEqual(len(trace.layers), TINY.n_layers)
        self.assertEqual(trace.layers[0].d_out.shape, (2, 8))

    def test_length_limits(self):
        """超过 max_len 或空源句报 InputError"""
        with self.assertRaises(InputError):
            self.model.decode([1] * 9, [1] * 9, self.enc)
        with self.assertRaises(InputError):
            self.model.encode([])

    def test_wrong_parameter_shape(self):
        """参数形状不符时拒绝构建"""
        params = dict(self.model.parameters())
        params['out.b'] = Tensor(np.zeros(3), requires_grad=True)
        with self.assertRaises(DimensionError):
            WorkingMemoryTransformer(TINY, params)

    def test_end_to_end_gradient(self):
        """编码器、带标记的解码层与 V+2 输出层的梯度通过差分检查"""
        model = self.model

        def build():
            enc = model.encode([4, 5, 6])
            logits = model.decode([1, 4, 5, 6, 2], [1, 0, 1, 1, 0], enc)
            return cross_entropy(logits, [4, 5, 6, 2, 0], include=[True, False, True, False, False])

        report = grad_check(build, model.parameters(), tol=1e-4, max_per_param=12, seed=1)
        self.assertTrue(report.passed, f"{report.max_rel_error} at {report.worst_param}[{report.worst_index}]")


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)
        self.model = WorkingMemoryTransformer(TINY)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_round_trip(self):
        """读回的参数、配置与元信息与写出时一致"""
        path = save_checkpoint(self.root / 'a.ckpt', TINY, self.model.parameters(),
                               {'adam.step.out.b': np.array([3])}, {'epoch': 4})
        ckpt = load_checkpoint(path)
        self.assertEqual(ckpt.config, TINY)
        self.assertEqual(ckpt.epoch, 4)
        self.assertEqual(int(ckpt.optimizer['adam.step.out.b'][0]), 3)
        for name, p in self.model.parameters().items():
            np.testing.assert_array_equal(ckpt.params[name], p.data)
        restored = WorkingMemoryTransformer(TINY, ckpt.tensors())
        enc = restored.encode([4, 5])
        np.testing.assert_array_equal(restored.decode([1, 4], [1, 1], enc).data,
                                      self.model.decode([1, 4], [1, 1], self.model.encode([4, 5])).data)

    def test_identical_bytes(self):
        """相同内容写出的文件逐字节相同"""
        a = save_checkpoint(self.root / 'a.ckpt', TINY, self.model.parameters(), meta={'epoch': 1})
        b = save_checkpoint(self.root / 'b.ckpt', TINY, self.model.parameters(), meta={'epoch': 1})
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_bad_magic(self):
        """不是检查点的文件报 InputError"""
        path = self.root / 'x.ckpt'
        path.write_bytes(b'not a checkpoint')
        with self.assertRaises(InputError):
            load_checkpoint(path)

    def test_truncated(self):
        """截断的检查点报 InputError"""
        path = save_checkpoint(self.root / 'a.ckpt', TINY, self.model.parameters())
        data = path.read_bytes()
        self.assertTrue(data.startswith(MAGIC))
        path.write_bytes(data[:-5])
        with self.assertRaises(InputError):
            load_checkpoint(path)

    def test_config_change_is_detected(self):
        """配置与参数形状不一致时无法构建模型"""
        path = save_checkpoint(self.root / 'a.ckpt', TINY, self.model.parameters())
        ckpt = load_checkpoint(path)
        with self.assertRaises(DimensionError):
            WorkingMemoryTransformer(replace(ckpt.config, d_ff=32), ckpt.tensors())


if __name__ == '__main__':
    unittest.main()
