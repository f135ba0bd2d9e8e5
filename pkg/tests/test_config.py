import json
import tempfile
import unittest
from pathlib import Path

from config import ContentDigest, RunSettings, bytes_digest, file_digest, parse_key_values, tree_digest
from config.settings import ModelConfig, TrainConfig
from wmtrans.errors import InputError
from wmtrans.services.run_logger import RunLogger
from wmtrans.validators import ConfigValidator


class TestKeyValueFiles(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _write(self, text):
        path = self.root / 'run.cfg'
        path.write_text(text, encoding='utf-8')
        return path

    def test_comments_and_dashes(self):
        """# 之后是注释，连字符键等价于下划线"""
        path = self._write('# 注释\nmem-size = 4  # 容量\n\nlr_peak=0.01\n')
        self.assertEqual(parse_key_values(path), {'mem_size': '4', 'lr_peak': '0.01'})

    def test_missing_equals_reports_line(self):
        path = self._write('epochs = 3\nwarm 2\n')
        with self.assertRaisesRegex(InputError, ':2:'):
            parse_key_values(path)

    def test_unknown_key(self):
        path = self._write('epochs = 3\n')
        with self.assertRaises(InputError):
            parse_key_values(path, known={'warm'})

    def test_load_with_overrides(self):
        """命令行覆盖文件中的值，seed 同时作用于模型与训练"""
        path = self._write('mem_size = 4\nepochs = 7\ntokenizer_mode = subword\n')
        settings = RunSettings.load(path, mem_size=6, seed=21, batch_size=None)
        self.assertEqual(settings.model.mem_size, 6)
        self.assertEqual(settings.train.epochs, 7)
        self.assertEqual(settings.train.batch_size, TrainConfig().batch_size)
        self.assertEqual((settings.model.seed, settings.train.seed), (21, 21))
        self.assertEqual(settings.tokenizer.mode, 'subword')

    def test_bad_value(self):
        path = self._write('epochs = many\n')
        with self.assertRaises(InputError):
            RunSettings.load(path)

    def test_bundled_settings_are_valid(self):
        """仓库自带的 settings.cfg 通过校验"""
        settings = RunSettings.load(Path(__file__).parent.parent / 'settings.cfg')
        self.assertTrue(ConfigValidator(settings).validate()['valid'])


class TestConfigValidator(unittest.TestCase):
    def test_collects_all_errors(self):
        """一次返回全部错误"""
        settings = RunSettings(model=ModelConfig(d_model=10, n_heads=4, p_nucleus=1.5),
                               train=TrainConfig(epochs=2, warm=3))
        result = ConfigValidator(settings).validate()
        self.assertFalse(result['valid'])
        self.assertEqual(len(result['errors']), 3)
        with self.assertRaises(InputError):
            ConfigValidator(settings).ensure_valid()

    def test_memory_must_fit(self):
        """max_len 放不下起止符与记忆时不合法"""
        settings = RunSettings(model=ModelConfig(mem_size=10, max_len=11))
        self.assertFalse(ConfigValidator(settings).validate()['valid'])


class TestDigest(unittest.TestCase):
    def test_known_value(self):
        self.assertEqual(bytes_digest(b'abc'),
                         'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad')

    def test_tree_and_combined(self):
        """目录摘要只依赖内容与相对路径"""
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            for root in (a, b):
                (Path(root) / 'sub').mkdir()
                (Path(root) / 'sub' / 'x.txt').write_text('x', encoding='utf-8')
            self.assertEqual(tree_digest(a), tree_digest(b))
            first = ContentDigest().add_file('data', a).add_file('missing', Path(a) / 'nope').combined()
            second = ContentDigest().add_file('data', b).combined()
            self.assertEqual(first, second)
            self.assertEqual(file_digest(Path(a) / 'sub' / 'x.txt'), bytes_digest(b'x'))


class TestRunLogger(unittest.TestCase):
    def test_events_round_trip(self):
        """事件写成 JSON 行并可按条件读回"""
        with tempfile.TemporaryDirectory() as tmp:
            run_logger = RunLogger(Path(tmp) / 'logs' / 'run.log')
            run_logger.log('epoch', epoch=1, path=Path('a/b'))
            run_logger.log('abort', reason='nan')
            aborts = run_logger.get_logs(lambda e: e['data']['event'] == 'abort')
            run_logger.close()
            self.assertEqual(len(aborts), 1)
            self.assertEqual(aborts[0]['data']['reason'], 'nan')
            line = (Path(tmp) / 'logs' / 'run.log').read_text(encoding='utf-8').splitlines()[0]
            self.assertEqual(json.loads(line.split('|', 2)[-1])['data']['path'], 'a/b')


if __name__ == '__main__':
    unittest.main()
