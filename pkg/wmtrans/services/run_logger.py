import json
import logging
from datetime import datetime, timezone
from pathlib import Path


class RunLogger:
    """JSON 事件日志，写在输出目录之外"""

    def __init__(self, log_file):
        self.log_file = Path(log_file)
        self.log_file.parent.mkdir(parents=True, exist_ok=True)
        self._setup_logger()

    def _setup_logger(self):
        """配置运行日志"""
        # 每个日志文件一个 logger，重复构造不会重复添加 handler
        self.logger = logging.getLogger(f"wmtrans_run:{self.log_file.resolve().as_posix()}")
        self.logger.setLevel(logging.INFO)
        if not self.logger.handlers:
            handler = logging.FileHandler(self.log_file, encoding='utf-8')
            formatter = logging.Formatter('%(asctime)s|%(levelname)s|%(message)s')
            handler.setFormatter(formatter)
            self.logger.addHandler(handler)
        self.logger.propagate = False

    def log(self, event, **details):
        """记录一条事件"""
        log_entry = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'data': {'event': event, **self._plain(details)}
        }
        self.logger.info(json.dumps(log_entry, sort_keys=True))

    def _plain(self, data):
        """numpy 标量等转成可序列化的值"""
        plain = {}
        for key, value in data.items():
            if hasattr(value, 'item') and not isinstance(value, (str, bytes)):
                value = value.item()
            elif isinstance(value, Path):
                value = str(value)
            plain[key] = value
        return plain

    def get_logs(self, filter_func=None):
        """读取本文件中的事件"""
        logs = []
        try:
            with open(self.log_file, 'r', encoding='utf-8') as f:
                for line in f:
                    try:
                        entry = json.loads(line.split('|', 2)[-1])
                        if not filter_func or filter_func(entry):
                            logs.append(entry)
                    except (json.JSONDecodeError, IndexError):
                        continue
        except FileNotFoundError:
            pass
        return logs

    def close(self):
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)
