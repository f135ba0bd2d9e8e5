import csv
from pathlib import Path
from typing import Iterable, Sequence


class DataFormatter:
    FLOAT_FORMAT = '{:.6f}'
    PVALUE_FORMAT = '{:.6e}'

    @staticmethod
    def format_value(value):
        """浮点统一保留 6 位小数，其余原样转字符串"""
        if isinstance(value, bool):
            return str(int(value))
        if isinstance(value, float):
            if value == 0.0:
                value = 0.0  # 去掉 -0.0
            return DataFormatter.FLOAT_FORMAT.format(value)
        if value is None:
            return ''
        return str(value)

    @staticmethod
    def format_row(row: Sequence) -> list:
        return [DataFormatter.format_value(v) for v in row]

    @staticmethod
    def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """写出 CSV，换行固定为 \\n，便于逐字节比对"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow(DataFormatter.format_row(row))
        return path

    @staticmethod
    def read_csv(path) -> list:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            return list(csv.DictReader(f))

    @staticmethod
    def format_pvalue(value: float) -> str:
        """p 值用科学计数法，极小的 p 也不会显示成 0"""
        return DataFormatter.PVALUE_FORMAT.format(value)

    @staticmethod
    def format_score(value: float) -> str:
        """分数显示为两位小数"""
        return f"{value:.2f}"
