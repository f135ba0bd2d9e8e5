from config.settings import ModelConfig, RunSettings, TokenizerConfig, TrainConfig
from ..errors import InputError


class ConfigValidator:
    def __init__(self, settings: RunSettings):
        self.settings = settings

    def validate(self):
        """检查模型、训练与分词配置的取值范围"""
        errors = []
        errors.extend(self._check_model(self.settings.model))
        errors.extend(self._check_train(self.settings.train))
        errors.extend(self._check_tokenizer(self.settings.tokenizer))
        return {
            "valid": len(errors) == 0,
            "errors": errors
        }

    def ensure_valid(self):
        result = self.validate()
        if not result["valid"]:
            raise InputError("配置不合法: " + "; ".join(result["errors"]))
        return self.settings

    @staticmethod
    def _check_model(model: ModelConfig):
        errors = []
        for key in ('d_model', 'n_layers', 'n_heads', 'd_ff', 'max_len'):
            if getattr(model, key) <= 0:
                errors.append(f"{key} 必须为正数")
        if model.n_heads > 0 and model.d_model % model.n_heads:
            errors.append(f"d_model={model.d_model} 不能被 n_heads={model.n_heads} 整除")
        if model.mem_size < 0:
            errors.append("mem_size 不能为负")
        if not 0.0 < model.p_nucleus <= 1.0:
            errors.append(f"p_nucleus={model.p_nucleus} 不在 (0, 1] 内")
        if not 0.0 <= model.dropout < 1.0:
            errors.append(f"dropout={model.dropout} 不在 [0, 1) 内")
        if model.dtype not in ('float32', 'float64'):
            errors.append(f"不支持的 dtype: {model.dtype}")
        if model.mem_size + 2 > model.max_len:
            errors.append("max_len 容纳不下起止符与全部记忆 token")
        return errors

    @staticmethod
    def _check_train(train: TrainConfig):
        errors = []
        if train.epochs <= 0:
            errors.append("epochs 必须为正数")
        if not 0 <= train.warm <= train.epochs:
            errors.append(f"warm={train.warm} 必须在 [0, epochs={train.epochs}] 内")
        if train.batch_size <= 0:
            errors.append("batch_size 必须为正数")
        if train.lr_peak <= 0 or train.warmup_steps <= 0:
            errors.append("学习率峰值与预热步数必须为正数")
        if not (0.0 <= train.beta1 < 1.0 and 0.0 <= train.beta2 < 1.0):
            errors.append("beta1/beta2 必须在 [0, 1) 内")
        if train.dump_every < 0:
            errors.append("dump_every 不能为负")
        return errors

    @staticmethod
    def _check_tokenizer(tokenizer: TokenizerConfig):
        errors = []
        if tokenizer.mode not in ('word', 'subword'):
            errors.append(f"未知分词模式: {tokenizer.mode}")
        if tokenizer.max_size <= 0:
            errors.append("tokenizer max_size 必须为正数")
        return errors
