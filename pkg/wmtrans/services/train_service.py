"""
训练与预测导出

前 warm 个 epoch 记忆容量为 0（标准 Transformer），之后启用完整路由。
损失只统计后继为目标 token 的位置。每个 epoch 写检查点、指标与预测导出。
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import RunSettings
from ..autograd import AdamOptimizer, Tensor, add, cross_entropy, mul, no_grad, reverse_pass
from ..errors import ContractError, DimensionError, InputError, NumericError
from ..models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..models.records import TARGET_FLAG, DecodeStep, ParallelPair, PredictionRecord, RoutedSequence
from ..models.transformer import WorkingMemoryTransformer
from ..models.vocabulary import END_ID, START_ID, Vocabulary, decode, encode
from ..utils.data_formatter import DataFormatter
from .decode_service import generate, loss_alignment, split_routed, training_forward_pass
from .metrics_service import score_records
from .run_logger import RunLogger

logger = logging.getLogger(__name__)

METRICS_HEADER = ('epoch', 'loss', 'bleu', 'meteor')


@dataclass
class EncodedPair:
    pair: ParallelPair
    src_ids: List[int]
    # <s> ... </s>
    tgt_ids: List[int]


def encode_pairs(pairs: Sequence[ParallelPair], src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                 max_len: int, mem_size: int) -> List[EncodedPair]:
    """编码并丢弃放不进 max_len 的样本"""
    encoded, dropped = [], 0
    for pair in pairs:
        src = encode(pair.source, src_vocab)
        tgt = [START_ID] + encode(pair.reference, tgt_vocab) + [END_ID]
        if not src or len(src) > max_len or len(tgt) + mem_size > max_len:
            dropped += 1
            continue
        encoded.append(EncodedPair(pair, src, tgt))
    if dropped:
        logger.warning(f"Dropped {dropped} pairs that do not fit max_len={max_len} with mem_size={mem_size}")
    return encoded


def inverse_sqrt_lr(step: int, peak: float, warmup_steps: int) -> float:
    """线性预热后按 1/sqrt(step) 衰减，step 从 1 开始"""
    step = max(step, 1)
    return peak * min(step / warmup_steps, math.sqrt(warmup_steps / step))


def masked_cross_entropy(logits: Tensor, routed: RoutedSequence, y_real: Sequence[int]) -> Tensor:
    """第 t 行预测第 t+1 个路由 token；只统计后继为目标 token 的行"""
    if logits.ndim != 2 or logits.shape[0] != len(routed):
        raise DimensionError(f"logits {logits.shape} do not align with a routed sequence of {len(routed)}")
    targets = [t for t, f in zip(routed.tokens[1:], routed.flags[1:]) if f == TARGET_FLAG]
    if targets != [int(t) for t in y_real[1:len(targets) + 1]]:
        raise ContractError("target-flagged tokens differ from the teacher-forced target")
    include, labels = loss_alignment(routed)
    return cross_entropy(logits, labels, include)


def _record_from_routed(routed: RoutedSequence, item: EncodedPair, tgt_vocab: Vocabulary,
                        tag: str, epoch: int, seed: int) -> PredictionRecord:
    targets, memory = split_routed(routed)
    return PredictionRecord(
        src=item.pair.source,
        pred=decode(targets, tgt_vocab),
        mem=[tgt_vocab.token(i) for i in memory],
        flags=list(routed.flags),
        tag=tag,
        epoch=epoch,
        seed=seed,
        ref=item.pair.reference,
    )


def dump_header(tag: str, epoch: int, seed: int, ablate: bool) -> str:
    return f"# wmtrans predictions tag={tag} epoch={epoch} seed={seed} ablate={int(ablate)}\n"


def dump_predictions(model: WorkingMemoryTransformer, items: Sequence[EncodedPair], tgt_vocab: Vocabulary,
                     epoch: int, seed: int, tag: str, path=None, ablate: bool = False,
                     trace_path=None, mem_size: Optional[int] = None) -> List[PredictionRecord]:
    """逐样本生成，第 i 个样本使用 default_rng([seed, i])，写出 JSONL"""
    records, traces = [], []
    for index, item in enumerate(items):
        rng = np.random.default_rng([seed, index])
        steps: List[DecodeStep] = []
        with no_grad():
            enc = model.encode(item.src_ids)
            routed = generate(model, enc, rng, ablate_memory=ablate, mem_size=mem_size, trace=steps)
        records.append(_record_from_routed(routed, item, tgt_vocab, tag, epoch, seed))
        if trace_path is not None:
            for position, step in enumerate(steps, start=1):
                entry = json.loads(step.to_json())
                entry.update(sample=index, position=position)
                traces.append(json.dumps(entry, sort_keys=True))
    if path is not None:
        write_predictions(records, path, dump_header(tag, epoch, seed, ablate))
    if trace_path is not None:
        Path(trace_path).parent.mkdir(parents=True, exist_ok=True)
        with open(trace_path, 'w', encoding='utf-8', newline='\n') as f:
            f.writelines(line + '\n' for line in traces)
    return records


def write_predictions(records: Sequence[PredictionRecord], path, header: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(header)
        for record in records:
            f.write(record.to_json() + '\n')
    return path


def load_predictions(path) -> List[PredictionRecord]:
    records = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            try:
                records.append(PredictionRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{lineno}: invalid JSON ({e.msg})")
            except InputError as e:
                raise InputError(f"{path}:{lineno}: {e}")
    return records


class TrainingService:
    def __init__(self, settings: RunSettings, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                 run_logger: Optional[RunLogger] = None):
        self.settings = settings
        self.train_config = settings.train
        self.model_config = replace(settings.model, src_vocab_size=src_vocab.size, tgt_vocab_size=tgt_vocab.size)
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.run_logger = run_logger

    def _event(self, event, **details):
        if self.run_logger is not None:
            self.run_logger.log(event, **details)

    def build_model(self, checkpoint: Optional[Checkpoint] = None) -> WorkingMemoryTransformer:
        if checkpoint is None:
            return WorkingMemoryTransformer(self.model_config, rng=np.random.default_rng(self.model_config.seed))
        if (checkpoint.config.src_vocab_size, checkpoint.config.tgt_vocab_size) != (
                self.src_vocab.size, self.tgt_vocab.size):
            raise InputError("checkpoint vocabulary sizes do not match the given vocabularies")
        config = replace(checkpoint.config, mem_size=self.model_config.mem_size,
                         p_nucleus=self.model_config.p_nucleus, dropout=self.model_config.dropout)
        self.model_config = config
        return WorkingMemoryTransformer(config, checkpoint.tensors())

    def mem_size_for(self, epoch: int) -> int:
        return 0 if epoch <= self.train_config.warm else self.model_config.mem_size

    def encode(self, pairs: Sequence[ParallelPair]) -> List[EncodedPair]:
        return encode_pairs(pairs, self.src_vocab, self.tgt_vocab, self.model_config.max_len,
                            self.model_config.mem_size)

    def train_epoch(self, model, optimizer: AdamOptimizer, data: Sequence[EncodedPair],
                    epoch: int, step: int) -> Tuple[float, int]:
        """返回 (平均训练损失, 累计步数)"""
        cfg = self.train_config
        rng = np.random.default_rng([cfg.seed, epoch])
        mem_size = self.mem_size_for(epoch)
        order = rng.permutation(len(data))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            optimizer.zero_grad()
            try:
                total = None
                for item in batch:
                    enc = model.encode(item.src_ids, rng)
                    forward = training_forward_pass(model, enc, item.tgt_ids, rng, mem_size=mem_size)
                    loss = masked_cross_entropy(forward.logits, forward.routed, item.tgt_ids)
                    total = loss if total is None else add(total, loss)
                batch_loss = mul(total, 1.0 / len(batch))
                if not np.isfinite(batch_loss.item()):
                    raise NumericError(f"loss is {batch_loss.item()}")
            except NumericError as e:
                self._event('abort', epoch=epoch, step=step + 1, reason=str(e))
                logger.error(f"Training aborted at epoch {epoch}, step {step + 1}: {e}")
                raise
            reverse_pass(batch_loss)
            step += 1
            optimizer.clip_grad_norm(cfg.clip_norm)
            optimizer.set_lr(inverse_sqrt_lr(step, cfg.lr_peak, cfg.warmup_steps))
            optimizer.step()
            losses.append(batch_loss.item())
        return (float(np.mean(losses)) if losses else 0.0), step

    def validation_loss(self, model, data: Sequence[EncodedPair], epoch: int) -> float:
        """路由后的掩码损失，不记录梯度"""
        if not data:
            return 0.0
        rng = np.random.default_rng([self.train_config.seed, epoch, 1])
        mem_size = self.mem_size_for(epoch)
        values = []
        with no_grad():
            for item in data:
                enc = model.encode(item.src_ids)
                forward = training_forward_pass(model, enc, item.tgt_ids, rng, mem_size=mem_size)
                values.append(masked_cross_entropy(forward.logits, forward.routed, item.tgt_ids).item())
        return float(np.mean(values))

    def _optimizer(self, model) -> AdamOptimizer:
        cfg = self.train_config
        return AdamOptimizer(model.parameters(), cfg.lr_peak, cfg.beta1, cfg.beta2, cfg.adam_eps)

    def run_training(self, train_pairs: Sequence[ParallelPair], eval_pairs: Sequence[ParallelPair], out_dir,
                     resume=None, init_checkpoint=None, tag: Optional[str] = None) -> List[Path]:
        """训练全部 epoch，返回检查点路径

        resume 从某个检查点继续（恢复优化器状态与步数）；
        init_checkpoint 用于微调，只加载参数，epoch 与优化器重新开始。
        """
        out_dir = Path(out_dir)
        cfg = self.train_config
        start_epoch, step, metrics_rows = 1, 0, []
        if resume is not None:
            checkpoint = load_checkpoint(resume)
            model = self.build_model(checkpoint)
            optimizer = self._optimizer(model)
            optimizer.load_state_arrays(checkpoint.optimizer)
            start_epoch = checkpoint.epoch + 1
            step = int(checkpoint.meta.get('step', 0))
            metrics_path = out_dir / 'metrics.csv'
            if metrics_path.exists():
                metrics_rows = [[int(r['epoch']), float(r['loss']), float(r['bleu']), float(r['meteor'])]
                                for r in DataFormatter.read_csv(metrics_path) if int(r['epoch']) <= checkpoint.epoch]
        else:
            model = self.build_model(load_checkpoint(init_checkpoint) if init_checkpoint else None)
            optimizer = self._optimizer(model)

        train_data = self.encode(train_pairs)
        eval_data = self.encode(eval_pairs)[:cfg.eval_limit]
        if not train_data:
            raise InputError("no training pairs fit the model limits")
        tag = tag or train_pairs[0].tag or 'corpus'
        logger.info(f"Training {model.num_parameters()} parameters on {len(train_data)} pairs, "
                    f"epochs {start_epoch}..{cfg.epochs}, warm={cfg.warm}")

        checkpoints = []
        for epoch in range(start_epoch, cfg.epochs + 1):
            train_loss, step = self.train_epoch(model, optimizer, train_data, epoch, step)
            val_loss = self.validation_loss(model, eval_data, epoch)
            dump_path = None
            if cfg.dump_every and epoch % cfg.dump_every == 0:
                dump_path = out_dir / 'dumps' / f"epoch_{epoch:03d}.jsonl"
            records = dump_predictions(model, eval_data, self.tgt_vocab, epoch, cfg.seed, tag, dump_path,
                                       mem_size=self.mem_size_for(epoch))
            scores = score_records(records) if records else None
            bleu, meteor = (scores.bleu4, scores.meteor_lite) if scores else (0.0, 0.0)
            metrics_rows.append([epoch, val_loss, bleu, meteor])
            DataFormatter.write_csv(out_dir / 'metrics.csv', METRICS_HEADER, metrics_rows)

            path = out_dir / 'checkpoints' / f"epoch_{epoch:03d}.ckpt"
            save_checkpoint(path, self.model_config, model.parameters(), optimizer.state_arrays(),
                            {'epoch': epoch, 'step': step, 'seed': cfg.seed, 'mem_size': self.mem_size_for(epoch)})
            checkpoints.append(path)
            self._event('epoch', epoch=epoch, step=step, train_loss=train_loss, val_loss=val_loss,
                        bleu=bleu, meteor_lite=meteor, mem_size=self.mem_size_for(epoch))
            logger.info(f"Epoch {epoch}: train_loss={train_loss:.4f} val_loss={val_loss:.4f} "
                        f"bleu={bleu:.2f} meteor_lite={meteor:.2f}")
        return checkpoints
