import logging
import sys
from pathlib import Path

import click

from config import ContentDigest
from config.settings import AppConfig, RunSettings
from wmtrans.errors import ContractError, DimensionError, InputError, NumericError
from wmtrans.models.checkpoint import load_checkpoint
from wmtrans.models.records import RunManifest
from wmtrans.models.vocabulary import Vocabulary, build_vocab
from wmtrans.services.analysis_service import build_report, load_labelled_dumps
from wmtrans.services.corpus_service import dedup, load_parallel, record_length_bounds, save_parallel
from wmtrans.services.metrics_service import mean_scores, score_corpus, score_records
from wmtrans.services.run_logger import RunLogger
from wmtrans.services.synthetic_service import TIERS, generate_synthetic_tier, load_generator_config
from wmtrans.services.train_service import TrainingService, dump_predictions, encode_pairs, load_predictions
from wmtrans.utils.data_formatter import DataFormatter
from wmtrans.validators import ConfigValidator, filter_records_by_length_bounds

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'run_manifest.json'
SRC_VOCAB, TGT_VOCAB = 'src.vocab', 'tgt.vocab'
RUNTIME_ERRORS = (InputError, DimensionError, ContractError, NumericError, OSError)


def _data_path(path):
    """相对路径先按当前目录解析，找不到时再到数据目录下查找"""
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    candidate = AppConfig.DATA_DIR / path
    return candidate if candidate.exists() else path


def _settings(config_path, **overrides) -> RunSettings:
    if config_path is None and AppConfig.DEFAULT_SETTINGS.exists():
        config_path = AppConfig.DEFAULT_SETTINGS
    settings = RunSettings.load(config_path, **overrides)
    return ConfigValidator(settings).ensure_valid()


def _write_manifest(out_dir, command, seed, inputs, outputs, config_path=None, settings=None):
    """输出目录中写入运行清单；不含时间戳与主机信息"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = ContentDigest()
    for label, path in sorted(inputs.items()):
        digest.add_file(label, path)
    manifest = RunManifest(
        command=command,
        config_path=str(config_path) if config_path else None,
        seed=seed,
        inputs={k: str(v) for k, v in sorted(inputs.items())},
        outputs=sorted(str(Path(p).relative_to(out_dir)) if Path(p).is_relative_to(out_dir) else str(p)
                       for p in outputs),
        tool_version=AppConfig.TOOL_VERSION,
        input_hash=digest.combined(),
        settings=settings or {},
    )
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.to_json() + '\n', encoding='utf-8')
    return path


def _load_vocabs(vocab_dir):
    vocab_dir = _data_path(vocab_dir)
    return Vocabulary.load(vocab_dir / SRC_VOCAB), Vocabulary.load(vocab_dir / TGT_VOCAB)


def _run_logger():
    AppConfig.LOG_DIR.mkdir(parents=True, exist_ok=True)
    return RunLogger(AppConfig.RUN_LOG)


def seed_option(f):
    return click.option('--seed', type=int, default=None, help='随机种子，覆盖配置文件')(f)


def config_option(f):
    return click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                        help='键值配置文件，默认 settings.cfg')(f)


@click.group()
@click.option('-v', '--verbose', is_flag=True, help='输出调试日志')
@click.version_option(AppConfig.TOOL_VERSION, prog_name='wmtrans')
def cli(verbose):
    """wmtrans 工作记忆翻译命令行工具"""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


@cli.command('gen-data')
@click.argument('tier', type=click.IntRange(min(TIERS), max(TIERS)))
@click.option('--n', 'n_train', type=int, default=500, show_default=True, help='训练样本数')
@click.option('--eval-n', type=int, default=100, show_default=True, help='评测样本数')
@click.option('--generator-config', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@seed_option
def gen_data(tier, n_train, eval_n, generator_config, out_dir, seed):
    """生成某个等级的合成平行语料 (train.jsonl / eval.jsonl)"""
    seed = 13 if seed is None else seed
    config = load_generator_config(generator_config, tier) if generator_config else None
    pairs = dedup(generate_synthetic_tier(tier, n_train + eval_n, seed, config))
    if len(pairs) <= eval_n:
        raise InputError(f"only {len(pairs)} distinct pairs generated; lower --eval-n")
    train_path = save_parallel(pairs[:len(pairs) - eval_n], Path(out_dir) / 'train.jsonl')
    eval_path = save_parallel(pairs[len(pairs) - eval_n:], Path(out_dir) / 'eval.jsonl')
    inputs = {'generator_config': generator_config} if generator_config else {}
    _write_manifest(out_dir, 'gen-data', seed, inputs, [train_path, eval_path],
                    settings={'tier': tier, 'n': n_train, 'eval_n': eval_n})
    print(f"[✓] tier{tier}: {len(pairs) - eval_n} 条训练样本, {eval_n} 条评测样本 -> {out_dir}")


@cli.command('build-vocab')
@click.argument('corpus', type=click.Path())
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@click.option('--mode', type=click.Choice(['word', 'subword']), default=None)
@click.option('--max-size', type=int, default=None)
@click.option('--lowercase/--keep-case', default=None)
@config_option
@seed_option
def build_vocab_command(corpus, out_dir, mode, max_size, lowercase, config_path, seed):
    """从训练语料构建源端与目标端词表"""
    settings = _settings(config_path, tokenizer_mode=mode, tokenizer_max_size=max_size,
                         tokenizer_lowercase=lowercase, seed=seed)
    tok = settings.tokenizer
    corpus = _data_path(corpus)
    pairs = load_parallel(corpus)
    out_dir = Path(out_dir)
    outputs = []
    for name, lines in ((SRC_VOCAB, [p.source for p in pairs]), (TGT_VOCAB, [p.reference for p in pairs])):
        vocab = build_vocab(lines, tok.mode, tok.max_size, tok.lowercase)
        outputs.append(vocab.save(out_dir / name))
        print(f"[✓] {name}: {vocab.size} 项")
    _write_manifest(out_dir, 'build-vocab', settings.train.seed, {'corpus': corpus}, outputs,
                    config_path, {'tokenizer': tok.to_dict()})


def _train_options(f):
    for option in reversed([
        click.option('--vocab-dir', type=click.Path(file_okay=False), required=True),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True),
        click.option('--epochs', type=int, default=None),
        click.option('--mem-size', type=int, default=None, help='记忆容量 M，0 即标准 Transformer'),
        click.option('--batch-size', type=int, default=None),
        click.option('--lr-peak', type=float, default=None),
        config_option,
        seed_option,
    ]):
        f = option(f)
    return f


def _run_training(command, train, eval_, vocab_dir, out_dir, config_path, resume=None, init_checkpoint=None,
                  **overrides):
    settings = _settings(config_path, **overrides)
    src_vocab, tgt_vocab = _load_vocabs(vocab_dir)
    train, eval_ = _data_path(train), _data_path(eval_)
    run_log = _run_logger()
    try:
        service = TrainingService(settings, src_vocab, tgt_vocab, run_log)
        checkpoints = service.run_training(load_parallel(train), load_parallel(eval_), out_dir,
                                           resume=resume, init_checkpoint=init_checkpoint)
    finally:
        run_log.close()
    inputs = {'train': train, 'eval': eval_, 'vocab': _data_path(vocab_dir)}
    for label, path in (('resume', resume), ('init_checkpoint', init_checkpoint)):
        if path:
            inputs[label] = path
    outputs = list(checkpoints) + [Path(out_dir) / 'metrics.csv'] + sorted((Path(out_dir) / 'dumps').glob('*.jsonl'))
    _write_manifest(out_dir, command, settings.train.seed, inputs, outputs, config_path, settings.to_dict())
    print(f"[✓] 训练完成，共 {len(checkpoints)} 个检查点 -> {out_dir}")


@cli.command()
@click.argument('train', type=click.Path())
@click.argument('eval_', metavar='EVAL', type=click.Path())
@click.option('--warm', type=int, default=None, help='前 warm 个 epoch 不启用记忆')
@click.option('--resume', type=click.Path(exists=True, dir_okay=False), default=None, help='从检查点继续')
@_train_options
def train(train, eval_, warm, resume, vocab_dir, out_dir, epochs, mem_size, batch_size, lr_peak,
          config_path, seed):
    """训练工作记忆 Transformer"""
    _run_training('train', train, eval_, vocab_dir, out_dir, config_path, resume=resume, warm=warm,
                  epochs=epochs, mem_size=mem_size, batch_size=batch_size, lr_peak=lr_peak, seed=seed)


@cli.command()
@click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False))
@click.argument('train', type=click.Path())
@click.argument('eval_', metavar='EVAL', type=click.Path())
@_train_options
def finetune(checkpoint, train, eval_, vocab_dir, out_dir, epochs, mem_size, batch_size, lr_peak,
             config_path, seed):
    """在新语料上微调：加载参数，优化器重新开始，记忆全程启用"""
    _run_training('finetune', train, eval_, vocab_dir, out_dir, config_path, init_checkpoint=checkpoint,
                  warm=0, epochs=epochs, mem_size=mem_size, batch_size=batch_size, lr_peak=lr_peak, seed=seed)


def _inference(checkpoint, corpus, vocab_dir, seed, config_path, mem_size, p_nucleus):
    """记忆容量与 p 未在命令行给出时沿用检查点中的取值"""
    ckpt = load_checkpoint(checkpoint)
    settings = _settings(config_path, seed=seed,
                         mem_size=ckpt.config.mem_size if mem_size is None else mem_size,
                         p_nucleus=ckpt.config.p_nucleus if p_nucleus is None else p_nucleus)
    src_vocab, tgt_vocab = _load_vocabs(vocab_dir)
    model = TrainingService(settings, src_vocab, tgt_vocab).build_model(ckpt)
    corpus = _data_path(corpus)
    items = encode_pairs(load_parallel(corpus), src_vocab, tgt_vocab, model.config.max_len, model.config.mem_size)
    inputs = {'checkpoint': checkpoint, 'corpus': corpus, 'vocab': _data_path(vocab_dir)}
    return settings, model, tgt_vocab, items, ckpt.epoch, inputs


def _inference_options(f):
    for option in reversed([
        click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False)),
        click.argument('corpus', type=click.Path()),
        click.option('--vocab-dir', type=click.Path(file_okay=False), required=True),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True),
        click.option('--tag', default=None, help='写入导出记录的语料标签'),
        click.option('--mem-size', type=int, default=None),
        click.option('--p-nucleus', type=float, default=None),
        config_option,
        seed_option,
    ]):
        f = option(f)
    return f


@cli.command()
@_inference_options
@click.option('--trace', is_flag=True, help='同时写出逐位置的路由轨迹 trace.jsonl')
def infer(checkpoint, corpus, vocab_dir, out_dir, tag, mem_size, p_nucleus, config_path, seed, trace):
    """用检查点生成预测导出 predictions.jsonl"""
    settings, model, vocab, items, epoch, inputs = _inference(checkpoint, corpus, vocab_dir, seed, config_path,
                                                       mem_size, p_nucleus)
    out_dir = Path(out_dir)
    tag = tag or (items[0].pair.tag if items and items[0].pair.tag else 'corpus')
    dump_path, trace_path = out_dir / 'predictions.jsonl', (out_dir / 'trace.jsonl' if trace else None)
    dump_predictions(model, items, vocab, epoch, settings.train.seed, tag,
                     dump_path, trace_path=trace_path)
    outputs = [dump_path] + ([trace_path] if trace_path else [])
    _write_manifest(out_dir, 'infer', settings.train.seed, inputs, outputs, config_path, settings.to_dict())
    print(f"[✓] {len(items)} 条预测 -> {dump_path}")


@cli.command()
@_inference_options
def ablate(checkpoint, corpus, vocab_dir, out_dir, tag, mem_size, p_nucleus, config_path, seed):
    """同一检查点、同一种子下分别以普通掩码与记忆消融掩码推理，并列打分"""
    settings, model, vocab, items, epoch, inputs = _inference(checkpoint, corpus, vocab_dir, seed, config_path,
                                                       mem_size, p_nucleus)
    out_dir = Path(out_dir)
    tag = tag or (items[0].pair.tag if items and items[0].pair.tag else 'corpus')
    seed = settings.train.seed
    plain = dump_predictions(model, items, vocab, epoch, seed, tag, out_dir / 'predictions.jsonl')
    ablated = dump_predictions(model, items, vocab, epoch, seed, tag, out_dir / 'ablated.jsonl', ablate=True)
    rows = []
    for mode, records in (('memory', plain), ('ablated', ablated)):
        scores = score_records(records)
        rows.append([mode, scores.bleu4, scores.meteor_lite, scores.n_samples])
        print(f"[✓] {mode}: BLEU-4 {DataFormatter.format_score(scores.bleu4)}, "
              f"METEOR-lite {DataFormatter.format_score(scores.meteor_lite)}")
    differing = sum(a.pred != b.pred for a, b in zip(plain, ablated))
    table = DataFormatter.write_csv(out_dir / 'ablation_scores.csv', ('mode', 'bleu', 'meteor_lite', 'samples'), rows)
    logger.info(f"Ablation changed {differing} of {len(plain)} predictions")
    _write_manifest(out_dir, 'ablate', seed, inputs,
                    [out_dir / 'predictions.jsonl', out_dir / 'ablated.jsonl', table], config_path, settings.to_dict())


def _read_lines(path):
    with open(path, 'r', encoding='utf-8') as f:
        return [line.rstrip('\n') for line in f]


@cli.command()
@click.argument('dumps', nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option('--hyp', type=click.Path(exists=True, dir_okay=False), default=None, help='逐行假设文本')
@click.option('--ref', type=click.Path(exists=True, dir_okay=False), default=None, help='逐行参考文本')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='写出 scores.csv 的目录')
@seed_option
def score(dumps, hyp, ref, out_dir, seed):
    """对一个或多个预测导出打分，多个导出时给出平均值；也可用 --hyp/--ref 直接给文本文件"""
    if bool(hyp) != bool(ref):
        raise click.UsageError('--hyp and --ref must be given together')
    if not dumps and not hyp:
        raise click.UsageError('give prediction dumps or --hyp/--ref')
    runs = [(path, score_records(load_predictions(path))) for path in dumps]
    if hyp:
        runs.append((hyp, score_corpus(_read_lines(hyp), _read_lines(ref))))
    rows = []
    for path, scores in runs:
        rows.append([path, scores.bleu4, scores.meteor_lite, scores.n_samples])
        print(f"{path}: BLEU-4 {DataFormatter.format_score(scores.bleu4)}, "
              f"METEOR-lite {DataFormatter.format_score(scores.meteor_lite)}")
    mean = mean_scores([scores for _, scores in runs])
    rows.append(['mean', mean.bleu4, mean.meteor_lite, mean.n_samples])
    print(f"[✓] 平均 BLEU-4 {DataFormatter.format_score(mean.bleu4)}, "
          f"METEOR-lite {DataFormatter.format_score(mean.meteor_lite)}")
    if out_dir:
        table = DataFormatter.write_csv(Path(out_dir) / 'scores.csv', ('run', 'bleu', 'meteor_lite', 'samples'), rows)
        inputs = {f"dump{i}": p for i, p in enumerate(dumps)}
        if hyp:
            inputs.update(hyp=hyp, ref=ref)
        _write_manifest(out_dir, 'score', 0 if seed is None else seed, inputs, [table])


def _parse_labelled(values):
    specs = []
    for value in values:
        label, sep, path = value.partition('=')
        if not sep or not label or not path:
            raise click.BadParameter(f"expected LABEL=PATH, got {value!r}")
        specs.append((label, _data_path(path)))
    return specs


def _parse_comparisons(values):
    pairs = []
    for value in values:
        a, sep, b = value.partition(':')
        if not sep or not a or not b:
            raise click.BadParameter(f"expected LABEL_A:LABEL_B, got {value!r}")
        pairs.append((a, b))
    return pairs


@cli.command()
@click.argument('dumps', nargs=-1, required=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@click.option('--compare', multiple=True, help='要检验的语料对 A:B，缺省为全部两两组合')
@click.option('--mem-size', type=int, default=None, help='直方图与词性表的上界 M')
@click.option('--bound-by', default=None, help='以该语料预测与参考的长度界截取其他语料')
@click.option('--bucket-width', type=int, default=5, show_default=True)
@config_option
@seed_option
def analyze(dumps, out_dir, compare, mem_size, bound_by, bucket_width, config_path, seed):
    """分析记忆内容：DUMPS 形如 LABEL=预测导出文件或含逐 epoch 导出的目录"""
    settings = _settings(config_path, mem_size=mem_size, seed=seed)
    specs = _parse_labelled(dumps)
    corpora, epoch_dumps = load_labelled_dumps(specs, load_predictions)
    if bound_by:
        if bound_by not in corpora:
            raise InputError(f"--bound-by names unknown corpus {bound_by!r}")
        lo, hi = record_length_bounds(corpora[bound_by])
        corpora = {label: records if label == bound_by else filter_records_by_length_bounds(records, lo, hi)
                   for label, records in corpora.items()}
    comparisons = _parse_comparisons(compare) if compare else None
    written = build_report(corpora, out_dir, comparisons, settings.model.mem_size, epoch_dumps,
                           bucket_width=bucket_width)
    _write_manifest(out_dir, 'analyze', settings.train.seed, dict(specs), written, config_path,
                    {'mem_size': settings.model.mem_size, 'bound_by': bound_by, 'bucket_width': bucket_width,
                     'compare': list(compare)})
    print(f"[✓] {len(written)} 个报告文件 -> {out_dir}")


def run_cli(argv=None) -> int:
    """返回退出码: 0 成功, 1 运行失败, 2 用法错误"""
    try:
        result = cli.main(args=argv, prog_name='wmtrans', standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.Abort:
        click.echo('[✗] 已中止', err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except RUNTIME_ERRORS as e:
        click.echo(f"[✗] {type(e).__name__}: {e}", err=True)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        click.echo(f"[✗] 未预期的错误 {type(e).__name__}: {e}", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == '__main__':
    sys.exit(run_cli())
