#!/usr/bin/env python3
"""
gikit - Gaussian embedding experiments from the command line

Subcommands:
  oracle-check      analytic losses versus quadrature / Monte-Carlo / finite differences
  train-synthetic   fit free Gaussian embeddings on a synthetic many-to-many corpus
  bprw              re-weight class prompts by MAP-EM
  zsc               zero-shot classification against prompt ensembles
  traverse          root-to-caption traversal
  hier-eval         share of (specific, general) pairs judged included
  report            ablation table over loss configurations

All randomness derives from --seed. Settings resolve as
CLI flag > --config YAML > built-in default. Each run writes its
artifacts and one manifest.json into <output-dir>/<subcommand>/.

Exit status: 0 success, 1 invalid input or usage, 2 numeric failure or failed oracle check.
"""

import argparse
import logging
import math
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml

import report as report_module
from app_config import output_dir
from bprw import BprwConfig, reweight_classes
from embedding_io import (
    EmbeddingRecord,
    embeddings_of,
    load_embeddings,
    save_corpus,
    save_embeddings,
    write_csv,
    write_json,
)
from errors import InvalidArgumentError, NumericError
from gauss_core import LossParams
from inference import (
    ROOT_INCLUSION,
    ROOT_NULL,
    SIGMA_STATS,
    TOP_K,
    ClassPromptSet,
    eval_hierarchy_inclusion,
    filter_prompts,
    traversal_metrics,
    traverse,
    zsc_classify,
)
from oracle_check import run_suite
from run_manifest import RunManifest, save_manifest
from synth_trainer import (
    ABLATION_COLUMNS,
    SPECIFICITY_COLUMNS,
    TRACE_COLUMNS,
    TrainerConfig,
    ablation_report,
    generate_corpus,
    generate_hierarchy,
    summarize_run,
    train,
    variance_by_specificity,
)
from table_formatter import format_oracle_table, format_summary, format_weights_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2

CORPUS_DEFAULTS = {"n_images": 32, "n_texts": 32, "n_attributes": 8}

DEFAULT_ABLATION = [
    {"name": "ppcl_only", "alpha1": 0.0, "alpha2": 0.0},
    {"name": "inc_vt", "alpha1": 1.0, "alpha2": 0.0},
    {"name": "inc_mask", "alpha1": 0.0, "alpha2": 1.0},
    {"name": "inc_vt+inc_mask", "alpha1": 1.0, "alpha2": 1.0},
]


class GikitArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def load_config(config_path: Optional[str]) -> Dict[str, Any]:
    """Load configuration from YAML file; no path means an empty config"""
    if not config_path:
        return {}
    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise InvalidArgumentError(f"configuration file '{config_path}' not found") from None
    except yaml.YAMLError as e:
        raise InvalidArgumentError(f"error parsing YAML: {e}") from None
    if not isinstance(config, dict):
        raise InvalidArgumentError(f"configuration file '{config_path}' must hold a mapping")
    return config


def _section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = config.get(name) or {}
    if not isinstance(section, dict):
        raise InvalidArgumentError(f"config section '{name}' must be a mapping")
    return section


def _merge(section: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """CLI values that were given win over the config section"""
    merged = dict(section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _load_mapping(path: str, what: str) -> Any:
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise InvalidArgumentError(f"{what} file '{path}' not found") from None
    except yaml.YAMLError as e:
        raise InvalidArgumentError(f"error parsing {what} file: {e}") from None
    if data is None:
        raise InvalidArgumentError(f"{what} file '{path}' is empty")
    return data


def loss_params(args, config: Dict[str, Any]) -> LossParams:
    return LossParams.from_dict(_merge(_section(config, 'loss'), {
        'alpha1': args.alpha1, 'alpha2': args.alpha2, 'beta': args.beta,
        'c': args.c, 'eps_log': args.eps_log,
    }))


def trainer_settings(args, config: Dict[str, Any]) -> Dict[str, Any]:
    return _merge(_section(config, 'trainer'), {
        'dim': args.dim, 'learning_rate': args.learning_rate, 'steps': args.steps,
        'batch_size': args.batch_size, 'mask_pair_fraction': args.mask_pair_fraction,
        'mask_ratio': args.mask_ratio, 'n_images': args.n_images, 'n_texts': args.n_texts,
        'n_attributes': args.n_attributes,
    })


def _corpus_from(settings: Dict[str, Any], seed: int, include_null_text: bool = False):
    cfg = TrainerConfig.from_dict(settings)
    return generate_corpus(
        int(settings.get('n_images', CORPUS_DEFAULTS['n_images'])),
        int(settings.get('n_texts', CORPUS_DEFAULTS['n_texts'])),
        int(settings.get('n_attributes', CORPUS_DEFAULTS['n_attributes'])),
        seed,
        mask_pair_fraction=cfg.mask_pair_fraction,
        mask_ratio=cfg.mask_ratio,
        include_null_text=include_null_text,
    )


def group_prompts(records: Sequence[EmbeddingRecord]) -> "OrderedDict[str, List]":
    """Group text records into classes by the 'class/prompt' id convention"""
    classes: "OrderedDict[str, List]" = OrderedDict()
    for record in records:
        if record.modality != 'text':
            continue
        class_id = record.id.split('/', 1)[0]
        classes.setdefault(class_id, []).append(record.embedding)
    if not classes:
        raise InvalidArgumentError("prompt file holds no text records")
    return classes


def _run_dir(args) -> Path:
    path = output_dir(args.output_dir) / args.command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(args, argv: Sequence[str], config: Dict[str, Any]) -> RunManifest:
    return RunManifest(command=args.command, argv=list(argv), config=config, seed=args.seed)


def cmd_oracle_check(args, config, argv) -> int:
    section = _section(config, 'oracle')
    mc_samples = int(args.mc_samples if args.mc_samples is not None else section.get('mc_samples', 1_000_000))
    results = run_suite(seed=args.seed, mc_samples=mc_samples)
    print(format_oracle_table(results))

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {'mc_samples': mc_samples})
    rows = [{'name': r.name, 'passed': r.passed, 'detail': r.detail} for r in results]
    write_csv(rows, ['name', 'passed', 'detail'], run_dir / 'oracle_check.csv')
    manifest.add_output(run_dir / 'oracle_check.csv')
    save_manifest(manifest, run_dir)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_train_synthetic(args, config, argv) -> int:
    settings = trainer_settings(args, config)
    params = loss_params(args, config)
    cfg = TrainerConfig.from_dict(_merge(settings, {'seed': args.seed}), loss=params)
    corpus = _corpus_from(settings, args.seed, include_null_text=args.include_null_text)
    result = train(corpus, cfg)
    row = summarize_run(corpus, cfg, result)

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {**cfg.to_dict(), **{k: settings.get(k, v) for k, v in CORPUS_DEFAULTS.items()},
                                      'include_null_text': args.include_null_text})
    table = result.table
    records = [EmbeddingRecord(table.embedding(i), m) for i, m in zip(table.ids, table.modalities)]
    save_corpus(corpus, run_dir / 'corpus.json')
    save_embeddings(records, run_dir / 'embeddings.jsonl')
    write_csv([r.as_dict() for r in result.trace], TRACE_COLUMNS, run_dir / 'trace.csv')
    write_csv([row.as_dict()], ABLATION_COLUMNS, run_dir / 'summary.csv')
    specificity = variance_by_specificity(table, corpus)
    write_csv(specificity, SPECIFICITY_COLUMNS, run_dir / 'specificity.csv')
    for name in ('corpus.json', 'embeddings.jsonl', 'trace.csv', 'summary.csv', 'specificity.csv'):
        manifest.add_output(run_dir / name)
    save_manifest(manifest, run_dir)

    report_module.print_ablation([row.as_dict()])
    report_module.print_specificity(specificity)
    print(f"\n✓ Artifacts written to {run_dir}")
    return EXIT_OK


def cmd_bprw(args, config, argv) -> int:
    few_shot = args.few_shot_labels is not None
    cfg = BprwConfig.from_dict(_merge(_section(config, 'bprw'), {
        'alpha': args.alpha, 'eps_cov': args.eps_cov, 'm': args.m, 'k': args.k,
        'total_points': args.total_points, 'tol': args.tol, 'max_iters': args.max_iters,
    }), few_shot=few_shot)
    prompt_records = load_embeddings(args.prompts)
    image_records = load_embeddings(args.images)
    classes = group_prompts(prompt_records)
    pool = embeddings_of(image_records, 'image')
    labels = None
    if few_shot:
        mapping = _load_mapping(args.few_shot_labels, 'label')
        labels = [str(mapping.get(z.id)) if z.id in mapping else None for z in pool]
    results = reweight_classes(classes, pool, cfg, args.seed, labels=labels)

    weights = {}
    for class_id, result in results.items():
        weights[class_id] = {
            'prompt_ids': [z.id for z in classes[class_id]],
            'pi': result.weights.pi.tolist(),
            'iterations': result.iterations,
            'converged': result.converged,
            'ml_fallback': result.weights.ml_fallback,
            'log_posterior': result.log_posterior,
        }

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {**cfg.to_dict(), 'few_shot': few_shot})
    manifest.add_input(args.prompts)
    manifest.add_input(args.images)
    if few_shot:
        manifest.add_input(args.few_shot_labels)
    write_json(weights, run_dir / 'weights.json')
    manifest.add_output(run_dir / 'weights.json')
    save_manifest(manifest, run_dir)

    print(format_weights_table(weights))
    return EXIT_OK


def _class_sets(args, classes, n_std: float) -> List[ClassPromptSet]:
    if args.weights:
        weights = _load_mapping(args.weights, 'weights')
        sets = []
        for class_id, prompts in classes.items():
            if class_id not in weights:
                raise InvalidArgumentError(f"weights file has no entry for class '{class_id}'")
            entry = weights[class_id]
            if list(entry.get('prompt_ids', [])) != [z.id for z in prompts]:
                raise InvalidArgumentError(f"weights for '{class_id}' name different prompts")
            sets.append(ClassPromptSet.from_weights(class_id, prompts, entry['pi']))
        return sets
    if args.filter == SIGMA_STATS:
        return [ClassPromptSet.from_prompts(c, filter_prompts(p, SIGMA_STATS, n_std=n_std))
                for c, p in classes.items()]
    if args.filter == TOP_K:
        return [ClassPromptSet.from_prompts(c, filter_prompts(p, TOP_K, k=min(args.top_k, len(p))))
                for c, p in classes.items()]
    return [ClassPromptSet.from_prompts(c, p) for c, p in classes.items()]


def cmd_zsc(args, config, argv) -> int:
    records = load_embeddings(args.input)
    images = embeddings_of(records, 'image') or [r.embedding for r in records]
    if not images:
        raise InvalidArgumentError(f"no embeddings in '{args.input}'")
    n_std = float(args.n_std if args.n_std is not None else _section(config, 'inference').get('sigma_stats_n_std', 1.0))
    class_sets = _class_sets(args, group_prompts(load_embeddings(args.prompts)), n_std)

    rows = []
    for image in images:
        result = zsc_classify(image, class_sets)
        rows.append({'image_id': image.id, 'class_id': result.class_id, 'csd': result.scores[result.class_id]})
    summary: Dict[str, Any] = {'Images': len(rows), 'Classes': len(class_sets)}
    if args.labels:
        labels = _load_mapping(args.labels, 'label')
        scored = [r for r in rows if r['image_id'] in labels]
        if scored:
            summary['Top-1 accuracy'] = sum(str(labels[r['image_id']]) == r['class_id'] for r in scored) / len(scored)

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {'filter': args.filter, 'top_k': args.top_k, 'n_std': n_std})
    for path in (args.input, args.prompts, args.weights, args.labels):
        if path:
            manifest.add_input(path)
    write_csv(rows, ['image_id', 'class_id', 'csd'], run_dir / 'predictions.csv')
    manifest.add_output(run_dir / 'predictions.csv')
    save_manifest(manifest, run_dir)

    print(format_summary(summary, "Zero-Shot Classification"))
    return EXIT_OK


def _traversal_inputs(args):
    """(images, captions, null_text, ground_truth or None)"""
    if args.constructed:
        corpus = generate_hierarchy(args.branches, args.leaves)
        return corpus.images, corpus.captions, corpus.null_text, corpus.ground_truth
    if not (args.input and args.captions and args.null_id):
        raise InvalidArgumentError("traverse needs --constructed or --input, --captions and --null-id")
    images = embeddings_of(load_embeddings(args.input), 'image')
    texts = embeddings_of(load_embeddings(args.captions), 'text')
    null = [z for z in texts if z.id == args.null_id]
    if not null:
        raise InvalidArgumentError(f"null text '{args.null_id}' not found in {args.captions}")
    captions = [z for z in texts if z.id != args.null_id]
    ground_truth = _load_mapping(args.ground_truth, 'ground truth') if args.ground_truth else None
    return images, captions, null[0], ground_truth


def cmd_traverse(args, config, argv) -> int:
    section = _section(config, 'inference')
    steps = int(args.steps if args.steps is not None else section.get('steps', 50))
    eps_log = float(args.eps_log if args.eps_log is not None else section.get('eps_log', -10.0))
    images, captions, null_text, ground_truth = _traversal_inputs(args)
    modes = [ROOT_INCLUSION, ROOT_NULL] if args.root_mode == 'both' else [args.root_mode]

    paths = {}
    metric_rows = []
    for mode in modes:
        paths[mode] = [traverse(image, captions, null_text, steps=steps, eps_inc=math.exp(eps_log), root_mode=mode)
                       for image in images]
        if ground_truth is not None:
            metrics = traversal_metrics(paths[mode], ground_truth)
            metric_rows.append({'root_mode': mode, **metrics.as_dict()})

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {'steps': steps, 'eps_log': eps_log, 'root_mode': args.root_mode,
                                      'constructed': args.constructed, 'branches': args.branches,
                                      'leaves': args.leaves})
    for path in (args.input, args.captions, args.ground_truth):
        if path and not args.constructed:
            manifest.add_input(path)
    write_json({mode: [p.to_dict() for p in mode_paths] for mode, mode_paths in paths.items()},
               run_dir / 'traversal.json')
    manifest.add_output(run_dir / 'traversal.json')
    if metric_rows:
        write_csv(metric_rows, ['root_mode', 'precision', 'recall', 'root_recall'], run_dir / 'traversal_metrics.csv')
        manifest.add_output(run_dir / 'traversal_metrics.csv')
    save_manifest(manifest, run_dir)

    for row in metric_rows:
        print(format_summary({k: v for k, v in row.items() if k != 'root_mode'},
                             f"Traversal Metrics ({row['root_mode']} root)"))
    if not metric_rows:
        print(format_summary({'Paths': len(images), 'Steps': steps}, "Traversal"))
    return EXIT_OK


def cmd_hier_eval(args, config, argv) -> int:
    section = _section(config, 'inference')
    eps_log = float(args.eps_log if args.eps_log is not None else section.get('eps_log', -10.0))
    if args.constructed:
        pairs = generate_hierarchy(args.branches, args.leaves).pairs
    else:
        if not (args.input and args.pairs):
            raise InvalidArgumentError("hier-eval needs --constructed or --input and --pairs")
        by_id = {r.id: r.embedding for r in load_embeddings(args.input)}
        listed = _load_mapping(args.pairs, 'pairs')
        try:
            pairs = [(by_id[specific], by_id[general]) for specific, general in listed]
        except KeyError as e:
            raise InvalidArgumentError(f"pair references unknown id {e}") from None
        except (TypeError, ValueError):
            raise InvalidArgumentError("pairs file must list [specific_id, general_id] entries") from None
    result = eval_hierarchy_inclusion(pairs, eps_inc=math.exp(eps_log))

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {'eps_log': eps_log, 'constructed': args.constructed,
                                      'branches': args.branches, 'leaves': args.leaves})
    if not args.constructed:
        manifest.add_input(args.input)
        manifest.add_input(args.pairs)
    write_json({
        'fraction': result.fraction,
        'pairs': [[s.id, g.id] for s, g in pairs],
        'h_values': result.h_values,
        'histogram': {'counts': result.histogram_counts, 'edges': result.histogram_edges},
    }, run_dir / 'hier_eval.json')
    manifest.add_output(run_dir / 'hier_eval.json')
    save_manifest(manifest, run_dir)

    print(format_summary({'Pairs': len(pairs), 'Included fraction': result.fraction}, "Hierarchy Inclusion"))
    return EXIT_OK


def cmd_report(args, config, argv) -> int:
    settings = trainer_settings(args, config)
    base_loss = loss_params(args, config).to_dict()
    corpus = _corpus_from(settings, args.seed)
    entries = config.get('ablation') or DEFAULT_ABLATION
    configs = []
    for entry in entries:
        entry = dict(entry)
        name = str(entry.pop('name', f"config{len(configs)}"))
        loss = LossParams.from_dict({**base_loss, **entry})
        configs.append(TrainerConfig.from_dict(_merge(settings, {'seed': args.seed, 'name': name}), loss=loss))
    rows = [row.as_dict() for row in ablation_report(corpus, configs)]

    run_dir = _run_dir(args)
    manifest = _manifest(args, argv, {'trainer': {k: settings.get(k) for k in sorted(settings)},
                                      'configs': [c.to_dict() for c in configs]})
    write_csv(rows, ABLATION_COLUMNS, run_dir / 'ablation.csv')
    manifest.add_output(run_dir / 'ablation.csv')
    save_manifest(manifest, run_dir)

    report_module.print_ablation(rows)
    return EXIT_OK


def _add_loss_flags(p):
    p.add_argument('--alpha1', type=float, default=None, help='Matched-pair inclusion weight. Default: 1e-7.')
    p.add_argument('--alpha2', type=float, default=None, help='Masked-pair inclusion weight. Default: 1e-3.')
    p.add_argument('--beta', type=float, default=None, help='VIB weight. Default: 1e-4.')
    p.add_argument('--c', type=float, default=None, help='Inclusion loss sharpness. Default: 10.')
    p.add_argument('--eps-log', type=float, default=None, help='log of the inclusion epsilon. Default: -10.')


def _add_trainer_flags(p):
    p.add_argument('--n-images', type=int, default=None, help='Synthetic images. Default: 32.')
    p.add_argument('--n-texts', type=int, default=None, help='Synthetic texts. Default: 32.')
    p.add_argument('--n-attributes', type=int, default=None, help='Attribute vocabulary size. Default: 8.')
    p.add_argument('--dim', type=int, default=None, help='Embedding dimension. Default: 16.')
    p.add_argument('--learning-rate', type=float, default=None, help='Gradient-descent rate. Default: 1e-3.')
    p.add_argument('--steps', type=int, default=None, help='Descent steps. Default: 200.')
    p.add_argument('--batch-size', type=int, default=None, help='Items per modality per step. Default: 32.')
    p.add_argument('--mask-pair-fraction', type=float, default=None,
                   help='Share of items with a masked variant. Default: 0.125.')
    p.add_argument('--mask-ratio', type=float, default=None, help='Share of attributes masked out. Default: 0.75.')


def build_parser() -> argparse.ArgumentParser:
    common = GikitArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='Seed for all randomness. Default: 0.')
    common.add_argument('--config', default=None, help='YAML configuration file.')
    common.add_argument('--output-dir', default=None,
                        help='Artifact directory. Default: $GIKIT_OUTPUT_DIR or ~/.local/share/gikit.')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Log level for stderr. Default: INFO.')

    parser = GikitArgumentParser(
        prog='gikit',
        description='gikit - probabilistic (Gaussian) embedding losses, oracles and experiments'
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('oracle-check', parents=[common], help='Run the oracle-versus-analytic suite')
    p.add_argument('--mc-samples', type=int, default=None, help='Monte-Carlo draws per check. Default: 1000000.')

    p = sub.add_parser('train-synthetic', parents=[common], help='Train on a synthetic corpus')
    _add_trainer_flags(p)
    _add_loss_flags(p)
    p.add_argument('--include-null-text', action='store_true', help='Make the first text the empty text.')

    p = sub.add_parser('bprw', parents=[common], help='Bayesian prompt re-weighting')
    p.add_argument('--prompts', required=True, help='Embedding file of text prompts (ids "class/prompt").')
    p.add_argument('--images', required=True, help='Embedding file of the image pool.')
    p.add_argument('--few-shot-labels', default=None,
                   help='YAML/JSON mapping image id -> class id; enables few-shot mode.')
    p.add_argument('--alpha', type=float, default=None, help='Dirichlet concentration. Default: 5 zero-shot, 2 few-shot.')
    p.add_argument('--eps-cov', type=float, default=None, help='Prompt covariance stabilizer. Default: 0.02.')
    p.add_argument('--m', type=int, default=None, help='Nearest images per class (zero-shot). Default: 5.')
    p.add_argument('--k', type=int, default=None, help='Samples per selected image (zero-shot). Default: 20.')
    p.add_argument('--total-points', type=int, default=None, help='Observations per class (few-shot). Default: 100.')
    p.add_argument('--tol', type=float, default=None, help='Convergence threshold on max |delta pi|. Default: 1e-6.')
    p.add_argument('--max-iters', type=int, default=None, help='EM iteration cap. Default: 200.')

    p = sub.add_parser('zsc', parents=[common], help='Zero-shot classification')
    p.add_argument('--input', required=True, help='Embedding file of images to classify.')
    p.add_argument('--prompts', required=True, help='Embedding file of text prompts (ids "class/prompt").')
    p.add_argument('--weights', default=None, help='weights.json from the bprw subcommand.')
    p.add_argument('--filter', default='none', choices=['none', SIGMA_STATS, TOP_K],
                   help='Prompt filtering before ensembling. Default: none.')
    p.add_argument('--top-k', type=int, default=1, help='Prompts kept per class with --filter top_k. Default: 1.')
    p.add_argument('--n-std', type=float, default=None, help='sigma_stats threshold in standard deviations. Default: 1.')
    p.add_argument('--labels', default=None, help='YAML/JSON mapping image id -> class id, for accuracy.')

    for name, help_text in (('traverse', 'Root-to-caption traversal'),
                            ('hier-eval', 'Hierarchy inclusion fraction')):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument('--constructed', action='store_true', help='Use the constructed 3-level hierarchy.')
        p.add_argument('--branches', type=int, default=2, help='Mid-level captions (constructed). Default: 2.')
        p.add_argument('--leaves', type=int, default=2, help='Specific captions per mid (constructed). Default: 2.')
        p.add_argument('--input', default=None, help='Embedding file of images / items.')
        p.add_argument('--eps-log', type=float, default=None, help='log of the inclusion epsilon. Default: -10.')
        if name == 'traverse':
            p.add_argument('--captions', default=None, help='Embedding file of captions (text records).')
            p.add_argument('--null-id', default=None, help='Caption id of the null (empty) text.')
            p.add_argument('--ground-truth', default=None,
                           help='YAML/JSON mapping image id -> caption ids, general to specific.')
            p.add_argument('--steps', type=int, default=None, help='Interpolation steps. Default: 50.')
            p.add_argument('--root-mode', default=ROOT_INCLUSION, choices=[ROOT_INCLUSION, ROOT_NULL, 'both'],
                           help='Root embedding. Default: inclusion.')
        else:
            p.add_argument('--pairs', default=None, help='YAML/JSON list of [specific_id, general_id].')

    p = sub.add_parser('report', parents=[common], help='Ablation table over loss configurations')
    _add_trainer_flags(p)
    _add_loss_flags(p)

    return parser


COMMANDS = {
    'oracle-check': cmd_oracle_check,
    'train-synthetic': cmd_train_synthetic,
    'bprw': cmd_bprw,
    'zsc': cmd_zsc,
    'traverse': cmd_traverse,
    'hier-eval': cmd_hier_eval,
    'report': cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(levelname)s: %(message)s'
    )

    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config, argv)
    except NumericError as e:
        logger.error(f"numeric failure: {e}")
        return EXIT_NUMERIC
    except InvalidArgumentError as e:
        logger.error(str(e))
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
