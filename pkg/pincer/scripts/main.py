"""
Command line driver running every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 processing
failure.
"""
import argparse
import csv
import io
import os
import os.path
import sys

import numpy
import simplejson

from pincer.classifier import (
    SvmModel,
    cross_validate,
    evaluate,
    train,
)
from pincer.cloud import (
    load_jsonl,
    load_pcd,
)
from pincer.config import JOBS
from pincer.constants import Variant
from pincer.exceptions import (
    BaseInputError,
    BaseProcessingError,
    CloudError,
    ConfigError,
    DatasetError,
)
from pincer.features import (
    grasp_image,
    load_dataset,
    training_rows,
    write_dataset,
    write_pgm,
)
from pincer.hand import hypothesis_to_dict
from pincer.labeler import labeled_to_dict
from pincer.log import (
    LOGGER,
    configure_logging,
    configure_raven,
    configure_stats,
)
from pincer.pipeline import (
    PipelineConfig,
    StageTimer,
    detect,
    eval_scene,
    label_scene,
    preprocess,
    registered_cloud,
)
from pincer.sampler import sample_hands
from pincer.selection import grasp_to_dict
from pincer.synth.corpus import (
    load_scene_dir,
    make_corpus,
    scene_dirs,
    write_corpus,
)
from pincer.util import atomic_write

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_PROCESSING = 3

EVAL_COLUMNS = ('scene', 'hypotheses', 'positives', 'clusters',
                'top_antipodal', 'precision', 'recall')


class UsageError(Exception):
    """Raised instead of exiting on invalid command line arguments."""


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message)


def write_json(data, filename):
    with atomic_write(filename) as out:
        out.write(simplejson.dumps(data, sort_keys=True, indent=2) + '\n')


def write_json_lines(records, filename):
    with atomic_write(filename) as out:
        for record in records:
            out.write(simplejson.dumps(record, sort_keys=True) + '\n')


def load_cloud(filename, view):
    """Read a PCD or JSON Lines cloud; plain PCD points get view."""
    if not os.path.isfile(filename):
        raise CloudError('Cloud file %s not found.' % filename)
    if filename.endswith('.jsonl'):
        return load_jsonl(filename)
    return load_pcd(filename, view=view)


def load_clouds(filenames):
    if not 1 <= len(filenames) <= 2:
        raise UsageError('Expected one or two cloud files.')
    clouds = [load_cloud(name, view) for view, name in enumerate(filenames)]
    if len(clouds) == 1:
        return clouds[0], None
    return clouds[0], clouds[1]


def resolve_scenes(paths):
    """Scene directories named directly or found below corpus roots."""
    found = []
    for path in paths:
        if not os.path.isdir(path):
            raise ConfigError('Scene path %s is not a directory.' % path)
        if os.path.isfile(os.path.join(path, 'scene.json')):
            found.append(path)
        else:
            found.extend(scene_dirs(path))
    if not found:
        raise ConfigError('No scenes found in %s.' % ', '.join(paths))
    return found


def load_datasets(filenames):
    rows, labels, tags = [], [], []
    for filename in filenames:
        more_rows, more_labels, more_tags = load_dataset(filename)
        rows.append(more_rows)
        labels.extend(more_labels)
        tags.extend(more_tags)
    dims = set(r.shape[1] for r in rows)
    if len(dims) > 1:
        raise DatasetError('Datasets differ in dimension: %s' % sorted(dims))
    return numpy.vstack(rows), labels, tags


def variant_of(args):
    if args.no_classify and args.label_classify:
        raise UsageError(
            '--no-classify and --label-classify are exclusive.')
    if args.no_classify:
        return Variant.unclassified
    if args.label_classify:
        return Variant.antipodal
    return Variant.svm


def load_model(args, variant):
    if variant != Variant.svm:
        return None
    if not args.model:
        raise UsageError('--model is required unless a variant is chosen.')
    return SvmModel.load(args.model)


def cmd_synth(args, cfg, stats_client, timer):
    synth = cfg.synth
    noise = synth['noise'] if args.noise is None else args.noise
    with timer('synth'):
        corpus = make_corpus(
            args.preset, args.count, seed=cfg.seed, objects=args.objects,
            rays=(synth['rays_h'], synth['rays_v']), noise=noise,
            jobs=args.jobs)
        paths = write_corpus(corpus, args.out)
    return {'scenes': len(paths), 'views': 2 * len(paths)}


def cmd_sample(args, cfg, stats_client, timer):
    c1, c2 = load_clouds(args.clouds)
    with timer('preprocess'):
        cloud = preprocess(registered_cloud(c1, c2, args.views),
                           cfg.workspace)
    with timer('sample'):
        hands = sample_hands(cloud, cfg.hand, cfg.sampler_for('sample'),
                             jobs=args.jobs)
    write_json_lines([hypothesis_to_dict(hand) for hand in hands], args.out)
    stats_client.funnel(hands.funnel)
    return {'funnel': hands.funnel}


def cmd_label(args, cfg, stats_client, timer):
    if args.balance:
        cfg.labeler.balance = True
    rows, labels, tags, records = [], [], [], []
    funnel = {}
    for index, path in enumerate(resolve_scenes(args.scenes)):
        _, c1, c2 = load_scene_dir(path)
        scene_cfg = cfg.with_seed(cfg.seed + index)
        labeled, clouds, scene_funnel = label_scene(
            c1, c2, scene_cfg, jobs=args.jobs, timer=timer)
        with timer('features'):
            more_rows, more_labels, more_tags = training_rows(
                labeled, clouds[0], clouds[1], clouds[2],
                cfg.features.occupancy, jobs=args.jobs)
        rows.append(more_rows)
        labels.extend(more_labels)
        tags.extend(more_tags)
        for hand, outcome in labeled:
            record = labeled_to_dict(hand, outcome)
            record['scene'] = os.path.basename(os.path.normpath(path))
            records.append(record)
        if args.images:
            write_images(args.images, index, labeled, clouds[2], cfg)
        for key, value in scene_funnel.items():
            funnel[key] = funnel.get(key, 0) + value

    write_dataset(args.out, numpy.vstack(rows), labels, tags)
    write_json_lines(records, args.out + '.hands.jsonl')
    stats_client.funnel(funnel)
    positives = sum(1 for label in labels if label > 0)
    return {'rows': len(labels), 'positives': positives,
            'negatives': len(labels) - positives, 'funnel': funnel}


def write_images(directory, scene_index, labeled, cloud, cfg):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    for i, (hand, outcome) in enumerate(labeled):
        image = grasp_image(cloud, hand, cfg.features.occupancy)
        name = 'scene%04d_hand%05d_%s.pgm' % (scene_index, i,
                                             outcome.label.name)
        write_pgm(image, os.path.join(directory, name))


def cmd_train(args, cfg, stats_client, timer):
    rows, labels, _ = load_datasets(args.datasets)
    history = [] if args.verbose else None
    with timer('train'):
        model = train(rows, labels, cfg.svm, history=history)
    model.save(args.out)
    positives = sum(1 for label in labels if label > 0)
    result = {
        'rows': len(labels),
        'positives': positives,
        'negatives': len(labels) - positives,
        'support_vectors': len(model.coefficients),
        'training': evaluate(model, rows, labels),
    }
    if history:
        result['iterations'] = len(history)
    return result


def cmd_xval(args, cfg, stats_client, timer):
    rows, labels, _ = load_datasets(args.datasets)
    with timer('xval'):
        result = cross_validate(rows, labels, folds=args.folds,
                                seed=cfg.seed, cfg=cfg.svm, jobs=args.jobs)
    if args.test_dataset:
        test_rows, test_labels, _ = load_dataset(args.test_dataset)
        with timer('test'):
            model = train(rows, labels, cfg.svm)
            result['test'] = evaluate(model, test_rows, test_labels)
    for fold, accuracy in enumerate(result['folds']):
        LOGGER.info('fold %2d: %.4f', fold, accuracy)
    LOGGER.info('mean accuracy: %.4f', result['accuracy'])
    if args.out:
        write_json(result, args.out)
    return result


def cmd_detect(args, cfg, stats_client, timer):
    variant = variant_of(args)
    model = load_model(args, variant)
    c1, c2 = load_clouds(args.clouds)
    detection = detect(c1, c2, model, cfg, variant, args.views,
                       jobs=args.jobs, timer=timer)
    write_json_lines([grasp_to_dict(cluster, rank)
                      for rank, cluster in enumerate(detection.clusters)],
                     args.out)
    summary = {
        'variant': variant.name,
        'views': args.views,
        'funnel': detection.funnel,
    }
    write_json(summary, args.out + '.summary.json')
    stats_client.funnel(detection.funnel)
    return dict(summary, timing=timer.durations)


def cmd_eval(args, cfg, stats_client, timer):
    variant = variant_of(args)
    model = load_model(args, variant)
    rows = []
    funnel = {}
    for index, path in enumerate(resolve_scenes(args.scenes)):
        scene, c1, c2 = load_scene_dir(path)
        row, detection = eval_scene(
            scene, c1, c2, model, cfg.with_seed(cfg.seed + index), variant,
            args.views, jobs=args.jobs, timer=timer)
        row['scene'] = os.path.basename(os.path.normpath(path))
        rows.append(row)
        for key, value in detection.funnel.items():
            funnel[key] = funnel.get(key, 0) + value

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=EVAL_COLUMNS,
                            lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    with atomic_write(args.out) as out:
        out.write(buffer.getvalue())

    summary = {
        'variant': variant.name,
        'views': args.views,
        'scenes': len(rows),
        'mean_precision': float(numpy.mean([r['precision'] for r in rows])),
        'mean_recall': float(numpy.mean([r['recall'] for r in rows])),
        'top_antipodal': float(numpy.mean([r['top_antipodal']
                                           for r in rows])),
        'funnel': funnel,
    }
    write_json(summary, args.out + '.summary.json')
    stats_client.funnel(funnel)
    return dict(summary, timing=timer.durations)


COMMANDS = {
    'synth': cmd_synth,
    'sample': cmd_sample,
    'label': cmd_label,
    'train': cmd_train,
    'xval': cmd_xval,
    'detect': cmd_detect,
    'eval': cmd_eval,
}


def _common(parser, out_required=True):
    parser.add_argument('--config', help='Pipeline configuration JSON.')
    parser.add_argument('--seed', type=int, help='Overrides the config seed.')
    parser.add_argument('--out', required=out_required, help='Output path.')
    parser.add_argument('--jobs', type=int, default=JOBS,
                        help='Worker processes to use.')
    parser.add_argument('--verbose', action='store_true',
                        help='Log debug messages.')


def _variants(parser):
    parser.add_argument('--model', help='Trained model JSON.')
    parser.add_argument('--views', type=int, choices=(1, 2), default=2,
                        help='Use the first view only or both views.')
    parser.add_argument('--no-classify', action='store_true',
                        help='Treat every hypothesis as positive.')
    parser.add_argument('--label-classify', action='store_true',
                        help='Use the near antipodal test as classifier.')


def make_parser(prog):
    parser = ArgumentParser(
        prog=prog, description='Detect antipodal grasps in point clouds.')
    commands = parser.add_subparsers(dest='command')

    synth = commands.add_parser('synth', help='Generate a scene corpus.')
    _common(synth)
    synth.add_argument('--preset', choices=('single', 'clutter'),
                       default='single')
    synth.add_argument('--objects', type=int, default=10,
                       help='Objects per clutter scene.')
    synth.add_argument('--count', type=int, default=1)
    synth.add_argument('--noise', type=float, help='Range noise sigma.')

    sample = commands.add_parser('sample', help='Sample hand hypotheses.')
    _common(sample)
    sample.add_argument('clouds', nargs='+', help='One or two cloud files.')
    sample.add_argument('--views', type=int, choices=(1, 2), default=2)

    label = commands.add_parser('label', help='Label a scene corpus.')
    _common(label)
    label.add_argument('scenes', nargs='+',
                       help='Scene directories or corpus roots.')
    label.add_argument('--balance', action='store_true',
                       help='Down-sample the majority class.')
    label.add_argument('--images', help='Directory for grasp images.')

    train_parser = commands.add_parser('train', help='Train a classifier.')
    _common(train_parser)
    train_parser.add_argument('datasets', nargs='+')

    xval = commands.add_parser('xval', help='Cross validate a dataset.')
    _common(xval, out_required=False)
    xval.add_argument('datasets', nargs='+')
    xval.add_argument('--folds', type=int, default=10)
    xval.add_argument('--test-dataset',
                      help='Held out dataset scored after training.')

    detect_parser = commands.add_parser('detect', help='Detect grasps.')
    _common(detect_parser)
    _variants(detect_parser)
    detect_parser.add_argument('clouds', nargs='+',
                               help='One or two cloud files.')

    eval_parser = commands.add_parser('eval', help='Score detections.')
    _common(eval_parser)
    _variants(eval_parser)
    eval_parser.add_argument('scenes', nargs='+',
                             help='Scene directories or corpus roots.')
    return parser


def run(args, stats_client):
    if args.config:
        cfg = PipelineConfig.load(args.config)
    else:
        cfg = PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.jobs < 1:
        raise UsageError('--jobs must be at least 1.')
    timer = StageTimer(stats_client)
    with stats_client.timed('pipeline', tags=['stage:%s' % args.command]):
        result = COMMANDS[args.command](args, cfg, stats_client, timer)
    sys.stdout.write(simplejson.dumps(result, sort_keys=True) + '\n')


def main(argv, _raven_client=None, _stats_client=None):
    parser = make_parser(argv[0])
    try:
        args = parser.parse_args(argv[1:])
        if not args.command:
            raise UsageError('A command is required.')
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write('%s: error: %s\n' % (parser.prog, exc))
        return EXIT_USAGE

    configure_logging(verbose=args.verbose)
    raven_client = configure_raven(transport='sync', _client=_raven_client)
    stats_client = configure_stats(_client=_stats_client)

    try:
        run(args, stats_client)
    except UsageError as exc:
        sys.stderr.write('%s %s: error: %s\n' % (
            parser.prog, args.command, exc))
        return EXIT_USAGE
    except (BaseInputError, IOError, OSError) as exc:
        LOGGER.error('%s: %s', args.command, exc)
        return EXIT_INPUT
    except BaseProcessingError as exc:
        LOGGER.error('%s: %s', args.command, exc)
        return EXIT_PROCESSING
    except Exception:
        raven_client.captureException()
        LOGGER.exception('%s: unexpected failure', args.command)
        return EXIT_PROCESSING
    return EXIT_OK


def console_entry():  # pragma: no cover
    sys.exit(main(sys.argv))
