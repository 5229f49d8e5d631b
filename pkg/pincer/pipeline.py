"""
The detection pipeline and its configuration.

Stages run sequentially: preprocess, sample, label or classify,
cluster and rank. All randomness derives from the single pipeline seed,
hashed with the stage name.
"""
from collections import OrderedDict
from contextlib import contextmanager
import os.path
import time

import numpy
import simplejson

from pincer import constants
from pincer.classifier import SvmConfig
from pincer.cloud import (
    crop_workspace,
    merge_registered,
    voxelize,
)
from pincer.constants import Variant
from pincer.exceptions import (
    ConfigError,
    EmptyCloudError,
)
from pincer.features import (
    FeatureConfig,
    hand_descriptors,
    training_rows,
)
from pincer.hand import HandParams
from pincer.labeler import (
    LabelerConfig,
    antipodal_score,
    balance,
    label_dataset,
    label_hands,
)
from pincer.log import LOGGER
from pincer.sampler import (
    SamplerConfig,
    sample_hands,
)
from pincer.schema import (
    PipelineSchema,
    ValidationMixin,
)
from pincer.selection import (
    SelectionConfig,
    cluster_hands,
    rank_grasps,
)
from pincer.surface import estimate_normals
from pincer.synth.oracle import (
    hand_from_pose,
    oracle_antipodal,
)
from pincer.util import (
    chunked,
    parallel_map,
    stage_seed,
)


class Workspace(object):

    def __init__(self, min=constants.WORKSPACE[0], max=constants.WORKSPACE[1],
                 voxel=constants.VOXEL_SIZE):
        self.min = tuple(float(v) for v in min)
        self.max = tuple(float(v) for v in max)
        self.voxel = float(voxel)

    def to_dict(self):
        return {'min': list(self.min), 'max': list(self.max),
                'voxel': self.voxel}


class PipelineConfig(ValidationMixin):
    """Every section of a pipeline run plus the run seed."""

    _valid_schema = PipelineSchema()

    def __init__(self, hand=None, sampler=None, labeler=None, features=None,
                 svm=None, selection=None, workspace=None, synth=None,
                 seed=0):
        self.hand = hand or HandParams()
        self.sampler = sampler or SamplerConfig()
        self.labeler = labeler or LabelerConfig()
        self.features = features or FeatureConfig()
        self.svm = svm or SvmConfig()
        self.selection = selection or SelectionConfig()
        self.workspace = workspace or Workspace()
        self.synth = dict(synth or {
            'rays_h': constants.CAMERA_RAYS[0],
            'rays_v': constants.CAMERA_RAYS[1],
            'noise': constants.CAMERA_NOISE,
            'friction': constants.FRICTION,
        })
        self.seed = int(seed)

    @classmethod
    def from_dict(cls, data, base_dir=None):
        """
        Build a configuration from a mapping. The hand section may name
        a hand parameter file, relative to base_dir.

        :raises: :exc:`~pincer.exceptions.ConfigError`
        """
        if not isinstance(data, dict):
            raise ConfigError('Configuration must be a JSON object.')
        data = dict(data)
        hand = data.get('hand')
        if isinstance(hand, str):
            if base_dir and not os.path.isabs(hand):
                hand = os.path.join(base_dir, hand)
            if not os.path.isfile(hand):
                raise ConfigError('Hand parameter file %s not found.' % hand)
            data['hand'] = HandParams.load(hand).to_dict()

        values = cls.validate(data, _raise_invalid=True)
        return cls(
            hand=HandParams(**values['hand']),
            sampler=SamplerConfig(**values['sampler']),
            labeler=LabelerConfig(**values['labeler']),
            features=FeatureConfig(**values['features']),
            svm=SvmConfig(**values['svm']),
            selection=SelectionConfig(**values['selection']),
            workspace=Workspace(**values['workspace']),
            synth=values['synth'],
            seed=values['seed'])

    @classmethod
    def load(cls, filename):
        try:
            with open(filename, 'r') as fd:
                data = simplejson.load(fd)
        except (IOError, OSError) as exc:
            raise ConfigError('Cannot read config %s: %s' % (filename, exc))
        except ValueError as exc:
            raise ConfigError('%s: %s' % (filename, exc))
        return cls.from_dict(data, os.path.dirname(os.path.abspath(filename)))

    def with_seed(self, seed):
        """A copy using another run seed."""
        return PipelineConfig(self.hand, self.sampler, self.labeler,
                              self.features, self.svm, self.selection,
                              self.workspace, self.synth, seed)

    def sampler_for(self, stage):
        values = self.sampler.to_dict()
        values['seed'] = stage_seed(self.seed, stage)
        return SamplerConfig(**values)

    def to_dict(self):
        return {
            'hand': self.hand.to_dict(),
            'sampler': self.sampler.to_dict(),
            'labeler': self.labeler.to_dict(),
            'features': self.features.to_dict(),
            'svm': self.svm.to_dict(),
            'selection': self.selection.to_dict(),
            'workspace': self.workspace.to_dict(),
            'synth': dict(self.synth),
            'seed': self.seed,
        }


class StageTimer(object):
    """Wall clock time per stage, reported as pipeline timers."""

    def __init__(self, stats_client=None):
        self.stats_client = stats_client
        self.durations = OrderedDict()

    @contextmanager
    def __call__(self, name):
        start = time.time()
        try:
            yield
        finally:
            elapsed = time.time() - start
            self.durations[name] = self.durations.get(name, 0.0) + elapsed
            if self.stats_client is not None:
                self.stats_client.stage(name, elapsed)


def preprocess(cloud, workspace):
    """Voxelize on the workspace grid, then crop to the workspace box."""
    if len(cloud):
        cloud = voxelize(cloud, workspace.voxel, anchor=workspace.min)
    return crop_workspace(cloud, workspace.min, workspace.max)


def registered_cloud(c1, c2=None, views=2):
    """The cloud seen by the detector, one view or both merged."""
    if views not in (1, 2):
        raise ConfigError('Views must be 1 or 2.')
    if views == 1 or c2 is None:
        return c1
    return merge_registered(c1, c2)


def split_views(cloud):
    """Per-view clouds of a preprocessed two view cloud."""
    ids = sorted(cloud.used_views())
    if not ids:
        return cloud, cloud
    second = ids[1:] or ids[:1]
    return cloud.select_views(ids[:1]), cloud.select_views(second)


def label_scene(c1, c2, cfg, jobs=1, timer=None):
    """
    Sample and automatically label hands on a two view scene.

    :returns: (labeled, (view_1, view_2, merged), funnel)
    """
    timer = timer or StageTimer()
    with timer('preprocess'):
        cloud = preprocess(registered_cloud(c1, c2), cfg.workspace)
    if not len(cloud):
        raise EmptyCloudError('No points left after cropping.')
    with timer('normals'):
        cloud = estimate_normals(cloud, cfg.labeler.normal_radius, jobs=jobs)
    with timer('sample'):
        hands = sample_hands(cloud, cfg.hand, cfg.sampler_for('sample'),
                             jobs=jobs)
    with timer('label'):
        labeled = label_dataset(hands, None, None, cfg.labeler.k,
                                cfg.labeler.theta, cfg.labeler.negative_rule,
                                cloud12=cloud, jobs=jobs)
    if cfg.labeler.balance:
        labeled = balance(labeled, stage_seed(cfg.seed, 'balance'))

    funnel = dict(hands.funnel)
    funnel['labeled'] = len(labeled)
    funnel['positives'] = sum(1 for _, out in labeled if out.positive)
    view_1, view_2 = split_views(cloud)
    return labeled, (view_1, view_2, cloud), funnel


def scene_training_data(c1, c2, cfg, jobs=1, timer=None):
    """Labeled descriptor rows of one scene, three per hand."""
    timer = timer or StageTimer()
    labeled, clouds, funnel = label_scene(c1, c2, cfg, jobs, timer)
    with timer('features'):
        rows, labels, tags = training_rows(
            labeled, clouds[0], clouds[1], clouds[2],
            cfg.features.occupancy, jobs=jobs)
    return rows, labels, tags, funnel


class Detection(object):
    """Sampled hands, their scores and the ranked grasp clusters."""

    def __init__(self, cloud, hands, scores, positive, clusters, funnel):
        self.cloud = cloud
        self.hands = hands
        self.scores = scores
        self.positive = positive
        self.clusters = clusters
        self.funnel = funnel


def classify(hands, cloud, model, cfg, variant=Variant.svm, jobs=1):
    """
    Scores and positive flags of hands under a detection variant.

    :returns: (scores, positive)
    """
    variant = Variant(variant)
    if not hands:
        return numpy.zeros(0), numpy.zeros(0, dtype=bool)
    if variant == Variant.svm:
        if model is None:
            raise ConfigError('The svm variant needs a model.')
        rows = hand_descriptors(hands, cloud, cfg.features.occupancy, jobs)
        scores = model.decision_function(rows)
        return scores, scores >= 0.0
    if variant == Variant.antipodal:
        if not cloud.has_normals:
            cloud = estimate_normals(cloud, cfg.labeler.normal_radius, jobs)
        outcomes = label_hands(hands, cloud, cfg.labeler.k,
                               cfg.labeler.theta, cfg.labeler.negative_rule,
                               jobs=jobs)
        scores = numpy.array([antipodal_score(o) for o in outcomes],
                             dtype=numpy.float64)
        return scores, numpy.array([o.positive for o in outcomes])
    return numpy.zeros(len(hands)), numpy.ones(len(hands), dtype=bool)


def detect(c1, c2, model, cfg, variant=Variant.svm, views=2, jobs=1,
           timer=None):
    """
    Run preprocessing, sampling, classification, clustering and ranking.

    :raises: :exc:`~pincer.exceptions.EmptyCloudError`
    """
    timer = timer or StageTimer()
    with timer('preprocess'):
        cloud = preprocess(registered_cloud(c1, c2, views), cfg.workspace)
    if not len(cloud):
        raise EmptyCloudError('No points left after cropping.')
    with timer('sample'):
        hands = sample_hands(cloud, cfg.hand, cfg.sampler_for('sample'),
                             jobs=jobs)
    with timer('classify'):
        scores, positive = classify(hands, cloud, model, cfg, variant, jobs)

    selected = numpy.flatnonzero(positive)
    selection = cfg.selection
    with timer('select'):
        clusters = cluster_hands([hands[i] for i in selected],
                                 scores[selected], selection.distance,
                                 selection.theta, selection.min_size)
        for cluster in clusters:
            cluster.members = tuple(int(selected[m])
                                    for m in cluster.members)
        clusters = rank_grasps(clusters, selection.reference, selection.up)

    funnel = OrderedDict([
        ('samples', hands.funnel['samples']),
        ('hypotheses', len(hands)),
        ('positives', int(len(selected))),
        ('clusters', len(clusters)),
    ])
    LOGGER.info('Detected %s clusters from %s hypotheses (%s positive)',
                len(clusters), len(hands), len(selected))
    return Detection(cloud, hands, scores, positive, clusters, funnel)


def _oracle_chunk(scene, hands, friction):
    # this is executed in a worker process
    return [oracle_antipodal(scene, hand, friction) for hand in hands]


def oracle_labels(scene, hands, friction=constants.FRICTION, jobs=1):
    hands = list(hands)
    chunks = chunked(len(hands), max(1, jobs) * 4)
    results = parallel_map(
        _oracle_chunk,
        [(scene, [hands[i] for i in chunk], friction) for chunk in chunks],
        jobs)
    return numpy.array([value for result in results for value in result],
                       dtype=bool)


def eval_scene(scene, c1, c2, model, cfg, variant=Variant.svm, views=2,
               jobs=1, timer=None):
    """
    Score a detection against the oracle.

    Precision is the share of reported clusters whose representative
    grasp is antipodal; recall is the share of antipodal hypotheses the
    classifier kept.
    """
    timer = timer or StageTimer()
    detection = detect(c1, c2, model, cfg, variant, views, jobs, timer)
    friction = cfg.synth.get('friction', constants.FRICTION)
    with timer('oracle'):
        truth = oracle_labels(scene, detection.hands, friction, jobs)
        grasps = [hand_from_pose((c.rotation, c.position), cfg.hand)
                  for c in detection.clusters]
        reported = oracle_labels(scene, grasps, friction, jobs)

    antipodal = int(truth.sum())
    kept = int((truth & detection.positive).sum()) if antipodal else 0
    return OrderedDict([
        ('hypotheses', len(detection.hands)),
        ('positives', int(detection.positive.sum())),
        ('clusters', len(detection.clusters)),
        ('top_antipodal', bool(reported[0]) if len(reported) else False),
        ('precision',
         float(reported.mean()) if len(reported) else 0.0),
        ('recall', float(kept) / antipodal if antipodal else 0.0),
    ]), detection
