"""
Corpus scale checks of the whole pipeline against the synthetic oracle.

These take minutes and are deselected by default, run them with
``bin/pytest -m acceptance``.
"""
import numpy
import pytest

from pincer.classifier import (
    cross_validate,
    train,
)
from pincer.constants import Variant
from pincer.pipeline import (
    PipelineConfig,
    eval_scene,
    label_scene,
    oracle_labels,
    scene_training_data,
)
from pincer.synth.corpus import make_corpus

pytestmark = pytest.mark.acceptance

TRAIN = {
    'sampler': {'n_samples': 200},
    'labeler': {'balance': True},
}


def corpus_rows(corpus, cfg):
    rows, labels = [], []
    for index, (_, views) in enumerate(corpus):
        scene_rows, scene_labels, _, _ = scene_training_data(
            views[0], views[1], cfg.with_seed(index))
        rows.append(scene_rows)
        labels.extend(scene_labels)
    return numpy.vstack(rows), labels


@pytest.fixture(scope='module')
def training_set():
    cfg = PipelineConfig.from_dict(TRAIN)
    corpus = make_corpus('single', 20, seed=11)
    yield corpus_rows(corpus, cfg)


class TestLabelerAgreement(object):

    def _agreement(self, corpus, cfg):
        positives = agreeing = 0
        for index, (scene, views) in enumerate(corpus):
            labeled, _, _ = label_scene(views[0], views[1],
                                        cfg.with_seed(index))
            hands = [hand for hand, out in labeled if out.positive]
            truth = oracle_labels(scene, hands, cfg.synth['friction'])
            positives += len(hands)
            agreeing += int(truth.sum())
        assert positives > 0
        return float(agreeing) / positives

    def test_single(self):
        cfg = PipelineConfig.from_dict({'sampler': {'n_samples': 300}})
        assert self._agreement(make_corpus('single', 10, seed=3), cfg) >= 0.95

    def test_clutter(self):
        cfg = PipelineConfig.from_dict({'sampler': {'n_samples': 500}})
        corpus = make_corpus('clutter', 4, seed=5, objects=5)
        assert self._agreement(corpus, cfg) >= 0.95


class TestCrossValidation(object):

    def test_accuracy(self, training_set):
        rows, labels = training_set
        assert len(labels) >= 2000
        result = cross_validate(rows, labels, folds=10)
        assert result['accuracy'] >= 0.90


class TestDetectionQuality(object):

    def _precision(self, corpus, model, variant):
        cfg = PipelineConfig.from_dict({})
        hits = [eval_scene(scene, views[0], views[1], model,
                           cfg.with_seed(index), variant)[0]['top_antipodal']
                for index, (scene, views) in enumerate(corpus)]
        return float(numpy.mean(hits))

    def test_top_grasps(self, training_set):
        rows, labels = training_set
        model = train(rows, labels)
        corpus = make_corpus('clutter', 20, seed=101, objects=10)
        svm = self._precision(corpus, model, Variant.svm)
        unclassified = self._precision(corpus, None, Variant.unclassified)
        assert svm >= 0.8
        assert unclassified < svm
