"""
Process wide settings read from environment variables.

Everything the pipeline itself is tuned by lives in
:class:`pincer.pipeline.PipelineConfig`, this module only holds
deployment concerns.
"""
from __future__ import absolute_import

import os
import os.path

import simplejson

HERE = os.path.dirname(__file__)


def _env_int(name, default):
    value = os.environ.get(name)
    if not value:
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError('%s must be an integer, got %r.' % (name, value))


def _release():
    # Release builds ship a version.json next to the package.
    release = os.environ.get('PINCER_RELEASE')
    path = os.path.join(HERE, 'version.json')
    if release is None and os.path.isfile(path):
        with open(path, 'r') as fd:
            release = simplejson.load(fd).get('tag')
    return release


TESTING = 'TESTING' in os.environ
RELEASE = _release()

SENTRY_DSN = os.environ.get('SENTRY_DSN')
STATSD_HOST = os.environ.get('STATSD_HOST')
STATSD_PORT = _env_int('STATSD_PORT', 8125)

# Worker processes of the parallel stages unless --jobs is given.
JOBS = _env_int('PINCER_JOBS', 1)
