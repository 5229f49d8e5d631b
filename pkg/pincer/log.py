"""
Logging, error reporting and metrics for pipeline runs.

Stage durations are sent as ``pipeline`` timers tagged ``stage:<name>``
and funnel counts as ``pipeline.funnel`` counters tagged ``step:<name>``.
Without a Sentry DSN or statsd host, in-memory clients are used which
the tests inspect.
"""
from collections import (
    deque,
    namedtuple,
)
import logging
from logging.config import dictConfig

from raven import Client as RavenClient
from raven.transport.http import HTTPTransport
from raven.transport.threaded import ThreadedHTTPTransport
from datadog.dogstatsd.base import DogStatsd

from pincer.config import (
    RELEASE,
    SENTRY_DSN,
    STATSD_HOST,
    STATSD_PORT,
    TESTING,
)

LOGGER = logging.getLogger('pincer')

LOGGING_FORMAT = '%(asctime)s %(levelname)-5.5s [%(processName)s] %(message)s'
LOGGING_DATEFMT = '%H:%M:%S'

RAVEN_TRANSPORTS = {
    'sync': HTTPTransport,
    'threaded': ThreadedHTTPTransport,
}

METRIC_KINDS = {
    'c': 'counter',
    'g': 'gauge',
    'h': 'histogram',
    'ms': 'timer',
    's': 'set',
}

StatsMessage = namedtuple('StatsMessage', 'kind name value tags')


def logging_config(level):
    # Worker processes log through the same stderr handler.
    return {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'generic': {
                'format': LOGGING_FORMAT,
                'datefmt': LOGGING_DATEFMT,
            },
        },
        'handlers': {
            'stderr': {
                'class': 'logging.StreamHandler',
                'formatter': 'generic',
                'stream': 'ext://sys.stderr',
            },
        },
        'root': {
            'handlers': ['stderr'],
            'level': logging.WARN,
        },
        'loggers': {
            'pincer': {'level': level},
        },
    }


def configure_logging(verbose=False):
    """Configure Python logging for a command line run."""
    level = logging.DEBUG if verbose else logging.INFO
    if TESTING:
        logging.basicConfig(format=LOGGING_FORMAT, datefmt=LOGGING_DATEFMT)
        if verbose:
            LOGGER.setLevel(level)
    else:  # pragma: no cover
        dictConfig(logging_config(level))


def configure_raven(transport=None, _client=None):
    """
    Configure and return a :class:`raven.Client` instance.

    :param transport: One of the :data:`RAVEN_TRANSPORTS` keys.
    :param _client: Test-only hook to provide a pre-configured client.
    """
    if _client is not None:
        return _client

    if transport not in RAVEN_TRANSPORTS:
        raise ValueError('Unknown raven transport %r.' % transport)

    klass = RavenClient if SENTRY_DSN else DebugRavenClient
    return klass(dsn=SENTRY_DSN, transport=RAVEN_TRANSPORTS[transport],
                 release=RELEASE)


def configure_stats(_client=None):
    """
    Configure and return a :class:`~pincer.log.StatsClient` instance.

    :param _client: Test-only hook to provide a pre-configured client.
    """
    if _client is not None:
        return _client

    klass = StatsClient if STATSD_HOST else DebugStatsClient
    return klass(host=STATSD_HOST or 'localhost', port=STATSD_PORT,
                 namespace=None if TESTING else 'pincer',
                 use_ms=True, disable_telemetry=True)


class DebugRavenClient(RavenClient):
    """Keeps captured events in memory instead of sending them."""

    def __init__(self, *args, **kw):
        super(DebugRavenClient, self).__init__(*args, **kw)
        self.msgs = deque(maxlen=100)

    def _clear(self):
        self.msgs.clear()
        self.context.clear()

    def is_enabled(self):
        return True

    def send(self, auth_header=None, **data):
        self.msgs.append(data)
        self._successful_send()

    def check(self, expected=()):
        """
        Assert on and consume captured events.

        Every expectation is a message prefix, usually the exception
        class name, or a tuple of prefix and expected count.
        """
        for item in expected:
            prefix, count = item if isinstance(item, tuple) else (item, 1)
            found = [msg for msg in self.msgs
                     if msg['message'].startswith(prefix)]
            assert len(found) == count, [msg['message'] for msg in self.msgs]
            for msg in found:
                self.msgs.remove(msg)


class StatsClient(DogStatsd):
    """A statsd client knowing the pipeline metrics."""

    def close(self):
        if self.socket:  # pragma: no cover
            self.socket.close()
            self.socket = None

    def incr(self, *args, **kw):
        return self.increment(*args, **kw)

    def stage(self, name, seconds):
        """Report the wall clock time spent in one pipeline stage."""
        self.timing('pipeline', seconds * 1000.0, tags=['stage:%s' % name])

    def funnel(self, counts):
        """Emit one counter per pipeline funnel step."""
        for step, value in counts.items():
            self.incr('pipeline.funnel', value, tags=['step:%s' % step])


def parse_datagram(line):
    """Split one dogstatsd line into kind, name, value and tags."""
    fields = line.split('|')
    name, value = fields[0].rsplit(':', 1)
    tags = ()
    for field in fields[2:]:
        # sample rates and container ids are skipped
        if field.startswith('#'):
            tags = tuple(field[1:].split(','))
    return StatsMessage(METRIC_KINDS.get(fields[1]), name, float(value), tags)


def _expectation(item):
    """
    Normalize ``name``, ``(name, count)``, ``(name, tags)``,
    ``(name, count, value)``, ``(name, count, tags)`` and
    ``(name, count, value, tags)`` to a (name, count, value, tags) tuple.
    """
    if isinstance(item, str):
        return item, 1, None, None
    if not isinstance(item, tuple) or not 1 <= len(item) <= 4:
        raise TypeError('wanted str or 2 to 4 tuple, got %r' % (item, ))
    name, rest = item[0], list(item[1:])
    tags = rest.pop() if rest and isinstance(rest[-1], list) else None
    count = rest[0] if rest else 1
    value = rest[1] if len(rest) > 1 else None
    return name, count, value, tags


class DebugStatsClient(StatsClient):
    """Keeps sent metric lines in memory instead of sending them."""

    def __init__(self, *args, **kw):
        super(DebugStatsClient, self).__init__(*args, **kw)
        self.msgs = deque(maxlen=1000)

    def _clear(self):
        self.msgs.clear()

    def _send_to_server(self, packet):
        self.msgs.extend(line for line in packet.split('\n') if line)

    def messages(self, kind=None, name=None):
        parsed = [parse_datagram(line) for line in self.msgs]
        return [msg for msg in parsed
                if (kind is None or msg.kind == kind) and
                (name is None or msg.name == name)]

    def check(self, total=None, **kw):
        """
        Assert on the sent metrics. Keyword names are metric kinds
        (counter, gauge, histogram, set, timer), each with a list of
        expectations as accepted by :func:`_expectation`.
        """
        if total is not None:
            assert total == len(self.msgs), list(self.msgs)

        for kind, expectations in kw.items():
            for item in expectations:
                name, count, value, tags = _expectation(item)
                found = [msg for msg in self.messages(kind, name)
                         if (value is None or msg.value == value) and
                         (tags is None or list(msg.tags) == list(tags))]
                assert len(found) == count, list(self.msgs)
