from importlib.metadata import metadata

from . import channel
from . import codebook
from . import config
from . import dataset
from . import detector
from . import errors
from . import filesystem
from . import metrics
from . import pipeline
from . import rate
from . import scene
from . import seeding
from . import setnet

m = metadata('risbeam')

__name__ = m['Name']
__version__ = m['Version']
__description__ = m['Summary']
__license__ = m['License']
__all__ = [
    'channel',
    'codebook',
    'config',
    'dataset',
    'detector',
    'errors',
    'filesystem',
    'metrics',
    'pipeline',
    'rate',
    'scene',
    'seeding',
    'setnet',
]
