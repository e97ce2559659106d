"""
.. include:: ../GUIDE.md
   :start-line: 2
"""

from .series import MultivariateSeries, StateAnnotation, LabelSequence
from .dataset import Dataset
from . import series
from . import dataset
from . import io
from . import cpd
from . import net
from . import baseline
from . import measure
from . import sim
from . import tools
from . import vis

__version__ = vis.__version__
