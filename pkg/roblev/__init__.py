__version__ = "0.1.0"

from .errors import LeverageError
from .mcd import McdConfig
from .pipeline import RunConfig, analyse, run
