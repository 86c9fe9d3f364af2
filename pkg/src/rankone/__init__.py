"""Exact-arithmetic laboratory for rank-one (cutting-and-stacking) transformations."""

from .engine import DEFAULT_EPS, Engine, PartialImage, Stage
from .errors import ParseError, RankOneError, ResourceError, ValidationError
from .measure import CertifiedValue, IntervalSet
from .scheme import PRESETS, SchemeSpec, StageRule, compile_block_rule, normalize, parse_scheme

__version__ = "0.1.0"
