"""Exact encoding of finite relations into triples of reals via best approximations."""

from .codec import EncodedParameter, TupleSet, cover_open_set, decode, encode, roundtrip
from .engine import (
    FiniteApproximation,
    best_approximations,
    best_left,
    best_right,
    find_split,
    is_finite_approximation,
    limit_interval,
    recoverability_check,
    right_extension,
    splits_between,
)
from .errors import CodecError
from .numeric import Bracket, IrrationalBasis, LinearForm, RationalInterval, compare, refine, sign
from .systems import FieldSystem, KroneckerSystem, SineSystem, default_system, verify_condition_ii

__version__ = "0.1.0"
