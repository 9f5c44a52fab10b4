"""Exception hierarchy.

Every error carries a stable ``code`` string and the process exit status the
CLI maps it to (1 property failure, 2 usage/parse error, 3 cap exceeded).
"""

from __future__ import annotations


class CodecError(Exception):
    code = "codec_error"
    exit_status = 1

    def to_json(self) -> dict:
        return {"error": {"code": self.code, "message": str(self)}}


class ParseError(CodecError, ValueError):
    code = "parse_error"
    exit_status = 2


class DuplicateTuple(ParseError):
    code = "duplicate_tuple"


class BasisMismatch(CodecError, ValueError):
    code = "basis_mismatch"
    exit_status = 2


class InvalidInput(CodecError, ValueError):
    code = "invalid_input"
    exit_status = 2


class CapExceeded(CodecError):
    code = "cap_exceeded"
    exit_status = 3


class PrecisionCapExceeded(CapExceeded):
    code = "precision_cap_exceeded"


class SearchCapExceeded(CapExceeded):
    code = "search_cap_exceeded"


class DepthExhausted(CapExceeded):
    code = "depth_exhausted"


class EmptyWitness(CodecError):
    """Condition (ii) produced no interval: the system's hypothesis fails."""

    code = "empty_witness"


class EmptyGap(CodecError, ValueError):
    code = "empty_gap"


class InvalidChain(CodecError, ValueError):
    code = "invalid_chain"


class InvariantViolation(CodecError, AssertionError):
    code = "invariant_violation"
