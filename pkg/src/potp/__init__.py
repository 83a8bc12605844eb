"""Gate one-time programs: encodings, circuits, a two-party runtime, signatures and security analysis."""

from .circuits import Circuit, CircuitBuilder, compile_millionaires, predict_success, randomize_not_pairs
from .encoding import GateOtp, GateTable, Scheme, encode, evaluate_otp, measure_otp, success_probability
from .errors import (AlreadyConsumedError, InvalidArgument, NotPSDError, ParseError, ProtocolAbort,
                     ResourceLimitError, UnsupportedTopologyError)
from .runtime import ChannelConfig, run_session, run_sessions
from .signature import SignatureBundle, hash_message, sign, verify

__version__ = "0.1.0"

__all__ = [
    "AlreadyConsumedError", "ChannelConfig", "Circuit", "CircuitBuilder", "GateOtp", "GateTable",
    "InvalidArgument", "NotPSDError", "ParseError", "ProtocolAbort", "ResourceLimitError", "Scheme",
    "SignatureBundle", "UnsupportedTopologyError", "compile_millionaires", "encode", "evaluate_otp",
    "hash_message", "measure_otp", "predict_success", "randomize_not_pairs", "run_session",
    "run_sessions", "sign", "success_probability", "verify",
]
