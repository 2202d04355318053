"""Network front door for live human teleoperation."""

from .app import create_app
from .sessions import SessionError, SessionExpired, SessionManager, TeleopSession, differential_ik_step
from .wire import decode_frame, encode_frame

__all__ = [
    "SessionError",
    "SessionExpired",
    "SessionManager",
    "TeleopSession",
    "create_app",
    "decode_frame",
    "differential_ik_step",
    "encode_frame",
]
