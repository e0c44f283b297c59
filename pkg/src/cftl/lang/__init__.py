"""MiniLang: syntax, canonical printing and the simulated-clock interpreter."""

from cftl.lang.syntax import (  # noqa: F401
    Assign,
    AssignCall,
    Call,
    If,
    Loop,
    MiniSyntaxError,
    Pass,
    Program,
    parse_program,
    print_program,
)
from cftl.lang.interpreter import (  # noqa: F401
    NOT_CALLED,
    UNDEFINED,
    CallResult,
    ConcreteState,
    ExitReport,
    ListSink,
    MiniRuntimeError,
    ObservationEvent,
    PlanMismatch,
    SimClock,
    TransitionRecord,
    execute,
)
