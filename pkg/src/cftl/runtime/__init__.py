"""Runtime model, online monitoring engine and reference oracle."""

from cftl.lang.interpreter import ConcreteState, ObservationEvent, TransitionRecord  # noqa: F401
from cftl.runtime.engine import (  # noqa: F401
    MonitorPool,
    OutOfOrderEvent,
    TimingPoint,
    VerdictReport,
    dispatch,
    finalize,
)
from cftl.runtime.oracle import generated_bindings, oracle_evaluate  # noqa: F401
from cftl.runtime.trace import TraceFormatError, dumps_trace, loads_trace  # noqa: F401
