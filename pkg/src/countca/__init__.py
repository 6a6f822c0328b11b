"""Counter cellular automaton with zero average perturbation speed.

Modules: ``engine`` (generic 1D CA), ``automaton`` (the counter rule F),
``model`` (the counter factor H), ``lyapunov`` (perturbation brackets),
``measures`` (samplers, uniformity, entropy), ``expansivity`` and ``cli``.
"""
from ._accel import USE_NUMBA, backend_name
from .automaton import COUNTER_ALPHABET, F_RULE, CounterRule, figure1_initial, orbit_F, step_F
from .engine import (
    BINARY,
    Alphabet,
    CyclicConfig,
    RuleTable,
    SetConfig,
    SpaceTimeDiagram,
    WindowConfig,
    WindowExhausted,
    build_rule,
    identity_rule,
    orbit,
    set_valued_orbit,
    shift_rule,
    step,
    step_cyclic,
    xor_rule,
)
from .model import Counter, CounterLine, increment_counter, phi, step_H

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BINARY",
    "COUNTER_ALPHABET",
    "Counter",
    "CounterLine",
    "CounterRule",
    "CyclicConfig",
    "F_RULE",
    "RuleTable",
    "SetConfig",
    "SpaceTimeDiagram",
    "USE_NUMBA",
    "WindowConfig",
    "WindowExhausted",
    "backend_name",
    "build_rule",
    "figure1_initial",
    "identity_rule",
    "increment_counter",
    "orbit",
    "orbit_F",
    "phi",
    "set_valued_orbit",
    "shift_rule",
    "step",
    "step_F",
    "step_H",
    "step_cyclic",
    "xor_rule",
]
