"""Invertible quantum operations and perfect encryption of quantum states."""

from .channel import (
    KrausChannel,
    apply,
    channels_equal,
    choi,
    compose,
    depolarizing,
    identity_channel,
    is_trace_preserving,
    mix,
    random_cptp,
    random_invertible,
    unitary_channel,
)
from .encryption import (
    RandomizationScheme,
    SchemeAudit,
    average_channel,
    bell_image,
    entropy_chain_audit,
    key_entropy_audit,
    keyed_ancilla_scheme,
    pauli_otp,
    reduce_to_classical,
    verify_perfect,
)
from .invertibility import (
    UnitaryAncillaForm,
    criterion_evaluate,
    decompose,
    decompose_cp,
    inverse_channel,
    pairwise_condition,
    q_from_inverse,
)

__version__ = "0.1.0"
