"""Certification toolkit for quasiconvex quadratic forms on 3x3 gradients."""

from .forms import (
    AcousticMatrix,
    Biquadratic,
    QuadraticForm,
    VARIABLE_NAMES,
    VARIABLE_ORDER,
    canonical_lift,
    corollary_q,
    extremal_q,
    from_cubic,
    from_cyclic,
    mat_to_vec,
    minors,
    norm_squared,
    null_lagrangian,
    parse_form_spec,
    symmetry_check,
    to_biquadratic,
    vec_to_mat,
    zero_form,
)

__version__ = "0.1.0"
