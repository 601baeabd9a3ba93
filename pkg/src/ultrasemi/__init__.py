"""Numerics for Gevrey weight sequences, ultrapolynomial symbols,
Bromwich-inverted convolution kernels, and K-convoluted operator semigroups,
with quadrature- and oracle-based verification of the identities that tie
them together."""

from .weights import (
    WeightSequence,
    ConditionReport,
    make_gevrey,
    from_table,
    verify_conditions,
    assoc,
    assoc_detail,
    assoc_many,
)
from .ultrapoly import (
    Ultrapolynomial,
    BoundReport,
    build,
    region_contains,
    region_samples,
    verify_growth_bounds,
    exp_conjugate,
)
from .testfn import (
    TestFunction,
    ResolutionWarning,
    gevrey_bump,
    ramp_cutoff,
    convolve0,
    derivative,
    seminorm,
)
from .transforms import (
    BromwichLine,
    Kernel,
    CertificateError,
    apply_P,
    divide_P,
    bromwich_kernel,
    laplace,
)
from .operators import (
    Generator,
    FitReport,
    diagonal_generator,
    dense_generator,
    curve_generator,
    omega_contains,
    resolvent_bound_fit,
)
from .semigroup import (
    ConvolutedSemigroup,
    construct,
    identity_residual,
    udsg_apply,
    composition_residual,
    fundamental_residual,
    resolvent_reconstruct,
    nondegeneracy,
)

__version__ = "0.1.0"
