"""Separability analysis of density operators on C2 x CN.

Decides whether a positive-partial-transpose state is separable by
subtracting product vectors, reducing through kernel product vectors, and
enumerating range product vectors via polynomial elimination.  Every
"separable" verdict comes with a machine-checkable product-state
certificate.
"""

from .matrixcore import (
    DensityState,
    ToleranceConfig,
    numerical_rank_kernel,
    operator_norm,
    partial_transpose,
    partial_transpose_matrix,
    pseudoinverse,
    psd_difference_check,
)
from .polyelim import (
    BivariatePoly,
    DegenerateElimination,
    NonFinite,
    RootSet,
    UnivariatePoly,
    conjugate_poly,
    eliminate_pair,
    eliminate_single,
    univariate_roots,
    verify_roots,
)
from .productfinder import (
    ConstraintSystem,
    InfiniteFamily,
    NonGenericInput,
    ProductVector,
    kernel_contractions_independent,
    kernel_product_vector,
    paired_products,
    products_in_subspace,
    real_e_products,
)
from .sepengine import (
    DependentProjectors,
    ReductionTrace,
    SeparabilityCertificate,
    SupportViolation,
    VectorOutsideRange,
    Verdict,
    VerdictKind,
    analyze,
    biorthogonal_check,
    decompose_rank_n,
    lambda_bounds,
    pt_invariant_decompose,
    pt_symmetrizing_search,
    reduce_by_kernel,
    strip_support,
    subtract,
    symmetric_split_check,
    verify_certificate,
)

__version__ = "0.1.0"
