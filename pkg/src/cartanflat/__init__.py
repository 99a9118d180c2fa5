"""cartanflat: flat connections from constant-curvature metrics.

Given a Riemannian metric on a coordinate chart, this package builds the
orthonormal-frame machinery (connection 1-forms, curvature), two families of
connections on TM + a trivial line bundle whose flatness is equivalent to
constant sectional curvature -1 (the "h" variant) or +1 (the "s" variant),
parallel transport and developing maps into the ambient quadrics, and the
sine-Gordon zero-curvature representation built from pseudospherical frame
data.  The `cartanflat` console script exposes the verification jobs.
"""

__version__ = "0.1.0"
