"""meshsplat: mesh-bound Gaussian splatting with real-time handle-driven
deformation.

A Gaussian cloud is fit to calibrated multi-view images while constrained to
an explicit triangle mesh (each splat lives on a face, offset along its
normal).  Edits solve an as-rigid-as-possible mesh deformation from sparse
handles and carry the resulting per-vertex deformation gradients over to the
splats, so the cloud follows large deformations in real time.
"""

__version__ = "0.1.0"
