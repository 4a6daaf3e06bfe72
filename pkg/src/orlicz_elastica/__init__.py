"""P1 finite elements for small-strain elasticity with a nonlinear bulk response.

The stored energy is ``mu |dev sym grad u|^2 + phi(div u)`` with a constant
shear modulus ``mu`` and an Orlicz-type volumetric density ``phi``; loads
enter through a symmetric tensor field paired against the strain.  The
package provides the energy/residual/Hessian machinery, a damped Newton
minimizer, and verification tools that probe the structural identities the
model satisfies (interior harmonicity of the combined bulk quantity, a
Poisson equation for the rotation, energy estimates, and manufactured-
solution convergence).
"""

from .nfunction import (
    NFunction,
    make_family,
    conjugate,
    check_delta2,
    check_good_phi_prime,
    check_convexity,
)
from .mesh import Mesh, DofMap, generate_rectangle, load_mesh, save_mesh, build_dofmap
from .tensorfield import (
    DisplacementField,
    ElementStrain,
    LoadTensor,
    LoadSource,
    Poly2,
    compute_strain,
    decompose_load,
    polynomial_identity_check,
    h1_norm,
)
from .energy import (
    Problem,
    EnergyBreakdown,
    evaluate_energy,
    residual,
    hessian,
    apply_dirichlet_lifting,
    extract_free_values,
)
from .solver import SolverConfig, SolveReport, solve, uniqueness_probe
from .verify import (
    HarmonicityReport,
    CurlReport,
    EstimateAReport,
    solve_g,
    harmonicity_check,
    curl_check,
    estimate_A,
    manufactured,
    refinement_ladder,
    case_ids,
)

__version__ = "0.1.0"
