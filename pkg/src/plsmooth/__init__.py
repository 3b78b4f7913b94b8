"""Smoothing of piecewise affine homeomorphisms of 3D simplicial complexes.

Given a finitely piecewise affine homeomorphism f of a simplicial complex,
this package constructs an explicit diffeomorphism g that agrees with f
outside an arbitrarily small neighbourhood of the simplicial skeleton,
certifies that g is a diffeomorphism, and quantifies the convergence
g -> f in W^{1,p} and rearrangement-invariant norms as the smoothing
scale lambda goes to 0.
"""

from .blend import (BlendProfile, ConstantWidth, DEFAULT_PROFILE, FaceBlend,
                    RampWidth, eta, eta_prime, face_blend,
                    face_blend_jacobian, sigma_for_face, time_profile)
from .builders import (kuhn_cube, kuhn_identity, perturbed_kuhn_map,
                       single_tet, subdivided_tet, subdivided_tet_map,
                       two_tet, two_tet_map)
from .edge import (CircleIsotopy, ConstantRadius, EdgeSmoother, RampRadius,
                   VariableRadiusMap, circle_isotopy, fan_map, find_xi,
                   ray_blends, seglem_extend, synthetic_fan,
                   variable_radius_extend, wedge_jacobian, wedge_map)
from .errors import (CertificationError, ConstructionError, ContinuityError,
                     DegenerateSimplexError, DomainError, IntersectionError,
                     InvalidInputError, NoIsotopyFound, NonInjectiveError,
                     OrientationError, ParameterError, ParseError,
                     PLSmoothError)
from .mesh import (EdgeFan, FacePair, PLMap, SimplicialComplex, VertexStar,
                   edge_fans, face_pairs, load_complex,
                   pl_map_from_vertex_images, save_document,
                   validate_pl_homeo, vertex_stars)
from .norms import (QuadratureScheme, RINorm, StepFunction, linf_difference,
                    parse_norm, rearrangement, ri_norm, rozumny_check,
                    w1p_difference)
from .pipeline import (SmoothedMap, SmoothingParams, assemble, choose_params,
                       format_table, lambda_sweep)
from .verify import (CertificationReport, fd_check, injectivity_audit,
                     jacobian_grid)
from .vertex import (SphereIsotopy, SphereMap, VertexSmoother, degree,
                     integral_degree, ratio_sweep, sphere_isotopy,
                     star_flatten, vertlem_extend)

__version__ = "0.1.0"
