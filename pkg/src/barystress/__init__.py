"""Hybridizable H(div)-conforming symmetric stress elements on barycentric splits.

A numpy/scipy library that constructs and certifies the split-cell stress
element families, assembles stabilized and hybridized mixed discretizations
of linear elasticity, and verifies dimensions, conformity, divergence ranges,
inf-sup constants and convergence rates.
"""

from .assembly import (DGSpace, ElasticityProblem, FaceSpace, GlobalSpace,
                       RMSpace, error_norms, manufactured_problem,
                       polynomial_problem, postprocess_displacement,
                       solve_hybrid, solve_linear_pair,
                       solve_mixed_conforming, solve_stabilized)
from .elements import (FAMILIES, ElementSpace, build_element, div_bubble_space,
                       element_dimension, ext_nn, ext_psi, nd_space,
                       unisolvence_certificate)
from .errors import (CertificationError, ConformityError, DomainError,
                     GeometryError, NumericalError)
from .frames import build_frame, global_normal_frame, pair_field, sym_decompose
from .geometry import Simplex, SplitSimplex, geometry_pack, reference_simplex
from .mesh import (Mesh, SplitMesh, barycentric_refine, build_mesh, read_mesh,
                   uniform_box_mesh, write_mesh)
from .poly import (Poly, QuadRule, SplitPoly, bubble, extend_face_poly,
                   l2_project, quad_rule, split_bubble, split_hat)
from .simplex import IndexSet, center_label, interior_subsimplices, split_cells, subsimplices
from .verify import (InfSupReport, RateTable, brute_force_intersection,
                     check_dimensions, check_div_range, check_rigidity,
                     convergence_study, infsup_constant, validate_family)

__version__ = "0.1.0"
