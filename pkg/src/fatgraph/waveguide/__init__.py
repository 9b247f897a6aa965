"""Thin fat-graph waveguide: model, mesh, assembly and eigen solves."""
from .assembly import FatGraphOperator, assemble, assemble_constrained, assemble_full
from .mesh import (EDGE, EXTERIOR, PATCH, FatGraphModel, Mesh, MeshConformityError,
                   UnsupportedDegree, WaveguideError, build_model, generate_mesh)
from .solve import (Candidate, EigenPairs, FactorizationFailed, NotConverged,
                    filter_resonances, solve_eigs, tail_mass, theta_companion)
