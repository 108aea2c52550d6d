"""Uniformly bounded spherical harmonics built from Gaussian beams, with equidistribution diagnostics."""
from .beams import GaussianBeam, beam, log_norm_constant, norm_constant, overlap_bound, overlap_numeric
from .pointsets import PointSet, generate, max_circle_count, min_separation, verify
from .quadrature import liouville_average, observable_bank, sphere_rule
from .sphere import Frame, OrientedGreatCircle, frame_for_pole, geodesic_distance
from .superposition import BeamSuperposition, build, choose_m

__version__ = "0.1.0"
