"""Isotropic Gaussian random fields on compact two-point homogeneous spaces."""

from .covariance import ZonalCovariance, gram_matrix, make_covariance, variogram, zonal_eval
from .fieldsim import FieldSample, ModulusReport, cholesky_sample, kl_sample_s2, modulus_experiment
from .jacobi import CoefficientSequence, JacobiParams, analyze_coefficients, jacobi_eval
from .slnd import bump_construct, bump_verify, conditional_variance, slnd_experiment
from .spaces import Family, PointConfiguration, Space, geodesic_points, parse_space, space_params
from .spectra import AngularPowerSpectrum, powerlaw_spectrum, sine_power_spectrum

__all__ = [
    "AngularPowerSpectrum", "CoefficientSequence", "Family", "FieldSample", "JacobiParams", "ModulusReport",
    "PointConfiguration", "Space", "ZonalCovariance", "analyze_coefficients", "bump_construct", "bump_verify",
    "cholesky_sample", "conditional_variance", "geodesic_points", "gram_matrix", "jacobi_eval", "kl_sample_s2",
    "make_covariance", "modulus_experiment", "parse_space", "powerlaw_spectrum", "sine_power_spectrum",
    "slnd_experiment", "space_params", "variogram", "zonal_eval",
]
__version__ = "0.1.0"
