"""Dikin walks with self-concordant metrics and Gaussian-cooling sampling of logconcave targets."""

from .calculus import CompositeMetric, Embedded, direct_product, embed, metric_sum, scale
from .cooling import CoolingConfig, SampleResult, analytic_center, full_schedule, sample, sigma0_sq
from .errors import *  # noqa: F401,F403
from .io import load_problem, parse_problem, serialize
from .linear import (
    LewisBarrier,
    LogBarrier,
    VaidyaBarrier,
    leverage_scores,
    lewis_metric,
    lewis_weights,
    log_metric,
    vaidya_metric,
)
from .metric import Barrier, DikinEllipsoid, SymPD, combined_amenability, local_norm
from .model import (
    Ellipsoid,
    EntropyPotential,
    ExpPotential,
    Linear,
    LinearPotential,
    LogDetPotential,
    LogPotential,
    NormPotential,
    PowerPotential,
    ProblemSpec,
    PSDCone,
    QuadraticPotential,
    reduce,
)
from .psd import PSDBarrier, PsdMetricState, SvecCodec, TruncatedPSDBarrier
from .structured import (
    ellipsoid_barrier,
    entropy_barrier,
    exp_epigraph_barrier,
    gaussian_epigraph_barrier,
    log_epigraph_barrier,
    power_barrier,
    soc_barrier,
)
from .walk import WalkConfig, run, step

__version__ = "0.1.0"
