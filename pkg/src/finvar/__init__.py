"""finvar: numerical engine and verification harness for harmonic and
biharmonic maps from Finsler spaces to Riemannian manifolds.

Layout:
    expressions  expression grammar, exact symbolic differentiation
    jets         truncated multivariate Taylor arithmetic
    finsler      Finsler metric tensor, spray, connections, curvature
    riemann      codomain Riemannian geometry and curvature tables
    maps         tension, bitension, Jacobi operator, Hessian integrand
    classical    independent Riemannian-domain oracle pipeline
    identity     identity-map perturbation analysis
    quadrature   unit-ball-bundle integration and variational checks
    config/report/cli   configuration-driven command line front end
"""

__version__ = "0.1.0"

from .errors import (ChartError, ConfigError, DomainEvalError, ExpressionError,
                     FinvarError, OrderLimitError, QuadratureError,
                     SingularMetricError)
from .finsler import (BoxChart, ConnectionData, CurvatureData, DomainGeometry,
                      FinslerStructure, MetricData, PointState, TorusChart,
                      arc_length, connection, curvature, delta_derivative,
                      divergence, horizontal_laplacian, integrate_geodesic,
                      metric, spray_value)
from .identity import (IdentityTensionReport, PerturbationSetup, ScalingReport,
                       b_field, condition35_residual, identity_tension,
                       linearized_scaling)
from .maps import (MapGeometry, PullbackSection, SmoothMap, TensionReport,
                   VariationFamily, bitension, differential, energy_density,
                   hessian_integrand, jacobi_apply, pullback_cov_deriv,
                   rough_laplacian, tension, weitzenbock_residual)
from .quadrature import (FunctionalEstimate, QuadratureSpec, bienergy,
                         divergence_theorem_check, energy,
                         first_variation_check, integrate,
                         second_variation_check, self_adjointness_check)
from .riemann import (CurvatureField, RiemannStructure, christoffel,
                      sectional_curvature)
from .riemann import curvature as codomain_curvature
