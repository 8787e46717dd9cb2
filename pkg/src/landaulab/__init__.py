"""landaulab: a spectral laboratory for Landau damping in 1D Vlasov-Riesz systems.

Modules: equilibria (backgrounds and transforms), norms (analytic-Sobolev
weights and generator norms), linear (dispersion roots, Nyquist stability,
Green kernels), dynamics (glide-frame nonlinear solver and the fixed-point
field solve), echoes (echo experiments and bound certificates), config/cli
(run orchestration).
"""

__version__ = "0.1.0"

from .equilibria import EquilibriumProfile, gaussian, grad_mu_hat, mu_hat, two_stream
from .norms import GeneratorSample, WeightParams, f_norm, gen_norm, radius, weight
from .linear import (DispersionRoot, GreenKernel, convolve_green, dispersion,
                     find_roots, green_kernel, landau_rate_asymptotic,
                     newton_root, penrose_verdict, volterra_kernel)
from .dynamics import (CosineData, FieldHistory, InitialData, SimulationConfig,
                       SpectralState, SpikeMode, field_closure,
                       fixed_point_field_solve, free_density, init_state,
                       read_snapshot, rhs, simulate, step, write_snapshot)
from .echoes import (BoundCertificate, EchoExperiment, SweepSpec, c_ratio,
                     certify_bound, predict_echo, run_echo)
from .config import RunConfig, load_config, validate

__all__ = [
    "__version__",
    "EquilibriumProfile", "gaussian", "two_stream", "mu_hat", "grad_mu_hat",
    "WeightParams", "GeneratorSample", "weight", "gen_norm", "f_norm", "radius",
    "DispersionRoot", "GreenKernel", "volterra_kernel", "dispersion",
    "find_roots", "newton_root", "penrose_verdict", "landau_rate_asymptotic",
    "green_kernel", "convolve_green",
    "SpectralState", "FieldHistory", "SimulationConfig", "InitialData",
    "SpikeMode", "CosineData", "init_state", "field_closure", "rhs", "step",
    "simulate", "free_density", "fixed_point_field_solve",
    "write_snapshot", "read_snapshot",
    "EchoExperiment", "BoundCertificate", "SweepSpec", "predict_echo",
    "run_echo", "c_ratio", "certify_bound",
    "RunConfig", "load_config", "validate",
]
