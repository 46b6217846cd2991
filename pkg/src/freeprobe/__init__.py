"""Free-probability and random-matrix toolkit.

Analytic layer: Cauchy/R-transform numerics and one-cut equilibrium
measures.  Exact layer: set-partition combinatorics for moment/cumulant
conversions.  Stochastic layer: Coulomb-gas Metropolis sampling, finite-N
characteristic functions, and S-matrix correlation experiments.
"""

from .asymptotics import (OmegaEvaluation, omega_eval, omega_large_k,
                          omega_small_k, omega_via_r_integral, phi_fermionic,
                          smoothness_report)
from .combinatorics import (CumulantSeq, CycleClass, Partition, bell_number,
                            catalan_number, classical_moments_from_cumulants,
                            dual_cauchy_residual, enumerate_partitions,
                            free_cumulants_from_moments, gamma_profile,
                            is_noncrossing, iter_noncrossing_partitions,
                            iter_partitions, moments_from_free_cumulants)
from .coulomb import (CoulombChain, OrthoPolySet, avg_char_poly_check,
                      build_ortho_polys, dh_rank_one, fermionic_char,
                      mc_char_rank1, sample_chain)
from .equilibrium import (EquilibriumSolution, Potential, big_G, big_H,
                          solve_equilibrium)
from .errors import FreeprobeError
from .scattering import (CorrelationEstimate, SaddlePair, ScatteringModel,
                         matched_coupling, mc_s_correlation, s_matrix,
                         sample_hamiltonian, solve_saddle_scalar,
                         unfold_epsilon)
from .transforms import (BranchPoint, PowerSeries, SpectralMeasure, blue_fn,
                         boson_g, cauchy_g, g_inverse, h_branch, h_inverse,
                         r_eval, r_series)

__version__ = "0.1.0"
