"""Constraint-based causal discovery for SDE-model path data."""

from .citest import (PermutationPlan, TestConfig, TestResult,
                     find_invariant_permutation, hsic_bootstrap, kcipt,
                     mmd_sq_unbiased, sdcit)
from .discovery import (CiQuery, DiscoveryConfig, OracleBackend,
                        StatisticalBackend, run_algorithm1,
                        run_partially_observed,
                        run_pc_with_init_postprocessing, run_robust_no_init,
                        test_future_extended, test_initial_value,
                        test_self_loop, test_sym)
from .graphs import (Dag, LiftedGraph, MixedGraph, SepSetTable, ancestors,
                     apply_meek_rules, collapse, cpdag_of, d_separated, lift,
                     nshd, project_to_mag, sample_er_dag, shd)
from .paths import (CoordMap, Interval, Path, PathSample, apply_missingness,
                    augment_time, read_csv_long, read_jsonl,
                    restrict_and_rebase, write_jsonl)
from .sde import (FbmSpec, FdaSpec, LinearSdeSpec, NonlinearSpec, SimConfig,
                  SimulationDiverged, generate_fda_sample, sample_params,
                  simulate_fbm_pair, simulate_linear, simulate_nonlinear,
                  simulate_path_dependent)
from .sigkernel import (GramMatrix, KernelConfig, TruncatedSignature, gram,
                        median_bandwidth, sig_kernel_pde, truncated_sig_kernel_oracle,
                        truncated_signature)

__version__ = "0.1.0"
