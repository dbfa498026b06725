"""Global hypoellipticity and solvability diagnostics for systems on the torus times R^n.

Fields are truncated Fourier-Hermite coefficient arrays indexed by
``(tau, j)``; systems are lists of operators acting on each mode by a
scalar symbol ``Q_r(tau) + d_r lambda_j``.
"""

__version__ = "0.1.0"

from .config import load_system, load_time_system, system_from_dict, system_to_toml, time_system_from_dict
from .diagnostics import (ClassificationVerdict, DecayClassifier, DiophantineReport, Verdict, decay_classify,
                          diophantine_profile, hypoellipticity_verdict, solvability_verdict)
from .eigen import (Custom, Harmonic1D, HarmonicND, PowerOf, WeylFit, WeylLawRegressor, hermite_functions,
                    load_custom, provider_from_dict, weyl_fit)
from .exceptions import (AdmissibilityError, ConfigError, ContractError, DegenerateSystemError, FitDomainError,
                         InsufficientDepthError, InvalidWitnessError, OutOfRangeError, RegularityRestrictionError,
                         ResolutionError, ShapeError, UnsupportedBasisError)
from .liouville import (ContinuedFraction, LiouvilleVerdict, PowerForm, VectorVerdict, convergents,
                        exp_liouville_test, vector_coordinate_test)
from .normal_form import (PsiConjugation, SampledCoefficient, TimeCoefficientSet, TimeDependentSystem,
                          TrigCoefficient, average_coefficient, compat_integral, conjugation_residual,
                          normal_form_verdict, phase_A, psi_apply, reduce_system)
from .solver import (AdmissibilityReport, DataVector, SymbolDivisionSolver, admissibility_check, apply_system,
                     counterexample_pair, division_field, load_data_vector, save_data_vector, solve)
from .spectral_core import (Bounds, DecayProfile, ModeIndex, SpaceParams, SpectralField, enumerate_shells,
                            load_field, mode, reconstruct, save_field, weight, weights)
from .symbols import (OperatorSpec, PolynomialSymbol, SystemSpec, TabulatedSymbol, certified_lower_bound,
                      resonance_exact, symbol_eval, symbol_values, system_norm_argmax, zero_set)
