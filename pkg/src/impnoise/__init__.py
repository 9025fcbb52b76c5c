"""Time-correlated impulsive noise toolkit.

Generates, detects, fits and scores impulsive noise for wideband
channels using a partitioned Markov chain with damped-oscillation
impulse systems, plus two reference models (Bernoulli-Gaussian with
memory, Middleton Class-A) and divergence metrics.
"""

__version__ = "0.1.0"

from .trace import NoiseTrace
from .errors import (BadMagic, BinMismatch, DegenerateInput, DegenerateMixture,
                     DomainError, EmptyGroup, EmptyInput, InfeasibleOscillation,
                     InvalidConfig, NegativeDiscriminant, NoImpulsesFound,
                     NoRoot, ParamsFormatError, TooFewEvents, TooShort,
                     ToolkitError, TraceFormatError, TruncatedFile,
                     UnknownModelKind, UsageError, VersionUnsupported)
from .chain import (ChainConfig, PartitionedChain, StateEmission, StatePath,
                    SystemConfig, build_chain, emission_table, generate,
                    loop_period, mean_sojourn, oscillation_stay_prob)
from .detect import (DetectionConfig, DetectionResult, ImpulseEvent,
                     MomentsFit, amplitude_threshold, detect_impulses,
                     duration_threshold, estimate_background_variance,
                     even_moments, gap_sequence, impulse_mask,
                     mixture_from_moments, segment_impulses)
from .fit import (FitDiagnostics, FitOptions, FitReport, GroupStats,
                  classify_groups, estimate_entry_probs, estimate_osc_freq,
                  fit_chain, system_dwell_targets)
from .baselines import (BGMemoryParams, ClassAParams, class_a_pdf,
                        class_a_sigma_sq, class_a_weights, fit_bg_memory,
                        fit_class_a, generate_bg, generate_class_a)
from .metrics import (CompareConfig, ComparisonResult, Histogram,
                      MetricsReport, SpectrumResult, compare_report,
                      event_periodogram, histogram, impulse_spectrum,
                      kl_divergence, mse_cdf, pearson, trace_spectrum)
from .io import (ParamsDocument, iter_trace_chunks, read_params, read_trace,
                 write_params, write_trace)
