"""Monostatic OFDM joint sensing/communication simulator with learned
array-impairment compensation.

The package simulates an OFDM transceiver that senses a target through
its own downlink waveform with an imperfectly spaced antenna array,
detects and localizes the target on an angle-delay map, decodes the
downlink at a user terminal, and learns the per-element spacings from
data with supervised, unsupervised, or semi-supervised schedules.
"""

from .adam import AdamState, adam_step
from .admap import (AngleDelayMap, DetectionResult, SectorGrids, ThresholdCalibration,
                    angle_delay_map, batch_map_values, calibrate_threshold, h0_peaks,
                    maprt_detect, sector_grids, sector_map)
from .arrays import (angle_grid, delay_grid, delay_matrix, delay_response,
                     nominal_spacings, polar_from_position, position_from_polar,
                     range_grid, steering_matrix, steering_nominal, steering_perturbed)
from .channel import (CommDraw, CommObservation, EpisodeBatch, GainProfile,
                      SensingObservation, TargetDraw, comm_observations, constellation,
                      derive_gains, filtered_observations, mle_decode,
                      sample_episode_batch, sample_impairment, sample_priors,
                      simulate_comm, simulate_sensing)
from .config import (EvalSettings, ExperimentConfig, ScenarioConfig, SweepSettings,
                     TrainPhase, config_hash, desk_scale, full_scale, load_config,
                     parse_config_text)
from .errors import (BudgetExhaustedError, CalibrationUnderpoweredError,
                     DegenerateCombinationError, InvalidBatchError, IsacError,
                     NumericalFailureError, SingularSystemError)
from .estimator import (ResolutionWindow, SoftEstimate, loss_supervised,
                        loss_unsupervised, resolution_window, soft_estimate)
from .gradients import (GradientReport, PathFlags, batch_loss,
                        batch_loss_and_gradient, finite_difference_gradient,
                        training_precoder)
from .harness import evaluate, labeled_ratio_study, pareto_sweep
from .metrics import (MetricsRecord, pareto_filter, parse_csv, read_csv,
                      records_equal, write_csv)
from .precoding import (BeamSpec, IsacKnobs, Precoder, build_sector_precoders,
                        desired_beampattern, isac_combine, ls_beamformer)
from .training import (TrainState, load_checkpoint, save_checkpoint, ssl_phases,
                       steering_mismatch, train)

__version__ = "0.1.0"
