"""reflare: reflective-flare simulation, synthesis, and removal.

A paraxial ghost-reflection simulator that validates the optical-center
symmetry of lens flare, a semi-synthetic data pipeline that turns bracketed
exposure pairs into (corrupted, flare-free, flare, mask) training triplets,
the center-symmetry prior image, an optimization-based removal baseline,
and the matching loss/metric suite.
"""

__version__ = "1.0.0"

from .image import (Domain, DomainMismatchError, Image, LINEAR, OpticalCenter,
                    encoded, raster_center)
from .rng import make_rng, spawn_rng
from . import ops
from .optics import (GhostPath, GhostRatio, LensPrescription, RayState,
                     Surface, SYMMETRIC_GHOST_PATH, UnfocusedSystemError,
                     defocus, direct_matrix, focus_sensor_distance,
                     ghost_matrix, ghost_ratio, make_symmetric_prescription,
                     predict_flare_position, reflection_matrix,
                     refraction_matrix, trace_direct, trace_ghost,
                     translation_matrix)
from .dataset import (BracketPair, DatasetManifest, ManifestRecord,
                      file_checksum, load_image, load_pfm, read_triplet,
                      save_image, save_pfm, scan_bracket_groups, write_triplet)
from .synthesis import (FlareTriplet, SampledParams, SynthesisConfig,
                        compute_mask, generate, sample_params,
                        synthesize_triplet)
from .prior import (PRIOR_GAMMA, SixChannelSample, build_sample,
                    compute_prior, export_samples, import_samples)
from .quality import (GradientPyramid, LossWeights, background_loss,
                      flare_loss, l1, masked_l1, masked_psnr, psnr,
                      reconstruction_loss, ssim, total_loss)
from .removal import (FlareFitParams, FlareRemover, RemovalResult,
                      SearchConfig, fit_flare, hdr_merge, proposal_region,
                      remove_flare)
from .scenes import NightScene, make_flare_free_image, make_night_scene

__all__ = [name for name in dir() if not name.startswith("_")]
