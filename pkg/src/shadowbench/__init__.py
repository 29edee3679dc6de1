"""Shadow synthesis benchmark toolkit for facial landmark detection.

Physically-modeled shadow composites over controlled factor/severity grids,
an adversarial shadow attack against pluggable detector oracles, restoration
(CIELAB RMSE) and landmark (NME) metrics, and a reference mutual-attention
fusion kernel.
"""

from .attack import (AffineParams, AttackConfig, AttackResult, AttackState,
                     DetectorOracle, OracleResult, affine_warp, attack,
                     fd_oracle_adapter, toy_detector, warp_gradients)
from .factors import (DatasetManifestRecord, FactorSpec, SilhouetteEntry,
                      bin_silhouettes, generate_grid, place_mask,
                      rescale_mask_to_area, sample_intensity, shape_complexity)
from .fusion import (LossReport, MAFusWeights, RecoveryNetWeights, losses,
                     mafus_forward, mutual_attention, nonlocal_similarity,
                     recovery_forward)
from .imaging import (Image, LabImage, ScalarField, lab_to_rgb, load_image,
                      load_scalar_field, rgb_to_lab, save_image, save_scalar_field)
from .metrics import RegionReport, aggregate_report, nme, region_report, rmse_lab
from .synth import (MatteConfig, ShadowParams, compose_shadow, render_matte,
                    synth_gradients, synthetic_face_depth)

__version__ = "0.1.0"
