from .splat_io import GaussianPrimitive, SceneSplat, CropBox
from .splat_io import parse_splat_ply, write_splat_ply, filter_scene
from .splat_io import read_splat_ply, write_splat_ply_file, subsample_scene

from .surface import SurfaceElement, SurfaceElements
from .surface import CenterAligned, FirstElementRandomFlip
from .surface import covariance_from_params, principal_normal
from .surface import orient_normal, cross_section_area, build_surface_elements

from .closure import FluxField, FluxReport
from .closure import flux_through_box, flux_batch, closure_score

from .boxes import OrientedBox, Detection, contains, iou_3d, nms_3d

from .synthetic import SurfaceSpec, LabeledScene
from .synthetic import gen_primitive_surface, add_outliers, gen_benchmark_scene

from .pipeline import PipelineConfig, Proposal, ClosurePipeline
from .pipeline import rescore_proposals, refine_box, run_pipeline

from .variational import ElboTerms, ResidualELBO
from .variational import inject_residual, reparameterize
from .variational import elbo_terms, elbo_gradients, total_loss

from .evaluation import PRPoint, FluxHistogram
from .evaluation import average_precision, average_recall, l2_box_loss
from .evaluation import flux_histogram, evaluate_detections

__version__ = "0.1.0"
