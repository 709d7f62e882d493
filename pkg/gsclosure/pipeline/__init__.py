from .config import PipelineConfig, load_config

from .rescoring import Proposal, rescore_proposals

from .refinement import refine_box, box_objective, RefineInfo

from .detector import ClosurePipeline, run_pipeline
