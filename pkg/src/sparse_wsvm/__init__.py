"""Sparse weighted SVMs for variable selection and class-probability estimation."""

from .datasets import SimSpec, gen_gaussian_example
from .pipelines import PipelineMethod, PipelineSpec, run_pipeline
from .prob_est import bracket_probability, classify, make_weight_grid
from .qp_core import ConicProgram, SolverSettings, solve
from .tuning import egkl, gkl
from .wsvm_train import Dataset, Form, train_en_wsvm, train_l1_select, train_l2_wsvm

__all__ = [
    "ConicProgram",
    "Dataset",
    "Form",
    "PipelineMethod",
    "PipelineSpec",
    "SimSpec",
    "SolverSettings",
    "bracket_probability",
    "classify",
    "egkl",
    "gen_gaussian_example",
    "gkl",
    "make_weight_grid",
    "run_pipeline",
    "solve",
    "train_en_wsvm",
    "train_l1_select",
    "train_l2_wsvm",
]
