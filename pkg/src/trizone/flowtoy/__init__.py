"""Toy-scale training mathematics: flow-matching loss, K/V-concat attention, two-stage trainer."""

from .attention import AttentionParams, kv_concat_attention, softmax
from .flow import FlowSample, OracleDenoiser, constant_weight, flow_loss, interpolate, sample_batch
from .models import ClassifierConfig, DenoiserConfig, ToyDenoiser, ZoneClassifier
from .tensor import Tensor, load_params, save_params
from .train import TrainConfig, TrainReport, ToySample, build_toy_dataset, samples_from_quadruplets, train_toy_two_stage

__all__ = [
    "AttentionParams",
    "ClassifierConfig",
    "DenoiserConfig",
    "FlowSample",
    "OracleDenoiser",
    "Tensor",
    "ToyDenoiser",
    "ToySample",
    "TrainConfig",
    "TrainReport",
    "ZoneClassifier",
    "build_toy_dataset",
    "constant_weight",
    "flow_loss",
    "interpolate",
    "kv_concat_attention",
    "load_params",
    "sample_batch",
    "samples_from_quadruplets",
    "save_params",
    "softmax",
    "train_toy_two_stage",
]
