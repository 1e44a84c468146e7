"""The four generators behind one fit/sample interface."""

from .base import DEFAULT_HYPERPARAMETERS, KINDS, FittedModel, GeneratorSpec, check_structure
from .ctgan import fit_copulagan, fit_ctgan, sample_copulagan, sample_ctgan
from .gc import fit_gc, sample_gc
from .io import load_model, save_model
from .tvae import fit_tvae, sample_tvae


def fit(table, spec: GeneratorSpec, schema=None) -> FittedModel:
    if spec.kind == "GC":
        return fit_gc(table, spec.seed, schema, spec=spec)
    if spec.kind == "TVAE":
        return fit_tvae(table, spec, schema)
    if spec.kind == "CTGAN":
        return fit_ctgan(table, spec, schema)
    return fit_copulagan(table, spec, schema)


def sample(model: FittedModel, n: int, seed=0):
    if model.kind == "GC":
        return sample_gc(model, n, seed)
    if model.kind == "TVAE":
        return sample_tvae(model, n, seed)
    return sample_ctgan(model, n, seed)


__all__ = [
    "DEFAULT_HYPERPARAMETERS", "KINDS", "FittedModel", "GeneratorSpec", "check_structure",
    "fit", "sample", "fit_gc", "sample_gc", "fit_tvae", "sample_tvae", "fit_ctgan",
    "sample_ctgan", "fit_copulagan", "sample_copulagan", "save_model", "load_model",
]
