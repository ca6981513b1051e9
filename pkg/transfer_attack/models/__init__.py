"""
Desk-scale classifiers: architectures, training and GATK weight files.
"""

from .architectures import (
    ARCHITECTURES, Classifier, LayerSpec, ModelSpec, Weights,
    infer_spec, init_model, model_spec,
)
from .training import TrainConfig, fgsm_batch, train, train_classifier
from .weights_io import load_classifier, load_weights, save_classifier, save_weights
