"""
Dataset ingestion and adversarial-example persistence.
"""

from .dataset import LabeledDataset
from .idx import load_idx, write_idx, resolve_idx_pair
from .synthetic import synthetic_blobs
from .adv_batch import AdvBatch, save_adv_batch, load_adv_batch
