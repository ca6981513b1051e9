"""
Transfer evaluation, parameter sweeps, report emission and the run ledger.
"""

from .evaluation import TransferReport, eligibility_mask, success_rate, transfer_matrix
from .sweep import SWEEP_PARAMETERS, SweepResult, run_sweep
from .report import emit_report, emit_sweep
from .ledger import ExperimentLedger
