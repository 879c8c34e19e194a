"""Benchmark machinery: dataset I/O, one-pass evaluation, metrics, reports, synthesis."""
from .dataset import ATTRIBUTES, SequenceRecord, load_dataset, load_sequence, read_frame
from .metrics import (
    NP_THRESHOLDS,
    SUCCESS_THRESHOLDS,
    auc,
    iou,
    success_and_precision_curves,
    sv_histogram,
)
from .ope import run_ope, track_dataset, write_results
from .report import EvalReport, attribute_report, evaluate, evaluate_sequence, write_report
from .synth import SynthSpec, synth_sequence
