import logging
import math
import os

from dataclasses import dataclass, field
from typing import Optional, Tuple

from . import __version__
from .classical import ClassicalDiagnostics, classical_diagnostics
from .dataset import ingest_csv
from .design import PartitionedDesign, build_design
from .errors import ConfigError
from .formula import parse_formula, render
from .mcd import McdConfig, McdFit, fast_mcd
from .report import Format, LeverageReport, assemble_report, emit_report
from .robust import ModifiedDesign, modified_design

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class RunConfig:
    """
    Everything a single leverage run depends on. data_path may be
    None if the dataset is handed to run() directly, output_path None
    writes to stdout.
    """
    formula: str
    data_path: Optional[str] = None
    categorical: Tuple[str, ...] = ()
    mcd: McdConfig = field(default_factory=McdConfig)
    output_format: Format = Format.CSV
    output_path: Optional[str] = None
    flag_cutoff: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "output_format", Format(self.output_format))
        except ValueError:
            raise ConfigError(F"unknown output format '{self.output_format}'")
        if self.flag_cutoff is not None and not 0 < self.flag_cutoff < math.inf:
            raise ConfigError(F"flag cutoff must be positive and finite, got {self.flag_cutoff}")

@dataclass(frozen=True)
class Analysis:
    design: PartitionedDesign
    classical: ClassicalDiagnostics
    fit: Optional[McdFit]
    modified: ModifiedDesign
    report: LeverageReport

def run_metadata(config, design, fit):
    cfg = config.mcd
    meta = {
        "formula": render(design.spec),
        "h": fit.h if fit is not None else design.n,
        "alpha": cfg.alpha,
        "n_trials": cfg.n_trials,
        "reweight_prob": cfg.reweight_prob,
        "seed": cfg.seed,
        "small_sample_correction": int(cfg.use_small_sample_correction),
        "version": __version__,
    }
    if config.data_path is not None:
        meta["data"] = os.path.basename(config.data_path)

    return meta

def analyse(config, data=None):
    """
    Compute classical and robust leverage diagnostics for the model
    of config. data defaults to the CSV file at config.data_path.
    Errors of the individual stages propagate as LeverageError.
    """
    if data is None:
        if config.data_path is None:
            raise ConfigError("no dataset given")
        data = ingest_csv(config.data_path, config.categorical)

    spec = parse_formula(config.formula)
    design = build_design(spec, data)
    classical = classical_diagnostics(design.x)

    fit = None
    if design.p2 > 0:
        fit = fast_mcd(design.block(2), config.mcd)
    else:
        logger.info("no continuous columns, skipping the MCD")

    modified = modified_design(design, fit)
    report = assemble_report(design, classical, fit, modified, config.flag_cutoff,
                             run_metadata(config, design, fit))

    return Analysis(design, classical, fit, modified, report)

def run(config, data=None):
    "Analyse and write the report as configured, returning it."
    report = analyse(config, data).report
    emit_report(report, config.output_format, config.output_path)

    return report
