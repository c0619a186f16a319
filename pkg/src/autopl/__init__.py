"""Automated discovery of radio pathloss models.

Subpackages cover closed-form model evaluation and dataset generation
(:mod:`autopl.plmodels`), symbolic expression trees (:mod:`autopl.expr`),
policy-gradient symbolic regression (:mod:`autopl.dsr`), spline-edge
networks with symbolic extraction (:mod:`autopl.kan`), and a shared
evaluation harness (:mod:`autopl.evalharness`).
"""

from autopl.errors import CheckpointError, DataError, DomainError, TrainingError

__all__ = ["CheckpointError", "DataError", "DomainError", "TrainingError"]

__version__ = "0.1.0"
