#
# Copyright 2026 The StackGen Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python bindings for the stacking-ensemble workbench."""

from __future__ import annotations

import json
from typing import Any, Optional, Sequence

import numpy as np

from . import _core
from ._core import Error

__all__ = ["Error", "Session", "StackPredictor", "compute_metrics", "run_workflow"]


def _dumps(obj: Optional[dict]) -> str:
    return json.dumps(obj) if obj else ""


def compute_metrics(y_true: Sequence[int], y_pred: Sequence[int], proba, num_classes: int,
                    config: Optional[dict] = None) -> dict:
    """All eight metrics (raw and normalized) plus the weighted score."""
    proba = np.asarray(proba, dtype=np.float64)
    return json.loads(_core.compute_metrics(list(y_true), list(y_pred), proba, num_classes,
                                            _dumps(config)))


def run_workflow(workflow: dict, base_dir: str = "", *, seed: Optional[int] = None,
                 folds: Optional[int] = None, grid_config: Optional[str] = None,
                 threads: int = 0) -> dict:
    """Replays a workflow document; returns step rows, stored stacks and the text table."""
    return json.loads(_core.run_workflow(json.dumps(workflow), base_dir, seed, folds, grid_config,
                                         threads))


class Session:
    """One workbench session. Actions take and return plain dicts."""

    def __init__(self, csv: str, label_column: str = "", *, seed: int = 42, folds: int = 5,
                 grid_config: str = "", threads: int = 0):
        self._s = _core.Session(csv, label_column, seed, folds, grid_config, threads)

    @staticmethod
    def actions() -> list:
        return _core.Session.actions()

    def dispatch(self, action: str, args: Optional[dict] = None) -> Any:
        return json.loads(self._s.dispatch(action, _dumps(args)))

    def workflow(self) -> dict:
        return json.loads(self._s.workflow())


class StackPredictor:
    """A stored stack exported as a self-contained document."""

    def __init__(self, core: "_core.StackPredictor", warnings: list):
        self._p = core
        self.warnings = list(warnings)

    @classmethod
    def from_json(cls, doc) -> "StackPredictor":
        text = doc if isinstance(doc, str) else json.dumps(doc)
        core, warnings = _core.StackPredictor.from_json(text)
        return cls(core, warnings)

    def to_json(self) -> dict:
        return json.loads(self._p.to_json())

    def predict_proba(self, X) -> np.ndarray:
        return self._p.predict_proba(np.asarray(X, dtype=np.float64))

    def predict(self, X) -> np.ndarray:
        return np.asarray(self._p.predict(np.asarray(X, dtype=np.float64)))

    @property
    def feature_names(self) -> list:
        return self._p.feature_names

    @property
    def class_names(self) -> list:
        return self._p.class_names

    @property
    def num_models(self) -> int:
        return self._p.num_models
