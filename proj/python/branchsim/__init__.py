"""Python access to the branching simulation engine.

JSON-shaped results come back as plain dicts and lists.
"""

import json as _json

from ._branchsim import BranchsimError, theorem71_no_gain, theorem72_advice
from ._branchsim import Workspace as _Workspace

__all__ = ["BranchsimError", "Workspace", "error_code", "predict", "theorem71_no_gain", "theorem72_advice"]


def error_code(exc):
    """'StepNotStored' from 'StepNotStored: step 500 ...'."""
    return str(exc).split(":", 1)[0]


def _text(value):
    if value is None:
        return ""
    return value if isinstance(value, str) else _json.dumps(value)


class Workspace:
    def __init__(self, handle):
        self._ws = handle

    @classmethod
    def create(cls, config, store=""):
        return cls(_Workspace.create(_text(config), str(store)))

    @classmethod
    def open(cls, store):
        return cls(_Workspace.open(str(store)))

    @property
    def root(self):
        return self._ws.root()

    def tree(self):
        return _json.loads(self._ws.tree_json())

    def run(self, node, until, incremental=False):
        return _json.loads(self._ws.run(node, until, incremental))

    def run_tree(self, until, workers=1):
        self._ws.run_tree(until, workers)

    def branch(self, parent, at_step, overrides=None):
        """Returns (node id, duplicate)."""
        return self._ws.branch(parent, at_step, _text(overrides))

    def annotate(self, node, kind, text):
        self._ws.annotate(node, kind, text)

    def counters(self, node):
        return _json.loads(self._ws.counters_json(node))

    def digest(self, node, step):
        return self._ws.digest(node, step)

    def frame(self, node, step):
        return self._ws.frame(node, step)

    def frame_deltas(self, node, from_step, to_step):
        return _json.loads(self._ws.frame_deltas_json(node, from_step, to_step))

    def probe(self, node, x, y, step):
        return self._ws.probe(node, x, y, step)

    def report(self, observation=None):
        return _json.loads(self._ws.report_json(_text(observation)))

    def reflect(self, node, from_step, to_step, overrides=None):
        return _json.loads(self._ws.reflect_json(node, from_step, to_step, _text(overrides)))

    def retrospect(self, node, at_step, overrides=None, until=None):
        return _json.loads(self._ws.retrospect_json(node, at_step, _text(overrides), until))

    def predict(self, config, workers=0):
        return self._ws.predict(_text(config), workers)

    def save(self):
        self._ws.save()


def predict(config, store="", workers=0):
    """Creates a workspace from `config`, runs it and returns (workspace, report)."""
    ws = Workspace.create(config, store)
    ws.predict(config, workers)
    return ws, ws.report()
