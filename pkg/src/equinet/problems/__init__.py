"""Wireless problems: objectives, projections and end-to-end learners."""

from equinet.problems.objectives import *  # noqa: F401,F403
from equinet.problems.heads import ModelSpec, build_head, input_lift  # noqa: F401
