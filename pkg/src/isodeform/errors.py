"""Error taxonomy shared across modules.

HypothesisError marks violations of the structural hypotheses (rank of the
shape operator, nonsingularity of Q, the gradient constraint of a scalar
pair): the CLI reports these with exit code 3.  SceneError marks unusable
input (exit code 4).  Ordinary residual-check failures are not exceptions;
they are recorded in reports (exit code 2).
"""


class HypothesisError(ValueError):
    pass


class SceneError(ValueError):
    pass
