"""cathnav: simulated catheter steering at vessel bifurcations.

Subsystems: vessel phantom + environment (``phantom``, ``env``), binary-mask
imaging (``imaging``), constant-curvature kinematics (``kinematics``), fuzzy
pose correction (``fuzzy``), learning substrate (``nn``), hybrid trainer
(``trainer``), expert gateway (``expert``, ``gateway``) and the experiment
harness (``config``, ``harness``, ``metrics``, ``cli``).
"""

__version__ = "0.1.0"
