"""Mamdani fuzzy pose correction.

Five triangular sets per channel (NL, NS, Z, PS, PL), min rule activation,
max aggregation, centroid defuzzification. Default calibration: translation
centers at {-2,-1,0,1,2} cm with 1 cm half-width, rotation centers at
{-60,-30,0,30,60} degrees with 30 degree half-width.
"""

from dataclasses import dataclass, field

import numpy as np

from .env import Action
from .imaging import (CM_PER_PX, estimate_tip_pose, estimate_tip_pose_roi,
                      rotation_error_deg)

LABELS = ("NL", "NS", "Z", "PS", "PL")

TRANS_CENTERS_CM = (-2.0, -1.0, 0.0, 1.0, 2.0)
TRANS_HALF_WIDTH_CM = 1.0
ROT_CENTERS_DEG = (-60.0, -30.0, 0.0, 30.0, 60.0)
ROT_HALF_WIDTH_DEG = 30.0


@dataclass(frozen=True)
class FuzzySet:
    label: str
    center: float
    half_width: float

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half width must be positive")


def triangular_family(centers, half_width):
    return tuple(FuzzySet(lab, float(c), float(half_width))
                 for lab, c in zip(LABELS, centers))


def membership(e, fset):
    """Triangular membership: 0 outside (m-w, m+w), linear to 1 at the apex.
    Clamped into [0, 1] against float cancellation at the support edges."""
    e = float(e)
    m, w = fset.center, fset.half_width
    if e <= m - w or e >= m + w:
        return 0.0
    if e <= m:
        return min(1.0, max(0.0, (e - (m - w)) / w))
    return min(1.0, max(0.0, ((m + w) - e) / w))


def fuzzify(e, family):
    """Membership degree for each set of the family, in label order."""
    return np.array([membership(e, fs) for fs in family])


@dataclass(frozen=True)
class RuleBase:
    """Total 5x5 map (translation label, rotation label) -> (push label,
    roll label), plus the output set families."""
    rules: dict
    push_sets: tuple
    roll_sets: tuple

    def __post_init__(self):
        want = {(t, r) for t in LABELS for r in LABELS}
        if set(self.rules) != want:
            missing = sorted(want - set(self.rules))
            raise ValueError(f"rule base not total, missing {missing[:3]}...")


def diagonal_rule_base(push_sets=None, roll_sets=None):
    """Decoupled proportional table: push mirrors the translation label,
    roll mirrors the rotation label; antisymmetric under sign flips."""
    push_sets = push_sets or triangular_family(TRANS_CENTERS_CM, TRANS_HALF_WIDTH_CM)
    roll_sets = roll_sets or triangular_family(ROT_CENTERS_DEG, ROT_HALF_WIDTH_DEG)
    rules = {(t, r): (t, r) for t in LABELS for r in LABELS}
    return RuleBase(rules=rules, push_sets=push_sets, roll_sets=roll_sets)


def infer(mu_trans, mu_rot, rules):
    """Min activation per rule, max aggregation per output set.

    Returns (push memberships, roll memberships) as label->degree dicts.
    """
    push_mu = {lab: 0.0 for lab in LABELS}
    roll_mu = {lab: 0.0 for lab in LABELS}
    for i, t in enumerate(LABELS):
        if mu_trans[i] == 0.0:
            continue
        for j, r in enumerate(LABELS):
            if mu_rot[j] == 0.0:
                continue
            strength = min(mu_trans[i], mu_rot[j])
            out_push, out_roll = rules.rules[(t, r)]
            push_mu[out_push] = max(push_mu[out_push], strength)
            roll_mu[out_roll] = max(roll_mu[out_roll], strength)
    return push_mu, roll_mu


def defuzzify(mu_by_label, centers_by_label):
    """Centroid of the aggregated output sets; None when nothing is active
    (a distinct no-action signal, not a zero command)."""
    num = 0.0
    den = 0.0
    for lab, mu in mu_by_label.items():
        num += mu * centers_by_label[lab]
        den += mu
    if den == 0.0:
        return None
    return num / den


@dataclass(frozen=True)
class PoseError:
    """Signed translation error (cm, positive when the target lies ahead of
    the tip) and rotation error (degrees, from the offset difference)."""
    e_trans_cm: float
    e_rot_deg: float

    @property
    def trans_magnitude_cm(self):
        return abs(self.e_trans_cm)


def pose_error(pose, target_point_px, target_offset_px):
    """Errors between an estimated tip pose and a target pose."""
    delta = np.asarray(target_point_px, dtype=np.float64) - pose.tip_px
    magnitude_cm = float(np.hypot(*delta)) * CM_PER_PX
    ahead = float(np.dot(delta, pose.tip_tangent))
    e_trans = magnitude_cm if ahead >= 0 else -magnitude_cm
    e_rot = rotation_error_deg(float(target_offset_px) - pose.offset_px)
    return PoseError(e_trans_cm=e_trans, e_rot_deg=e_rot)


@dataclass
class CorrectionResult:
    converged: bool
    iterations: int
    errors: list                 # (|e_trans| cm, e_rot deg) per iteration
    demos: list                  # (observation, action array) pairs
    final_error: PoseError = None


@dataclass
class FuzzyController:
    """Pose-correction controller wired to the environment action scaling."""
    rules: RuleBase = field(default_factory=diagonal_rule_base)
    trans_sets: tuple = field(
        default_factory=lambda: triangular_family(TRANS_CENTERS_CM, TRANS_HALF_WIDTH_CM))
    rot_sets: tuple = field(
        default_factory=lambda: triangular_family(ROT_CENTERS_DEG, ROT_HALF_WIDTH_DEG))
    push_scale_mm: float = 10.0
    roll_scale_deg: float = 30.0
    tol_trans_cm: float = 0.2
    tol_rot_deg: float = 5.0
    max_iters: int = 50

    def crisp_outputs(self, e_trans_cm, e_rot_deg):
        """Defuzzified commands (cm of push, degrees of roll); None entries
        mean no active rule on that channel."""
        mu_t = fuzzify(e_trans_cm, self.trans_sets)
        mu_r = fuzzify(e_rot_deg, self.rot_sets)
        push_mu, roll_mu = infer(mu_t, mu_r, self.rules)
        push_centers = {s.label: s.center for s in self.rules.push_sets}
        roll_centers = {s.label: s.center for s in self.rules.roll_sets}
        return (defuzzify(push_mu, push_centers), defuzzify(roll_mu, roll_centers))

    @staticmethod
    def _clamp_covered(e, sets):
        """Pull an error just inside the family support so distant targets
        saturate the controller instead of stalling it."""
        lo = min(s.center - s.half_width for s in sets)
        hi = max(s.center + s.half_width for s in sets)
        margin = 1e-6 * (hi - lo)
        return min(max(float(e), lo + margin), hi - margin)

    def action_from_outputs(self, u_push_cm, u_roll_deg):
        push = 0.0 if u_push_cm is None else u_push_cm * 10.0 / self.push_scale_mm
        roll = 0.0 if u_roll_deg is None else u_roll_deg / self.roll_scale_deg
        return Action(push=push, roll=roll).clamped()

    def correction_step(self, pose, target_point_px, target_offset_px):
        """One fuzzy correction: errors -> rule table -> normalized action."""
        err = pose_error(pose, target_point_px, target_offset_px)
        u_push, u_roll = self.crisp_outputs(
            self._clamp_covered(err.e_trans_cm, self.trans_sets),
            self._clamp_covered(err.e_rot_deg, self.rot_sets))
        return self.action_from_outputs(u_push, u_roll), err

    def run_correction_loop(self, environment, state, target_point_px,
                            target_offset_px, entry_side="left",
                            smooth_window=9, smooth_order=3,
                            roi_center_px=None, roi_half_px=220.0):
        """Iterate pose estimation from the rendered mask and fuzzy
        correction until both tolerances hold or the iteration budget runs
        out. Non-convergence is reported via the flag.

        When ``roi_center_px`` is given, pose estimation uses the junction
        window around it so the shaft line is fitted to the local parent
        run.
        """
        from .imaging import ImagingError

        errors = []
        demos = []
        last_err = None
        for it in range(self.max_iters + 1):
            mask = environment.render_mask(state)
            try:
                if roi_center_px is not None:
                    pose = estimate_tip_pose_roi(mask, roi_center_px, roi_half_px,
                                                 entry_side, window=smooth_window,
                                                 order=smooth_order)
                else:
                    pose = estimate_tip_pose(mask, entry_side=entry_side,
                                             window=smooth_window,
                                             order=smooth_order)
            except ImagingError:
                # degenerate view (retracted or out-of-window catheter):
                # report non-convergence instead of crashing the episode
                return state, CorrectionResult(False, it, errors, demos,
                                               last_err)
            err = pose_error(pose, target_point_px, target_offset_px)
            last_err = err
            errors.append((err.trans_magnitude_cm, err.e_rot_deg))
            if (err.trans_magnitude_cm < self.tol_trans_cm
                    and abs(err.e_rot_deg) < self.tol_rot_deg):
                return state, CorrectionResult(True, it, errors, demos, err)
            if it == self.max_iters:
                break
            u_push, u_roll = self.crisp_outputs(
                self._clamp_covered(err.e_trans_cm, self.trans_sets),
                self._clamp_covered(err.e_rot_deg, self.rot_sets))
            action = self.action_from_outputs(u_push, u_roll)
            demos.append((environment.observe(state),
                          np.array([action.push, action.roll])))
            state = environment.apply_correction(state, action)
        return state, CorrectionResult(False, self.max_iters, errors, demos,
                                       last_err)
