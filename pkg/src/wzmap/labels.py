"""The ten vehicle behavior classes and small helpers over them.

Two labels (Stopping, LC) are assigned by rule from the speed signal; the
remaining eight describe maneuvers and are assigned by the classifier.
Naming: L = linear, T = turning, L/R = left/right, A/C/D = accelerating /
constant speed / decelerating.
"""

from __future__ import annotations

from enum import Enum


class BehaviorLabel(str, Enum):
    STOPPING = "Stopping"
    LC = "LC"    # straight line, constant speed
    LA = "LA"    # linear accelerating
    LD = "LD"    # linear decelerating
    TLA = "TLA"  # turning left, accelerating
    TRA = "TRA"  # turning right, accelerating
    TLC = "TLC"  # turning left, constant speed
    TRC = "TRC"  # turning right, constant speed
    TLD = "TLD"  # turning left, decelerating
    TRD = "TRD"  # turning right, decelerating

    def __str__(self) -> str:  # so f"{label}" gives the short code
        return self.value


#: Canonical ordering of the eight maneuver classes; fixes the class index
#: used for vote tie-breaking and for model serialization.
POI_LABELS: tuple[BehaviorLabel, ...] = (
    BehaviorLabel.LA,
    BehaviorLabel.LD,
    BehaviorLabel.TLA,
    BehaviorLabel.TRA,
    BehaviorLabel.TLC,
    BehaviorLabel.TRC,
    BehaviorLabel.TLD,
    BehaviorLabel.TRD,
)

RULE_LABELS: tuple[BehaviorLabel, ...] = (BehaviorLabel.STOPPING, BehaviorLabel.LC)

ALL_LABELS: tuple[BehaviorLabel, ...] = RULE_LABELS + POI_LABELS


def parse_label(text: str) -> BehaviorLabel:
    """Parse a label code such as 'LD' or 'Stopping' (case-sensitive)."""
    try:
        return BehaviorLabel(text)
    except ValueError:
        raise ValueError(f"unknown behavior label {text!r}") from None


def is_poi_label(label: BehaviorLabel) -> bool:
    return label in POI_LABELS


def turn_sign(label: BehaviorLabel) -> int:
    """+1 for left turns, -1 for right turns, 0 for straight-line labels."""
    name = label.value
    if name.startswith("TL"):
        return 1
    if name.startswith("TR"):
        return -1
    return 0


def speed_trend(label: BehaviorLabel) -> int:
    """+1 accelerating, -1 decelerating, 0 constant speed or stopped."""
    name = label.value
    if name.endswith("A") and name != "Stopping":
        return 1
    if name.endswith("D"):
        return -1
    return 0
