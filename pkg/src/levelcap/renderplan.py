"""Camera-pose math and render-job emission for the four canonical views.

Coordinate convention: right-handed, z-up. Azimuth is measured from +x
toward +y; elevation is +30 degrees above the equator. The camera sits at
``distance * (cos(el)cos(az), cos(el)sin(az), sin(el))`` looking at the
origin with up = +z. The renderer adapter translates into its own frame.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field

from .jsonl import write_jsonl
from .records import AssetRecord

ELEVATION_DEG = 30.0
CAMERA_DISTANCE = 1.5
RESOLUTION = (512, 512)

#: Azimuth index i=1..4 mapped to view labels (label assignment is a fixed
#: convention; the renderer adapter may relabel).
_VIEW_ORDER = ("front", "left", "back", "right")


class DegenerateBox(Exception):
    """All three bounding-box sides are zero."""


@dataclass(frozen=True)
class CameraPose:
    azimuth_rad: float
    elevation_deg: float
    distance: float
    position: tuple[float, float, float]
    view_tag: str


@dataclass(frozen=True)
class NormalizeTransform:
    """Maps an input bounding box into the unit cube centered at the origin."""

    scale: float
    translation: tuple[float, float, float]

    def apply(self, point: tuple[float, float, float]) -> tuple[float, float, float]:
        return tuple((p + t) * self.scale for p, t in zip(point, self.translation))


@dataclass(frozen=True)
class RenderJob:
    asset_id: str
    pose: CameraPose
    output_path: str
    resolution: tuple[int, int] = RESOLUTION

    def to_dict(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "azimuth_rad": self.pose.azimuth_rad,
            "elevation_deg": self.pose.elevation_deg,
            "distance": self.pose.distance,
            "resolution": list(self.resolution),
            "output_path": self.output_path,
        }


def camera_poses() -> list[CameraPose]:
    """The four canonical poses: azimuths pi/2, pi, 3pi/2, 2pi at 30 degrees."""
    phi = math.radians(ELEVATION_DEG)
    poses = []
    for i, tag in enumerate(_VIEW_ORDER, start=1):
        theta = math.pi * i / 2
        position = (
            CAMERA_DISTANCE * math.cos(phi) * math.cos(theta),
            CAMERA_DISTANCE * math.cos(phi) * math.sin(theta),
            CAMERA_DISTANCE * math.sin(phi),
        )
        poses.append(
            CameraPose(
                azimuth_rad=theta,
                elevation_deg=ELEVATION_DEG,
                distance=CAMERA_DISTANCE,
                position=position,
                view_tag=tag,
            )
        )
    return poses


def normalize_bounds(
    bbox_min: tuple[float, float, float], bbox_max: tuple[float, float, float]
) -> NormalizeTransform:
    """Transform making the longest box side 1 and the box center the origin.

    Degenerate (flat) axes are allowed; a fully degenerate box is an error.
    """
    sides = [mx - mn for mn, mx in zip(bbox_min, bbox_max)]
    longest = max(sides)
    if longest <= 0.0:
        raise DegenerateBox(f"box has no extent: min={bbox_min} max={bbox_max}")
    center = tuple((mn + mx) / 2.0 for mn, mx in zip(bbox_min, bbox_max))
    return NormalizeTransform(scale=1.0 / longest, translation=tuple(-c for c in center))


def emit_render_jobs(manifest: list[AssetRecord], output_root: str = "") -> list[RenderJob]:
    """Four jobs per asset, ordered by (asset_id, view_tag)."""
    poses = {p.view_tag: p for p in camera_poses()}
    jobs = []
    for record in manifest:
        for tag in sorted(poses):
            prefix = f"{output_root.rstrip('/')}/" if output_root else ""
            jobs.append(
                RenderJob(
                    asset_id=record.asset_id,
                    pose=poses[tag],
                    output_path=f"{prefix}{record.asset_id}/{tag}.png",
                )
            )
    jobs.sort(key=lambda j: (j.asset_id, j.pose.view_tag))
    return jobs


def write_render_jobs(path: str, jobs: list[RenderJob]) -> None:
    write_jsonl(path, (j.to_dict() for j in jobs))


@dataclass
class RendererAdapter:
    """Formats shell commands for an external renderer from a template.

    Template placeholders: {asset_path} {azimuth_rad} {elevation_deg}
    {distance} {width} {height} {output_path}.
    """

    command_template: str
    extra_env: dict[str, str] = field(default_factory=dict)

    def command_for(self, job: RenderJob, asset_path: str) -> list[str]:
        rendered = self.command_template.format(
            asset_path=asset_path,
            azimuth_rad=job.pose.azimuth_rad,
            elevation_deg=job.pose.elevation_deg,
            distance=job.pose.distance,
            width=job.resolution[0],
            height=job.resolution[1],
            output_path=job.output_path,
        )
        return shlex.split(rendered)
