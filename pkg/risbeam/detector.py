#!/usr/bin/env python

"""
Object detector stand-in: turns the UEs a camera sees into (class, box)
detections, with misses, box jitter, class confusion and false positives.
"""

import logging
from dataclasses import dataclass

from .scene import BoundingBox, visible_ues

logger = logging.getLogger(__name__)

MIN_BOX_SIZE = 1.0
FALSE_POSITIVE_WIDTH = (16.0, 160.0)
FALSE_POSITIVE_ASPECT = (0.4, 1.0)


@dataclass(frozen=True)
class Detection:
    class_id: int
    bbox: BoundingBox


def clip_box(x_center, y_center, width, height, camera):
    """
    Return the box clipped to the image, or None if nothing is left
    """
    width = max(width, MIN_BOX_SIZE)
    height = max(height, MIN_BOX_SIZE)
    x0 = max(x_center - width / 2.0, 0.0)
    x1 = min(x_center + width / 2.0, float(camera.width))
    y0 = max(y_center - height / 2.0, 0.0)
    y1 = min(y_center + height / 2.0, float(camera.height))
    if x1 <= x0 or y1 <= y0:
        return None

    return BoundingBox.from_corners(x0, y0, x1, y1)


def _confuse(class_id, num_classes, probability, rng):
    if num_classes < 2 or probability <= 0.0 or rng.random() >= probability:
        return class_id

    other = int(rng.integers(num_classes - 1))
    return other + 1 if other >= class_id else other


def _false_positive(camera, num_classes, rng):
    width = rng.uniform(*FALSE_POSITIVE_WIDTH)
    height = width * rng.uniform(*FALSE_POSITIVE_ASPECT)
    bbox = clip_box(
        rng.uniform(0.0, camera.width),
        rng.uniform(0.0, camera.height),
        width,
        height,
        camera,
    )
    return Detection(class_id=int(rng.integers(num_classes)), bbox=bbox)


def detect(scene, camera, noise, rng, num_classes=2):
    """
    Return the detections of one camera image, in random order
    """
    detections = []

    for ue, bbox in visible_ues(scene, camera):
        if noise.miss_prob > 0.0 and rng.random() < noise.miss_prob:
            continue

        if noise.bbox_jitter_std > 0.0:
            jitter = rng.normal(0.0, noise.bbox_jitter_std, size=4)
            bbox = clip_box(
                bbox.x_center + jitter[0],
                bbox.y_center + jitter[1],
                bbox.width + jitter[2],
                bbox.height + jitter[3],
                camera,
            )
            if bbox is None:
                continue

        class_id = _confuse(ue.class_id, num_classes, noise.class_confusion_prob, rng)
        detections.append(Detection(class_id=class_id, bbox=bbox))

    if noise.false_positive_rate > 0.0:
        for _ in range(int(rng.poisson(noise.false_positive_rate))):
            spurious = _false_positive(camera, num_classes, rng)
            if spurious.bbox is not None:
                detections.append(spurious)

    order = rng.permutation(len(detections))
    logger.debug("scene %d: %d detection(s)", scene.scene_index, len(detections))

    return [detections[i] for i in order]
