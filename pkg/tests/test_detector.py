#!/usr/bin/env python

import math
import unittest

import numpy as np

from risbeam import detector
from risbeam.config import CameraModel, DetectorNoise, ScenarioConfig
from risbeam.scene import Scene, UserEquipment, generate_scene, project_bbox, visible_ues

NO_NOISE = DetectorNoise(bbox_jitter_std=0.0, miss_prob=0.0, false_positive_rate=0.0, class_confusion_prob=0.0)

CAMERA = CameraModel(position=(0.0, 0.0, 0.0), yaw=math.pi / 2, pitch=0.0,
                     horizontal_fov=math.pi / 2, width=1000, height=540)


def make_scene(positions, class_ids=None):
    class_ids = class_ids or [0] * len(positions)
    config = ScenarioConfig()
    return Scene(
        scene_index=0,
        scene_seed=0,
        ues=tuple(
            UserEquipment(ue_id=n, position=p, class_id=c, extents=(4.0, 2.0, 1.5))
            for n, (p, c) in enumerate(zip(positions, class_ids))
        ),
        blockers=(),
        ris=config.ris,
        bs_position=config.bs_position,
        cameras=(CAMERA,),
    )


THREE_UES = make_scene([(0.0, 21.0, 0.0), (-6.0, 30.0, 0.5), (8.0, 40.0, -1.0)], [0, 1, 0])


def in_frame(bbox, camera):
    x0, y0, x1, y1 = bbox.corners()
    return (
        -1e-9 <= x0 and x1 <= camera.width + 1e-9
        and -1e-9 <= y0 and y1 <= camera.height + 1e-9
        and bbox.width > 0 and bbox.height > 0
    )


class TestDetector(unittest.TestCase):

    def test_noise_free_detections_are_projections(self):
        result = detector.detect(THREE_UES, CAMERA, NO_NOISE, np.random.default_rng(0))
        expected = [
            detector.Detection(class_id=ue.class_id, bbox=bbox)
            for ue, bbox in visible_ues(THREE_UES, CAMERA)
        ]

        self.assertEqual(len(result), 3)
        self.assertCountEqual(result, expected)

    def test_everything_missed(self):
        noise = DetectorNoise(bbox_jitter_std=2.0, miss_prob=1.0, false_positive_rate=0.0, class_confusion_prob=0.0)

        result = detector.detect(THREE_UES, CAMERA, noise, np.random.default_rng(0))

        self.assertEqual(result, [])

    def test_jitter_statistics(self):
        scene = make_scene([(0.0, 21.0, 0.0)])
        projected = project_bbox(CAMERA, scene.ues[0])
        noise = DetectorNoise(bbox_jitter_std=2.0, miss_prob=0.0, false_positive_rate=0.0, class_confusion_prob=0.0)
        rng = np.random.default_rng(1)

        offsets = [
            detector.detect(scene, CAMERA, noise, rng)[0].bbox.x_center - projected.x_center
            for _ in range(10000)
        ]

        self.assertTrue(1.9 <= np.std(offsets) <= 2.1)

    def test_class_confusion(self):
        noise = DetectorNoise(bbox_jitter_std=0.0, miss_prob=0.0, false_positive_rate=0.0, class_confusion_prob=1.0)

        result = detector.detect(THREE_UES, CAMERA, noise, np.random.default_rng(2), num_classes=2)

        self.assertEqual(sorted(d.class_id for d in result), [0, 1, 1])

    def test_false_positives(self):
        noise = DetectorNoise(bbox_jitter_std=0.0, miss_prob=1.0, false_positive_rate=3.0, class_confusion_prob=0.0)
        rng = np.random.default_rng(3)

        counts = []
        for _ in range(500):
            result = detector.detect(THREE_UES, CAMERA, noise, rng)
            counts.append(len(result))
            for detection in result:
                self.assertTrue(in_frame(detection.bbox, CAMERA))
                self.assertIn(detection.class_id, (0, 1))

        self.assertTrue(2.7 <= np.mean(counts) <= 3.3)

    def test_output_order_is_randomised(self):
        orders = set()
        for seed in range(20):
            result = detector.detect(THREE_UES, CAMERA, NO_NOISE, np.random.default_rng(seed))
            orders.add(tuple(d.bbox.x_center for d in result))

        self.assertGreater(len(orders), 1)

    def test_deterministic_given_rng(self):
        noise = DetectorNoise()

        first = detector.detect(THREE_UES, CAMERA, noise, np.random.default_rng(9))
        second = detector.detect(THREE_UES, CAMERA, noise, np.random.default_rng(9))

        self.assertEqual(first, second)

    def test_boxes_in_frame_on_generated_scenes(self):
        config = ScenarioConfig(master_seed=4)
        noise = DetectorNoise(bbox_jitter_std=20.0, miss_prob=0.1, false_positive_rate=1.0, class_confusion_prob=0.1)
        rng = np.random.default_rng(4)

        for index in range(100):
            scene = generate_scene(config, index)
            for camera in scene.cameras:
                for detection in detector.detect(scene, camera, noise, rng):
                    self.assertTrue(in_frame(detection.bbox, camera))

    def test_clip_box_outside(self):
        result = detector.clip_box(-50.0, 100.0, 20.0, 20.0, CAMERA)

        self.assertIsNone(result)


if __name__ == "__main__":
    unittest.main()
