#!/usr/bin/env python

import dataclasses
import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from risbeam import scene
from risbeam.config import BlockerSpec, CameraModel, ScenarioConfig
from risbeam.errors import ConfigError

from pyfakefs import fake_filesystem_unittest

# integer coordinates keep tangent cases exact in floating point
coordinates = st.integers(min_value=-50, max_value=50).map(float)
points = st.tuples(coordinates, coordinates, coordinates)


def make_scene(blockers=(), ues=(), cameras=()):
    config = ScenarioConfig()
    return scene.Scene(
        scene_index=0,
        scene_seed=0,
        ues=tuple(ues),
        blockers=tuple(blockers),
        ris=config.ris,
        bs_position=config.bs_position,
        cameras=tuple(cameras),
    )


def make_ue(position, extents=(4.0, 2.0, 1.5), ue_id=0):
    return scene.UserEquipment(ue_id=ue_id, position=position, class_id=0, extents=extents)


# looks along +y from the origin, 90 degree field of view
FRONT_CAMERA = CameraModel(position=(0.0, 0.0, 0.0), yaw=math.pi / 2, pitch=0.0,
                           horizontal_fov=math.pi / 2, width=1000, height=540)


class TestGenerateScene(unittest.TestCase):

    def test_deterministic(self):
        config = ScenarioConfig(master_seed=42)

        first = scene.generate_scene(config, 17)
        second = scene.generate_scene(config, 17)

        self.assertEqual(first, second)

    def test_index_changes_scene(self):
        config = ScenarioConfig(master_seed=42)

        first = scene.generate_scene(config, 1)
        second = scene.generate_scene(config, 2)

        self.assertNotEqual(first.scene_seed, second.scene_seed)

    def test_zero_ues(self):
        config = ScenarioConfig(ue_count_range=(0, 0))

        result = scene.generate_scene(config, 0)

        self.assertEqual(result.ues, ())

    def test_mean_ue_count(self):
        config = ScenarioConfig(ue_count_range=(1, 5), master_seed=1)

        counts = [len(scene.generate_scene(config, i).ues) for i in range(1000)]

        self.assertTrue(2.8 <= np.mean(counts) <= 3.2)
        self.assertEqual(min(counts), 1)
        self.assertEqual(max(counts), 5)

    def test_ues_inside_region_with_class_extents(self):
        config = ScenarioConfig(master_seed=9)

        for index in range(50):
            for ue in scene.generate_scene(config, index).ues:
                self.assertTrue(config.region_contains(ue.position))
                self.assertIn(ue.class_id, (0, 1))
                self.assertEqual(ue.extents, config.class_extents[ue.class_id])
                speed = np.linalg.norm(ue.velocity)
                self.assertTrue(5.0 - 1e-9 <= speed <= 15.0 + 1e-9)

    def test_zero_volume_region_rejected(self):
        config = ScenarioConfig(ue_region=((0.0, 5.0, 1.0), (10.0, 5.0, 2.0)))

        with self.assertRaises(ConfigError):
            scene.generate_scene(config, 0)


class TestLineOfSight(unittest.TestCase):

    BOX = BlockerSpec(center=(0.0, 0.0, 0.5), extents=(2.0, 2.0, 1.0))

    def test_no_blockers(self):
        result = scene.los_visible(make_scene(), (0.0, 0.0, 0.0), (10.0, 10.0, 10.0))

        self.assertTrue(result)

    def test_blocker_on_midpoint(self):
        result = scene.los_visible(make_scene([self.BOX]), (-5.0, 0.0, 0.5), (5.0, 0.0, 0.5))

        self.assertFalse(result)

    def test_grazing_face_is_visible(self):
        result = scene.los_visible(make_scene([self.BOX]), (-5.0, 0.0, 1.0), (5.0, 0.0, 1.0))

        self.assertTrue(result)

    def test_grazing_edge_is_visible(self):
        result = scene.los_visible(make_scene([self.BOX]), (-5.0, 1.0, 1.0), (5.0, 1.0, 1.0))

        self.assertTrue(result)

    def test_segment_ending_before_box(self):
        result = scene.los_visible(make_scene([self.BOX]), (-5.0, 0.0, 0.5), (-1.5, 0.0, 0.5))

        self.assertTrue(result)

    def test_same_point(self):
        with self.assertRaises(ValueError):
            scene.los_visible(make_scene(), (1.0, 2.0, 3.0), (1.0, 2.0, 3.0))

    @settings(deadline=None)
    @given(points, points)
    def test_symmetric(self, a, b):
        if a == b:
            return
        s = make_scene([self.BOX, BlockerSpec(center=(10.0, -5.0, 3.0), extents=(4.0, 8.0, 6.0))])

        self.assertEqual(scene.los_visible(s, a, b), scene.los_visible(s, b, a))


class TestProjection(unittest.TestCase):

    def test_pose_basis_is_orthonormal(self):
        right, forward, up = scene.pose_basis(0.7, -0.3)

        basis = np.stack([right, forward, up])
        np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
        self.assertGreater(up[2], 0.0)

    def test_behind_camera(self):
        result = scene.project_bbox(FRONT_CAMERA, make_ue((0.0, -10.0, 0.0)))

        self.assertIsNone(result)

    def test_on_optical_axis(self):
        # near face at d = 20 m, 4 m long across the view
        result = scene.project_bbox(FRONT_CAMERA, make_ue((0.0, 21.0, 0.0)))
        focal = FRONT_CAMERA.focal_px

        self.assertAlmostEqual(focal, 500.0)
        self.assertAlmostEqual(result.x_center, 500.0)
        self.assertAlmostEqual(result.y_center, 270.0)
        self.assertAlmostEqual(result.width, 4.0 * focal / 20.0)
        self.assertAlmostEqual(result.height, 1.5 * focal / 20.0)

    def test_outside_field_of_view(self):
        # 60 degrees off axis with a 45 degree half angle
        angle = math.radians(60.0)
        position = (30.0 * math.sin(angle), 30.0 * math.cos(angle), 0.0)

        result = scene.project_bbox(FRONT_CAMERA, make_ue(position, extents=(0.5, 0.5, 0.5)))

        self.assertIsNone(result)

    @settings(deadline=None)
    @given(
        st.floats(min_value=-60.0, max_value=60.0),
        st.floats(min_value=1.0, max_value=80.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_boxes_stay_in_frame(self, x, y, z):
        result = scene.project_bbox(FRONT_CAMERA, make_ue((x, y, z)))
        if result is None:
            return

        x0, y0, x1, y1 = result.corners()
        self.assertTrue(-1e-9 <= x0 < x1 <= FRONT_CAMERA.width + 1e-9)
        self.assertTrue(-1e-9 <= y0 < y1 <= FRONT_CAMERA.height + 1e-9)

    def test_visible_ues_respects_occlusion(self):
        ue = make_ue((0.0, 21.0, 0.0))
        wall = BlockerSpec(center=(0.0, 10.0, 0.0), extents=(20.0, 1.0, 20.0))

        clear = scene.visible_ues(make_scene(ues=[ue]), FRONT_CAMERA)
        hidden = scene.visible_ues(make_scene(blockers=[wall], ues=[ue]), FRONT_CAMERA)

        self.assertEqual([u for u, _ in clear], [ue])
        self.assertEqual(hidden, [])


class TestSceneRecords(fake_filesystem_unittest.TestCase):

    def setUp(self):
        self.setUpPyfakefs()

    def test_write_and_read_scenes(self):
        config = ScenarioConfig(master_seed=5)
        scenes = [scene.generate_scene(config, i) for i in range(4)]

        scene.write_scenes("out/scenes.jsonl", scenes)
        result = scene.read_scenes("out/scenes.jsonl")

        self.assertEqual(result, scenes)

    def test_one_scene_per_line(self):
        config = ScenarioConfig(master_seed=5)
        scenes = [scene.generate_scene(config, i) for i in range(3)]

        contents = scene.scenes_to_string(scenes)

        self.assertEqual(len(contents.splitlines()), 3)

    def test_record_keeps_velocity(self):
        original = scene.generate_scene(ScenarioConfig(master_seed=2), 0)
        record = scene.scene_to_record(original)

        result = scene.scene_from_record(record)

        self.assertEqual(result.ues, original.ues)
        self.assertEqual(dataclasses.asdict(result.ris), dataclasses.asdict(original.ris))


if __name__ == "__main__":
    unittest.main()
