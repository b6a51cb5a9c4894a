#!/usr/bin/env python

import unittest

from risbeam import seeding


class TestSeeding(unittest.TestCase):

    def test_same_keys_same_stream(self):
        first = seeding.substream(7, "scene", 3).random(5)
        second = seeding.substream(7, "scene", 3).random(5)

        self.assertEqual(first.tolist(), second.tolist())

    def test_streams_are_independent(self):
        scene = seeding.substream(7, "scene", 3).random(5)
        detector = seeding.substream(7, "detector", 3).random(5)

        self.assertNotEqual(scene.tolist(), detector.tolist())

    def test_keys_are_independent(self):
        first = seeding.substream(7, "channel", 1, 0).random(5)
        second = seeding.substream(7, "channel", 1, 1).random(5)

        self.assertNotEqual(first.tolist(), second.tolist())

    def test_unknown_stream(self):
        with self.assertRaises(KeyError):
            seeding.substream(0, "weather")

    def test_derived_seed_is_64_bit(self):
        result = seeding.derived_seed(2 ** 64 - 1, "scene", 12)

        self.assertTrue(0 <= result < 2 ** 64)
        self.assertEqual(result, seeding.derived_seed(2 ** 64 - 1, "scene", 12))
        self.assertNotEqual(result, seeding.derived_seed(2 ** 64 - 1, "scene", 13))


if __name__ == "__main__":
    unittest.main()
