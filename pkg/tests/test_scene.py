import numpy as np
import pytest

from framealign.embedding import part_pixels
from framealign.matching import full_mapping
from framealign.scene import (
    PartSpec,
    SyntheticSceneSpec,
    synth_scene,
    two_part_character,
)


def simple_spec(offsets, canvas=(40, 40), seed=0):
    return SyntheticSceneSpec(
        canvas=canvas,
        parts=(
            PartSpec(part_id=2, shape="disc", center=(14.0, 16.0), radius=5.0),
            PartSpec(part_id=9, shape="rect", center=(26.0, 18.0), half=(4.0, 3.0)),
        ),
        offsets=tuple(offsets),
        seed=seed,
    )


class TestSynthScene:
    def test_zero_motion_identical_frames(self):
        cond = synth_scene(simple_spec([(0, 0), (0, 0), (0, 0)]))
        for k in (1, 2):
            assert np.array_equal(cond.embeddings[k].labels, cond.embeddings[0].labels)
            assert np.array_equal(
                cond.embeddings[k].u_coords, cond.embeddings[0].u_coords
            )
            assert np.array_equal(cond.depths[k], cond.depths[0])

    def test_translation_ground_truth(self):
        cond = synth_scene(simple_spec([(0, 0), (0, 10)]))
        m = full_mapping(cond.embeddings[1], cond.embeddings[0])
        char = int((cond.embeddings[1].labels > 0).sum())
        assert len(m) == char
        np.testing.assert_array_equal(m.q - np.array([0, 10]), m.s)

    def test_part_pixel_counts_match_analytic_masks(self):
        cond = synth_scene(simple_spec([(0, 0)]))
        emb = cond.embeddings[0]
        disc = sum(
            1
            for r in range(40)
            for c in range(40)
            if (r - 14.0) ** 2 + (c - 16.0) ** 2 <= 25.0
        )
        rect = sum(
            1
            for r in range(40)
            for c in range(40)
            if abs(r - 26.0) <= 4.0 and abs(c - 18.0) <= 3.0
        )
        assert len(part_pixels(emb, 2)) == disc
        assert len(part_pixels(emb, 9)) == rect

    def test_exits_canvas_rejected(self):
        with pytest.raises(ValueError, match="exits the canvas"):
            synth_scene(simple_spec([(0, 0), (0, 30)]))

    def test_uv_distinct_within_part(self):
        cond = synth_scene(simple_spec([(0, 0)]))
        emb = cond.embeddings[0]
        for j in (2, 9):
            px = part_pixels(emb, j).pixels
            codes = emb.u_coords[px[:, 0], px[:, 1]] * 256 + emb.v_coords[
                px[:, 0], px[:, 1]
            ]
            assert len(np.unique(codes)) == len(px)

    def test_deterministic_per_seed(self):
        a = synth_scene(simple_spec([(0, 0), (1, 1)], seed=42))
        b = synth_scene(simple_spec([(0, 0), (1, 1)], seed=42))
        c = synth_scene(simple_spec([(0, 0), (1, 1)], seed=43))
        assert np.array_equal(a.embeddings[0].u_coords, b.embeddings[0].u_coords)
        assert not np.array_equal(a.embeddings[0].u_coords, c.embeddings[0].u_coords)

    def test_depth_transported_with_character(self):
        cond = synth_scene(simple_spec([(0, 0), (2, 3)]))
        d0, d1 = cond.depths
        nz = np.argwhere(d0 > 0)
        shifted = nz + np.array([2, 3])
        assert np.allclose(d1[shifted[:, 0], shifted[:, 1]], d0[nz[:, 0], nz[:, 1]])
        assert float(d1.sum()) == pytest.approx(float(d0.sum()))

    def test_overlapping_parts_rejected(self):
        spec = SyntheticSceneSpec(
            canvas=(30, 30),
            parts=(
                PartSpec(part_id=1, shape="disc", center=(15, 15), radius=5.0),
                PartSpec(part_id=2, shape="disc", center=(17, 15), radius=5.0),
            ),
            offsets=((0, 0),),
        )
        with pytest.raises(ValueError, match="overlaps"):
            synth_scene(spec)

    def test_duplicate_part_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            SyntheticSceneSpec(
                canvas=(20, 20),
                parts=(
                    PartSpec(part_id=1, shape="disc", center=(5, 5), radius=2.0),
                    PartSpec(part_id=1, shape="disc", center=(15, 15), radius=2.0),
                ),
                offsets=((0, 0),),
            )


class TestSceneSpecJson:
    def test_round_trip(self):
        spec = two_part_character(canvas=(56, 48), n_frames=4, velocity=(1, -2), seed=7)
        back = SyntheticSceneSpec.from_json(spec.to_json())
        assert back == spec

    def test_load_from_file(self, tmp_path):
        spec = simple_spec([(0, 0), (1, 1)])
        p = tmp_path / "scene.json"
        p.write_text(spec.to_json())
        assert SyntheticSceneSpec.load(p) == spec


class TestValidation:
    def test_bad_part_shape(self):
        with pytest.raises(ValueError, match="unknown part shape"):
            PartSpec(part_id=1, shape="blob", center=(1, 1))

    def test_disc_needs_radius(self):
        with pytest.raises(ValueError, match="radius"):
            PartSpec(part_id=1, shape="disc", center=(1, 1))

    def test_non_integer_offsets_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            simple_spec([(0, 0.5)])
