import numpy as np
import pytest

from framealign.alignment import StepWindow, align_latent, should_align
from framealign.matching import Mapping, empty_mapping, full_mapping
from framealign.scene import PartSpec, SyntheticSceneSpec, synth_scene

from scene_helpers import random_injective_mapping


def pair(q, s, part=1):
    return Mapping(np.array([[q[0], q[1], s[0], s[1], part]], dtype=np.int64))


class TestAlignLatent:
    def test_empty_mapping_is_noop(self, rng):
        x = rng.standard_normal((4, 6, 6))
        prev = rng.standard_normal((4, 6, 6))
        out = align_latent(x, prev, empty_mapping())
        assert np.array_equal(out, x)

    def test_single_pair_copies_all_channels(self, rng):
        x = rng.standard_normal((2, 5, 5))
        prev = rng.standard_normal((2, 5, 5))
        prev[:, 3, 2] = 7.5
        out = align_latent(x, prev, pair((1, 1), (3, 2)))
        assert (out[:, 1, 1] == 7.5).all()
        mask = np.ones_like(x, dtype=bool)
        mask[:, 1, 1] = False
        assert np.array_equal(out[mask], x[mask])

    def test_full_identity_mapping_copies_everything(self, rng):
        h = w = 4
        q = np.stack(np.unravel_index(np.arange(h * w), (h, w)), axis=1)
        pairs = np.concatenate([q, q, np.ones((h * w, 1), np.int64)], axis=1)
        m = Mapping(pairs.astype(np.int64))
        x = rng.standard_normal((3, h, w))
        prev = rng.standard_normal((3, h, w))
        out = align_latent(x, prev, m)
        assert np.array_equal(out, prev)

    def test_idempotent_bit_exact(self, rng):
        x = rng.standard_normal((3, 8, 8))
        prev = rng.standard_normal((3, 8, 8))
        m = random_injective_mapping(rng, 8, 8, 20)
        once = align_latent(x, prev, m)
        twice = align_latent(once, prev, m)
        assert np.array_equal(once, twice)

    def test_support_restriction(self, rng):
        x = rng.standard_normal((3, 8, 8))
        prev = rng.standard_normal((3, 8, 8))
        m = random_injective_mapping(rng, 8, 8, 13)
        out = align_latent(x, prev, m)
        changed = np.argwhere(np.any(out != x, axis=0))
        mapped = {tuple(r) for r in m.q.tolist()}
        assert {tuple(r) for r in changed.tolist()} <= mapped

    def test_bit_exact_propagation(self, rng):
        x = rng.standard_normal((3, 8, 8))
        prev = rng.standard_normal((3, 8, 8))
        m = random_injective_mapping(rng, 8, 8, 30)
        out = align_latent(x, prev, m)
        for qr, qc, sr, sc, _ in m.pairs.tolist():
            assert (out[:, qr, qc] == prev[:, sr, sc]).all()

    def test_out_of_range_rejected(self, rng):
        x = rng.standard_normal((1, 4, 4))
        with pytest.raises(ValueError, match="outside"):
            align_latent(x, x, pair((1, 1), (4, 0)))

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="differ"):
            align_latent(
                rng.standard_normal((1, 4, 4)),
                rng.standard_normal((1, 5, 4)),
                empty_mapping(),
            )

    def test_distribution_transfer_on_shifted_scene(self, rng):
        # after alignment with a total character mapping, the multiset of
        # character-site values equals the previous frame's exactly
        spec = SyntheticSceneSpec(
            canvas=(32, 32),
            parts=(
                PartSpec(part_id=2, shape="disc", center=(12, 10), radius=5.0),
                PartSpec(part_id=9, shape="rect", center=(22, 12), half=(3.0, 4.0)),
            ),
            offsets=((0, 0), (3, 6)),
            seed=8,
        )
        cond = synth_scene(spec)
        m = full_mapping(cond.embeddings[1], cond.embeddings[0])
        x = rng.standard_normal((3, 32, 32))
        prev = rng.standard_normal((3, 32, 32))
        out = align_latent(x, prev, m)
        cur_vals = out[:, m.q[:, 0], m.q[:, 1]]
        prev_vals = prev[:, m.s[:, 0], m.s[:, 1]]
        assert np.array_equal(np.sort(cur_vals, axis=1), np.sort(prev_vals, axis=1))
        # the mapping covers the full character in both frames
        assert len(m) == int((cond.embeddings[1].labels > 0).sum())


class TestStepWindow:
    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            StepWindow(3, 2)
        with pytest.raises(ValueError):
            StepWindow(-1, 2)

    def test_contains_and_len(self):
        w = StepWindow(2, 5)
        assert 2 in w and 5 in w and 1 not in w and 6 not in w
        assert len(w) == 4


class TestShouldAlign:
    def test_first_frame_never(self):
        w = StepWindow(0, 99)
        assert not should_align(5, w, 1)

    def test_inside_window_frame_two(self):
        assert should_align(10, StepWindow(0, 39), 2)

    def test_boundary_exclusion(self):
        assert not should_align(40, StepWindow(0, 39), 2)

    def test_none_window_disables(self):
        assert not should_align(10, None, 2)

    def test_negative_progress_rejected(self):
        with pytest.raises(ValueError):
            should_align(-1, StepWindow(0, 3), 2)

    def test_covers_forty_percent_of_default_steps(self):
        T = 100
        w = StepWindow(0, 39)
        fired = sum(should_align(T - t, w, 2) for t in range(T, 0, -1))
        assert fired == len(w) == 40
        assert fired / T == pytest.approx(0.40)
