"""Binding correctness plus the cross-interface equivalence acceptance:
bound kernels must reproduce the native CLI bit-exactly (integers) or to
1e-12 (reals) on shared serialized fixtures."""

import json
import subprocess
import sys

import numpy as np
import pytest

import framealign_bindings as fab
from framealign.cli import main as cli_main
from framealign.scene import PartSpec, SyntheticSceneSpec, synth_scene
from framealign.tensorio import read_tensor, write_tensor


def fixture_scene(seed: int) -> SyntheticSceneSpec:
    rng = np.random.default_rng(seed)
    return SyntheticSceneSpec(
        canvas=(40, 40),
        parts=(
            PartSpec(
                part_id=int(rng.integers(1, 13)),
                shape="disc",
                center=(13 + int(rng.integers(-2, 3)), 12 + int(rng.integers(-2, 3))),
                radius=float(rng.uniform(3, 5)),
            ),
            PartSpec(
                part_id=int(rng.integers(13, 25)),
                shape="rect",
                center=(27 + int(rng.integers(-2, 3)), 15 + int(rng.integers(-2, 3))),
                half=(float(rng.uniform(2, 4)), float(rng.uniform(2, 4))),
            ),
        ),
        offsets=((0, 0), (int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))),
        seed=seed,
    )


def write_fixture(tmp_path, seed: int):
    cond = synth_scene(fixture_scene(seed))
    prefixes = []
    for k, emb in enumerate(cond.embeddings):
        prefix = tmp_path / f"frame_{k}"
        write_tensor(f"{prefix}_labels.ctf", emb.labels.astype(np.int32))
        write_tensor(f"{prefix}_u.ctf", emb.u_coords.astype(np.int32))
        write_tensor(f"{prefix}_v.ctf", emb.v_coords.astype(np.int32))
        prefixes.append(str(prefix))
    return cond, prefixes


class TestAgainstNativeCli:
    @pytest.mark.filterwarnings("ignore::framealign_bindings.BufferCopyWarning")
    @pytest.mark.parametrize("seed", range(20))
    def test_shared_fixture_equivalence(self, seed, tmp_path, rng):
        cond, prefixes = write_fixture(tmp_path, seed)
        emb_prev, emb_cur = cond.embeddings

        # mapping: bit-exact against the match command's tensor
        map_path = tmp_path / "m.ctf"
        assert (
            cli_main(
                ["match", "--cur", prefixes[1], "--prev", prefixes[0],
                 "--out", str(map_path)]
            )
            == 0
        )
        bound = fab.py_full_mapping(
            emb_cur.labels, emb_cur.u_coords, emb_cur.v_coords,
            emb_prev.labels, emb_prev.u_coords, emb_prev.v_coords,
        )
        cli_pairs = read_tensor(map_path)
        assert bound.dtype == cli_pairs.dtype
        assert bound.tobytes() == cli_pairs.tobytes()

        # alignment: bit-exact against the align command's tensor
        x_cur = rng.standard_normal((3, 40, 40))
        x_prev = rng.standard_normal((3, 40, 40))
        write_tensor(tmp_path / "xc.ctf", x_cur)
        write_tensor(tmp_path / "xp.ctf", x_prev)
        assert (
            cli_main(
                ["align", "--cur", str(tmp_path / "xc.ctf"),
                 "--prev", str(tmp_path / "xp.ctf"),
                 "--mapping", str(map_path),
                 "--out", str(tmp_path / "aligned.ctf")]
            )
            == 0
        )
        bound_aligned = fab.py_align_latent(x_cur, x_prev, bound)
        assert bound_aligned.tobytes() == read_tensor(tmp_path / "aligned.ctf").tobytes()

        # metric: within 1e-12 of the hmse command's report
        frames = [rng.random((3, 40, 40)) for _ in range(3)]
        for k, f in enumerate(frames):
            write_tensor(tmp_path / f"img{k}.ctf", f)
        write_tensor(tmp_path / "m2.ctf", cli_pairs)
        report_path = tmp_path / "report.json"
        assert (
            cli_main(
                ["hmse",
                 "--frames", *(str(tmp_path / f"img{k}.ctf") for k in range(3)),
                 "--mappings", str(map_path), str(tmp_path / "m2.ctf"),
                 "--report", str(report_path)]
            )
            == 0
        )
        bound_report = fab.py_hmse(frames, [bound, bound])
        cli_report = json.loads(report_path.read_text())
        assert bound_report.h_mse == pytest.approx(cli_report["h_mse"], abs=1e-12)
        for (fr, n, mse), entry in zip(bound_report.per_pair, cli_report["per_pair"]):
            assert (fr, n) == (entry["frame"], entry["pairs"])
            assert mse == pytest.approx(entry["mse"], abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 7])
    def test_subprocess_cli_equivalence(self, seed, tmp_path):
        cond, prefixes = write_fixture(tmp_path, seed)
        emb_prev, emb_cur = cond.embeddings
        out = tmp_path / "m_sub.ctf"
        proc = subprocess.run(
            [sys.executable, "-m", "framealign.cli", "match",
             "--cur", prefixes[1], "--prev", prefixes[0], "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        bound = fab.py_full_mapping(
            emb_cur.labels, emb_cur.u_coords, emb_cur.v_coords,
            emb_prev.labels, emb_prev.u_coords, emb_prev.v_coords,
        )
        assert bound.tobytes() == read_tensor(out).tobytes()

    @pytest.mark.filterwarnings("ignore::framealign_bindings.BufferCopyWarning")
    def test_guidance_loss_matches_guide_command(self, tmp_path, rng, capsys):
        cond, prefixes = write_fixture(tmp_path, 3)
        map_path = tmp_path / "m.ctf"
        cli_main(["match", "--cur", prefixes[1], "--prev", prefixes[0],
                  "--out", str(map_path)])
        cur = rng.random((3, 40, 40))
        prev = rng.random((3, 40, 40))
        write_tensor(tmp_path / "cur.ctf", cur)
        write_tensor(tmp_path / "prev.ctf", prev)
        assert (
            cli_main(
                ["guide", "--cur", str(tmp_path / "cur.ctf"),
                 "--prev", str(tmp_path / "prev.ctf"),
                 "--mapping", str(map_path),
                 "--out-grad", str(tmp_path / "g.ctf")]
            )
            == 0
        )
        printed = capsys.readouterr().out
        omega_cli = float(printed.split("omega= ")[1].splitlines()[0])
        mapping = read_tensor(map_path)
        assert fab.py_guidance_loss(cur, prev, mapping) == pytest.approx(
            omega_cli, abs=1e-12
        )
        grad = fab.py_guidance_pixel_grad(cur, prev, mapping)
        assert grad.tobytes() == read_tensor(tmp_path / "g.ctf").tobytes()


class TestBufferSemantics:
    def test_noncontiguous_input_copies_with_warning(self, rng):
        cond = synth_scene(fixture_scene(1))
        emb_prev, emb_cur = cond.embeddings
        labels_t = np.asfortranarray(emb_cur.labels)
        with pytest.warns(fab.BufferCopyWarning):
            got = fab.py_full_mapping(
                labels_t, emb_cur.u_coords, emb_cur.v_coords,
                emb_prev.labels, emb_prev.u_coords, emb_prev.v_coords,
            )
        clean = fab.py_full_mapping(
            emb_cur.labels, emb_cur.u_coords, emb_cur.v_coords,
            emb_prev.labels, emb_prev.u_coords, emb_prev.v_coords,
        )
        assert got.tobytes() == clean.tobytes()

    def test_zero_copy_when_contiguous(self, rng):
        import warnings

        x_cur = rng.standard_normal((3, 8, 8))
        x_prev = rng.standard_normal((3, 8, 8))
        m = np.array([[0, 0, 1, 1, 1]], dtype=np.int64)
        with warnings.catch_warnings():
            warnings.simplefilter("error", fab.BufferCopyWarning)
            fab.py_align_latent(x_cur, x_prev, m)

    def test_dtype_mismatch_typed_exception(self, rng):
        x = rng.standard_normal((3, 4, 4))
        m = np.array([[0, 0, 1, 1, 1]], dtype=np.int64)
        with pytest.raises(TypeError, match="integer"):
            fab.py_full_mapping(x, x, x, x, x, x)
        with pytest.raises(TypeError, match="float"):
            fab.py_align_latent(m, m, m)

    def test_shape_mismatch_typed_exception(self, rng):
        z = np.zeros((4, 4), dtype=np.int64)
        z5 = np.zeros((5, 5), dtype=np.int64)
        with pytest.raises(ValueError, match="differ"):
            fab.py_full_mapping(z, z, z, z5, z5, z5)
        with pytest.raises(ValueError, match="3-D"):
            fab.py_align_latent(np.zeros((4, 4)), np.zeros((4, 4)), z[:1])

    def test_result_is_fresh_buffer(self, rng):
        x_cur = rng.standard_normal((3, 6, 6))
        x_prev = rng.standard_normal((3, 6, 6))
        m = np.array([[0, 0, 1, 1, 1]], dtype=np.int64)
        out = fab.py_align_latent(x_cur, x_prev, m)
        assert out is not x_cur and not np.shares_memory(out, x_cur)

    def test_no_hidden_state(self, rng):
        x = rng.random((3, 5, 5))
        y = rng.random((3, 5, 5))
        m = np.array([[0, 0, 1, 1, 1], [2, 2, 3, 3, 1]], dtype=np.int64)
        first = fab.py_guidance_loss(x, y, m)
        for _ in range(3):
            assert fab.py_guidance_loss(x, y, m) == first

    def test_simple_cases(self):
        z = np.zeros((6, 6), dtype=np.int64)
        out = fab.py_full_mapping(z, z, z, z, z, z)
        assert out.shape == (0, 5) and out.dtype == np.int32
        lab = z.copy()
        lab[2:4, 2:4] = 5
        uv = np.arange(36, dtype=np.int64).reshape(6, 6)
        ident = fab.py_full_mapping(lab, uv, uv.T.copy(), lab, uv, uv.T.copy())
        assert (ident[:, 0:2] == ident[:, 2:4]).all()

    def test_ctf_helpers_reexported(self, tmp_path, rng):
        arr = rng.standard_normal((2, 3)).astype(np.float32)
        fab.write_tensor(tmp_path / "x.ctf", arr)
        assert fab.read_tensor(tmp_path / "x.ctf").tobytes() == arr.tobytes()
