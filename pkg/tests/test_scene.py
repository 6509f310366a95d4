import numpy as np
import pytest

from hsirpca import (
    ALPHAS,
    BlockSpec,
    DataError,
    GroundTruth,
    ImplantPlan,
    SpectrumRecord,
    add_noise,
    build_scenes,
    convoy_blocks,
    implant,
    paper_protocol,
    parse_scene_spec,
    protocol_target,
    replicate_background,
    save_spectra,
    synth_background,
)


def test_block_spec_validation():
    BlockSpec(top=0, left=0, height=1, width=1)
    with pytest.raises(ValueError):
        BlockSpec(top=-1, left=0, height=1, width=1)
    with pytest.raises(ValueError):
        BlockSpec(top=0, left=0, height=0, width=1)


def test_block_overlap_geometry():
    a = BlockSpec(top=0, left=0, height=4, width=4)
    assert a.overlaps(BlockSpec(top=3, left=3, height=2, width=2))
    # touching edges do not overlap
    assert not a.overlaps(BlockSpec(top=4, left=0, height=2, width=2))
    assert not a.overlaps(BlockSpec(top=0, left=4, height=2, width=2))
    assert not a.overlaps(BlockSpec(top=10, left=10, height=1, width=1))


def test_implant_plan_validation():
    t = np.ones(5)
    b = BlockSpec(top=0, left=0, height=2, width=2)
    with pytest.raises(ValueError):
        ImplantPlan(target=t, alpha=0.0, blocks=(b,))
    with pytest.raises(ValueError):
        ImplantPlan(target=t, alpha=1.5, blocks=(b,))
    with pytest.raises(ValueError, match="overlap"):
        ImplantPlan(target=t, alpha=0.5,
                    blocks=(b, BlockSpec(top=1, left=1, height=2, width=2)))
    with pytest.raises(ValueError):
        ImplantPlan(target=np.array([[1.0]]), alpha=0.5, blocks=(b,))


def test_ground_truth():
    mask = np.zeros((3, 4), dtype=bool)
    mask[1, 2] = True
    gt = GroundTruth(mask=mask, alpha=0.5)
    assert gt.count == 1
    with pytest.raises(ValueError):
        GroundTruth(mask=np.zeros((3, 4)), alpha=0.5)


def test_synth_background_rank_and_range():
    for rank in (1, 3, 5):
        cube = synth_background(12, 10, 20, rank, seed=rank)
        flat = cube.data.reshape(20, -1).T
        s = np.linalg.svd(flat, compute_uv=False)
        assert s[rank - 1] > 1e-10 * s[0]
        if s.size > rank:
            assert s[rank] <= 1e-10 * s[0]
        assert flat.min() >= 0.0
        assert flat.max() == pytest.approx(1.0)


def test_synth_background_deterministic():
    a = synth_background(8, 8, 12, 3, seed=42)
    b = synth_background(8, 8, 12, 3, seed=42)
    c = synth_background(8, 8, 12, 3, seed=43)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_synth_background_rank_bounds():
    with pytest.raises(DataError):
        synth_background(2, 2, 10, 5, seed=0)
    with pytest.raises(DataError):
        synth_background(4, 4, 3, 4, seed=0)


def test_replicate_background_draws_from_samples():
    rng = np.random.default_rng(70)
    samples = rng.random((5, 9))
    cube = replicate_background(samples, 6, 7, seed=1)
    assert (cube.height, cube.width, cube.bands) == (6, 7, 9)
    rows = {tuple(s) for s in samples}
    for r in range(6):
        for c in range(7):
            assert tuple(cube.spectrum(r, c)) in rows
    again = replicate_background(samples, 6, 7, seed=1)
    np.testing.assert_array_equal(cube.data, again.data)


def test_replicate_background_validation():
    with pytest.raises(DataError):
        replicate_background(np.zeros((0, 5)), 2, 2, seed=0)
    with pytest.raises(DataError):
        replicate_background(np.array([[1.0, np.nan]]), 2, 2, seed=0)


def test_implant_replacement_model():
    rng = np.random.default_rng(71)
    bg = replicate_background(rng.random((3, 8)), 10, 10, seed=2)
    t = rng.random(8)
    block = BlockSpec(top=2, left=3, height=4, width=2)
    for alpha in (0.3, 1.0):
        out, gt = implant(bg, ImplantPlan(target=t, alpha=alpha,
                                          blocks=(block,)))
        assert gt.alpha == alpha
        assert gt.count == 8
        expected_mask = np.zeros((10, 10), dtype=bool)
        expected_mask[2:6, 3:5] = True
        np.testing.assert_array_equal(gt.mask, expected_mask)
        for r in range(10):
            for c in range(10):
                if expected_mask[r, c]:
                    want = alpha * t + (1.0 - alpha) * bg.spectrum(r, c)
                    np.testing.assert_array_equal(out.spectrum(r, c), want)
                else:
                    np.testing.assert_array_equal(out.spectrum(r, c),
                                                  bg.spectrum(r, c))
    # alpha = 1 replaces outright
    out, _ = implant(bg, ImplantPlan(target=t, alpha=1.0, blocks=(block,)))
    np.testing.assert_array_equal(out.spectrum(3, 4), t)


def test_implant_bounds_and_bands():
    rng = np.random.default_rng(72)
    bg = replicate_background(rng.random((2, 5)), 4, 4, seed=3)
    with pytest.raises(DataError):
        implant(bg, ImplantPlan(target=np.ones(5), alpha=1.0,
                                blocks=(BlockSpec(top=3, left=0,
                                                  height=2, width=1),)))
    with pytest.raises(DataError):
        implant(bg, ImplantPlan(target=np.ones(6), alpha=1.0,
                                blocks=(BlockSpec(top=0, left=0,
                                                  height=1, width=1),)))


def test_add_noise():
    rng = np.random.default_rng(73)
    bg = replicate_background(rng.random((2, 5)), 20, 20, seed=4)
    assert add_noise(bg, 0.0, seed=5) is bg
    noisy = add_noise(bg, 0.01, seed=5)
    again = add_noise(bg, 0.01, seed=5)
    np.testing.assert_array_equal(noisy.data, again.data)
    delta = noisy.data - bg.data
    assert abs(delta.std() - 0.01) < 0.002
    with pytest.raises(DataError):
        add_noise(bg, -0.1, seed=5)


def test_convoy_layout():
    blocks = convoy_blocks(100, 100)
    assert len(blocks) == 7
    assert all(b.height == 6 and b.width == 3 for b in blocks)
    assert all(b.left == blocks[0].left for b in blocks)
    tops = [b.top for b in blocks]
    assert all(t2 - t1 == 12 for t1, t2 in zip(tops, tops[1:]))
    for i, a in enumerate(blocks):
        for b in blocks[i + 1:]:
            assert not a.overlaps(b)
    assert sum(b.height * b.width for b in blocks) == 126
    with pytest.raises(DataError):
        convoy_blocks(50, 100)


def test_paper_protocol_scene_family():
    scenes = paper_protocol(seed=11, height=80, width=30, bands=24,
                            alphas=(0.1, 1.0))
    assert [a for _, _, a in scenes] == [0.1, 1.0]
    (c1, g1, _), (c2, g2, _) = scenes
    np.testing.assert_array_equal(g1.mask, g2.mask)
    assert g1.count == 126
    off = ~g1.mask
    np.testing.assert_array_equal(c1.data[:, off], c2.data[:, off])
    assert not np.array_equal(c1.data[:, g1.mask], c2.data[:, g2.mask])
    # alpha = 1 pixels carry the advertised spectrum exactly
    t = protocol_target(11, bands=24)
    r, c = np.argwhere(g2.mask)[0]
    np.testing.assert_array_equal(c2.spectrum(r, c), t)


def test_paper_protocol_defaults():
    scenes = paper_protocol(seed=1, height=80, width=30, bands=16,
                            alphas=ALPHAS[:2])
    assert len(scenes) == 2
    assert ALPHAS == (0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0)


def test_paper_protocol_deterministic():
    a = paper_protocol(seed=9, height=80, width=30, bands=12, alphas=(0.5,))
    b = paper_protocol(seed=9, height=80, width=30, bands=12, alphas=(0.5,))
    np.testing.assert_array_equal(a[0][0].data, b[0][0].data)


def write_spec(tmp_path, body, name="scene.spec"):
    path = tmp_path / name
    path.write_text(body)
    return path


def test_parse_rank_spec(tmp_path):
    path = write_spec(tmp_path, """
# synthetic low-rank scene
height = 30
width = 30
bands = 50          # sensor channels
rank = 3
seed = 7
""")
    spec = parse_scene_spec(path)
    assert spec.kind == "rank"
    assert (spec.height, spec.width, spec.bands) == (30, 30, 50)
    assert spec.rank == 3 and spec.seed == 7
    assert spec.alphas == () and spec.blocks is None
    assert spec.noise_sigma == 0.0


def test_parse_protocol_spec(tmp_path):
    path = write_spec(tmp_path,
                      "height=100\nwidth=100\nbands=186\nprotocol=paper\n")
    spec = parse_scene_spec(path)
    assert spec.kind == "protocol"
    assert spec.alphas == ALPHAS


def test_parse_spec_blocks_and_alphas(tmp_path):
    target = tmp_path / "t.csv"
    save_spectra([SpectrumRecord(name="t", reflectance=np.ones(5))], target)
    path = write_spec(tmp_path, (
        "height=20\nwidth=20\nbands=5\nrank=2\n"
        "alphas=0.5,1.0\nblocks=2,3,4,2;10,10,2,2\ntarget=%s\n" % target))
    spec = parse_scene_spec(path)
    assert spec.alphas == (0.5, 1.0)
    assert spec.blocks == (BlockSpec(top=2, left=3, height=4, width=2),
                           BlockSpec(top=10, left=10, height=2, width=2))


def test_parse_spec_errors(tmp_path):
    target = tmp_path / "t.csv"
    save_spectra([SpectrumRecord(name="t", reflectance=np.ones(5))], target)
    base = "height=10\nwidth=10\nbands=5\n"
    cases = [
        ("rank=2\nbogus_key=1\n", "bogus_key"),
        ("rank=2\nrank=3\n", "duplicate"),
        ("rank=2\nnot a kv line\n", "key=value"),
        ("", "exactly one"),
        ("rank=2\nsamples=s.csv\n", "exactly one"),
        ("protocol=fancy\n", "paper"),
        ("protocol=paper\nblocks=convoy\n", "blocks"),
        ("rank=x\n", "integer"),
        ("rank=2\nalphas=0.5,oops\ntarget=%s\n" % target, "alphas"),
        ("rank=2\nalphas=0.5,2.0\ntarget=%s\n" % target, "alphas"),
        ("rank=2\nalphas=0.5\n", "target"),
        ("rank=2\nblocks=1,2\n", "blocks"),
        ("rank=2\nnoise_sigma=-1\n", "noise_sigma"),
    ]
    for i, (body, fragment) in enumerate(cases):
        path = write_spec(tmp_path, base + body, name="bad%d.spec" % i)
        with pytest.raises(DataError, match=fragment):
            parse_scene_spec(path)
    path = write_spec(tmp_path, "width=10\nbands=5\nrank=2\n", name="miss.spec")
    with pytest.raises(DataError, match="height"):
        parse_scene_spec(path)


def test_build_scenes_rank_plain(tmp_path):
    path = write_spec(tmp_path, "height=12\nwidth=10\nbands=8\nrank=2\nseed=3\n")
    scenes, target = build_scenes(parse_scene_spec(path))
    assert target is None
    assert len(scenes) == 1
    cube, gt, alpha = scenes[0]
    assert gt is None and alpha is None
    np.testing.assert_array_equal(cube.data,
                                  synth_background(12, 10, 8, 2, 3).data)


def test_build_scenes_with_implants(tmp_path):
    rng = np.random.default_rng(74)
    t = rng.random(8)
    tpath = tmp_path / "t.csv"
    save_spectra([SpectrumRecord(name="t", reflectance=t)], tpath)
    path = write_spec(tmp_path, (
        "height=12\nwidth=10\nbands=8\nrank=2\nseed=3\n"
        "alphas=1.0\nblocks=2,2,3,3\ntarget=%s\n" % tpath))
    scenes, target = build_scenes(parse_scene_spec(path))
    np.testing.assert_array_equal(target, t)
    cube, gt, alpha = scenes[0]
    assert alpha == 1.0 and gt.count == 9
    np.testing.assert_array_equal(cube.spectrum(2, 2), t)


def test_build_scenes_samples_kind(tmp_path):
    rng = np.random.default_rng(75)
    samples = rng.random((4, 6))
    spath = tmp_path / "s.csv"
    save_spectra([SpectrumRecord(name="s%d" % i, reflectance=s)
                  for i, s in enumerate(samples)], spath)
    path = write_spec(tmp_path,
                      "height=5\nwidth=5\nbands=6\nsamples=%s\nseed=2\n" % spath)
    scenes, _ = build_scenes(parse_scene_spec(path))
    cube = scenes[0][0]
    np.testing.assert_array_equal(
        cube.data, replicate_background(samples, 5, 5, 2).data)


def test_build_scenes_protocol_returns_target(tmp_path):
    path = write_spec(tmp_path, (
        "height=80\nwidth=30\nbands=16\nprotocol=paper\nseed=5\n"
        "alphas=1.0\n"))
    scenes, target = build_scenes(parse_scene_spec(path))
    assert len(scenes) == 1
    np.testing.assert_array_equal(target, protocol_target(5, bands=16))
    cube, gt, _ = scenes[0]
    r, c = np.argwhere(gt.mask)[0]
    np.testing.assert_array_equal(cube.spectrum(r, c), target)


def test_build_scenes_band_mismatch(tmp_path):
    tpath = tmp_path / "t.csv"
    save_spectra([SpectrumRecord(name="t", reflectance=np.ones(4))], tpath)
    path = write_spec(tmp_path, (
        "height=8\nwidth=8\nbands=6\nrank=2\nalphas=1.0\ntarget=%s\n" % tpath))
    with pytest.raises(DataError, match="bands"):
        build_scenes(parse_scene_spec(path))


def test_build_scenes_noise(tmp_path):
    body = "height=12\nwidth=10\nbands=8\nrank=2\nseed=3\n"
    clean, _ = build_scenes(parse_scene_spec(write_spec(tmp_path, body)))
    noisy, _ = build_scenes(parse_scene_spec(write_spec(
        tmp_path, body + "noise_sigma=0.01\n", name="noisy.spec")))
    assert not np.array_equal(clean[0][0].data, noisy[0][0].data)
    delta = noisy[0][0].data - clean[0][0].data
    assert abs(delta.std() - 0.01) < 0.005
    again, _ = build_scenes(parse_scene_spec(write_spec(
        tmp_path, body + "noise_sigma=0.01\n", name="noisy2.spec")))
    np.testing.assert_array_equal(noisy[0][0].data, again[0][0].data)
