import dataclasses
import filecmp
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bevboost.geometry import BevSpec, CameraRig, PosePlanar, derive_ground_homography, pose_to_bev_shift
from bevboost.presets import desk_rig, desk_spec
from bevboost.warp import valid_mask, warp_image
from bevboost.datasetforge import (
    BoxObject, EmptySequence, Illumination, SceneRandomization, SceneSpec, SequenceFrame,
    homography_ipm, layout, load_sequence, make_dataset, occlusion_mask, random_scene, render_bev_truth,
    render_layers, render_scene, split_of, stitch_labels,
)
from bevboost.datasetforge.io import (
    load_mask, load_png, read_manifest, read_poses, save_png, write_poses,
)
from bevboost.datasetforge.robotcar import check_layout, read_vo
from bevboost.datasetforge.scene import vehicle_path
from bevboost.datasetforge.stitch import frame_band

from oracles import first_hit

RIG, SPEC = desk_rig(), desk_spec()


def _static(seed):
    scene, _ = random_scene(np.random.default_rng(seed))
    return dataclasses.replace(scene, objects=(), illumination=Illumination())


def _frames(scene, spacing, n, quantized=False):
    out = []
    for t in range(n):
        pose = PosePlanar(*vehicle_path(scene, spacing * t))
        img = render_scene(scene, RIG, pose, frame_index=t)
        if quantized:
            img = np.rint(img * 255) / 255
        out.append(SequenceFrame(img, pose, t / 10))
    return out


# -- scenes and renders ------------------------------------------------------

def test_blank_scene_is_uniform_texture():
    scene = SceneSpec(road_half_width=100.0, lane_count=1, solid_edges=False)
    bev = render_bev_truth(scene, SPEC)
    base = np.asarray(scene.asphalt)
    assert np.abs(bev / base - 1).max() < 0.15
    assert bev.std(axis=(0, 1)).max() < 0.03


@settings(max_examples=20, deadline=None)
@given(st.floats(5.0, 15.0))
def test_stop_line_row(x_stop):
    scene = SceneSpec(road_half_width=100.0, lane_count=1, solid_edges=False, stop_line_x=x_stop)
    bev = render_bev_truth(scene, SPEC).mean(axis=-1)
    row = math.floor((SPEC.x_max - x_stop) / SPEC.mpp)
    centre = bev[:, SPEC.width // 2]
    assert centre[row] > 0.85
    assert centre[row - 4] < 0.5 and centre[row + 4] < 0.5
    assert int(np.argmax(centre)) in (row - 1, row, row + 1)


def test_nadir_render_is_affine_view():
    rig = CameraRig(fx=80, fy=80, cx=31.5, cy=23.5, width=64, height=48, cam_height=6.0, pitch=math.pi / 2)
    scene = SceneSpec(road_half_width=3.0, lane_count=2)
    xy = render_layers(scene, rig)["ground_xy"]
    vv, uu = np.mgrid[0:48, 0:64].astype(float)
    design = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)], axis=1)
    for k in range(2):
        coef, *_ = np.linalg.lstsq(design, xy[..., k].ravel(), rcond=None)
        assert np.abs(design @ coef - xy[..., k].ravel()).max() < 1e-9
    img = render_scene(scene, rig, ss=1, illumination=False)
    np.testing.assert_allclose(img, layout(scene, xy[..., 0], xy[..., 1]), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_cross_render_consistency(seed):
    scene, _ = random_scene(np.random.default_rng(seed))
    frontal = render_scene(scene, RIG, illumination=False)
    mask = valid_mask(RIG.height, RIG.width, derive_ground_homography(RIG, SPEC), SPEC.height, SPEC.width)
    mask &= ~occlusion_mask(scene, RIG, SPEC)
    err = np.abs(homography_ipm(frontal, RIG, SPEC) - render_bev_truth(scene, SPEC)).mean(axis=-1)
    assert err[mask].mean() < 0.02


def test_ray_order_probe():
    boxes = (BoxObject(x=8.0, y=2.0, length=3.0, width=1.6, height=1.4, color=(0.9, 0.1, 0.1)),
             BoxObject(x=12.0, y=1.0, length=2.0, width=1.5, height=2.5, color=(0.1, 0.2, 0.9)))
    plain = SceneSpec(road_half_width=6.0)
    scene = dataclasses.replace(plain, objects=boxes)
    ids = render_layers(scene, RIG)["object_id"]
    rng = np.random.default_rng(3)
    picks = []
    for want in (0, 1, -1):
        rr, cc = np.nonzero(ids == want)
        sel = rng.choice(len(rr), size=7 if want >= 0 else 6, replace=False)
        picks += [(cc[i], rr[i]) for i in sel]
    bounds = [scene.box_bounds(b, 0) for b in boxes]
    for u, v in picks:
        oracle = first_hit(RIG.fx, RIG.fy, RIG.cx, RIG.cy, RIG.cam_height, RIG.pitch, u, v, bounds)
        assert ids[v, u] == oracle, (u, v)
    # the box changes exactly the pixels whose rays reach it first
    with_box = render_scene(scene, RIG, ss=1, illumination=False)
    without = render_scene(plain, RIG, ss=1, illumination=False)
    changed = np.any(with_box != without, axis=-1)
    np.testing.assert_array_equal(changed, ids >= 0)


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneSpec(road_half_width=3.0, objects=(BoxObject(x=8, y=5.0, length=2, width=1, height=1),))
    with pytest.raises(ValueError):
        SceneSpec(lane_count=0)


def test_scene_dict_round_trip():
    scene, _ = random_scene(np.random.default_rng(7), SceneRandomization(object_prob=1.0, overexposure_prob=1.0))
    import json
    again = SceneSpec.from_dict(json.loads(json.dumps(scene.to_dict())))
    assert again == scene


def test_random_objects_stay_clear_of_ego_corridor():
    for seed in range(30):
        scene, speed = random_scene(np.random.default_rng(seed), SceneRandomization(object_prob=1.0))
        for box in scene.objects:
            for t in range(12):
                x0, x1, y0, y1, _, _ = scene.box_bounds(box, t)
                for x in np.linspace(x0, x1, 5):
                    _, py, _ = vehicle_path(scene, x)
                    assert y1 < py - 0.9 or y0 > py + 0.9  # half a vehicle width


# -- stitching ----------------------------------------------------------------

def test_single_frame_is_banded_ipm():
    scene = _static(0)
    frame = SequenceFrame(render_scene(scene, RIG), PosePlanar(0, 0, 0))
    res = stitch_labels([frame], RIG, SPEC, trust_depth=6.0)
    ipm = homography_ipm(frame.image, RIG, SPEC)
    x, _ = SPEC.pixel_centers()
    band = (x >= SPEC.x_min) & (x <= SPEC.x_min + 6.0)
    visible = valid_mask(RIG.height, RIG.width, derive_ground_homography(RIG, SPEC), SPEC.height, SPEC.width)
    np.testing.assert_array_equal(res.coverage, band & visible)
    np.testing.assert_allclose(res.label[res.coverage], ipm[res.coverage], atol=1e-12)
    assert not res.label[~res.coverage].any()


@pytest.mark.parametrize("seed", range(3))
def test_two_frame_stitch_matches_truth(seed):
    scene = _static(seed)
    frames = _frames(scene, 5.0, 2)
    res = stitch_labels(frames, RIG, SPEC)
    truth = render_bev_truth(scene, SPEC)
    assert np.abs(res.label - truth).mean(axis=-1)[res.coverage].mean() < 0.02


def test_moving_box_is_ghosted():
    box = BoxObject(x=8.0, y=3.0, length=3.0, width=1.6, height=1.5, color=(0.95, 0.05, 0.05), vx=1.2)
    scene = SceneSpec(road_half_width=6.0, objects=(box,))
    frames = _frames(scene, 1.5, 11)
    res = stitch_labels(frames, RIG, SPEC)
    red = (res.label[..., 0] > 0.6) & (res.label[..., 1] < 0.3) & (res.label[..., 2] < 0.3)
    occluded0 = occlusion_mask(scene, RIG, SPEC)
    # the label shows the box where frame 0 saw open road
    assert (red & res.coverage & ~occluded0).sum() > 50
    truth = render_bev_truth(scene, SPEC)
    assert not ((truth[..., 0] > 0.6) & (truth[..., 1] < 0.3)).any()


def test_overwrite_semantics_last_writer_wins():
    scene = _static(1)
    frames = _frames(scene, 1.5, 8)
    res = stitch_labels(frames, RIG, SPEC)
    h = derive_ground_homography(RIG, SPEC)
    x0, y0 = SPEC.pixel_centers()
    expected_writer = np.full(res.writer.shape, -1)
    for t, fr in enumerate(frames):
        # frame-0 ground point expressed in frame t
        c, s = math.cos(fr.pose.yaw), math.sin(fr.pose.yaw)
        dx, dy = x0 - fr.pose.x, y0 - fr.pose.y
        xt, yt = c * dx + s * dy, -s * dx + c * dy
        cols = SPEC.width / 2 - yt / SPEC.mpp - 0.5
        rows = (SPEC.x_max - xt) / SPEC.mpp - 0.5
        pw = h[2, 0] * cols + h[2, 1] * rows + h[2, 2]
        u = (h[0, 0] * cols + h[0, 1] * rows + h[0, 2]) / pw
        v = (h[1, 0] * cols + h[1, 1] * rows + h[1, 2]) / pw
        covers = ((xt >= SPEC.x_min - 1e-9) & (xt <= SPEC.x_min + 6.0 + 1e-9) & (np.abs(yt) <= SPEC.y_half)
                  & (u >= 0) & (u <= RIG.width - 1) & (v >= 0) & (v <= RIG.height - 1))
        expected_writer[covers] = t
        back = np.linalg.inv(pose_to_bev_shift(fr.pose, SPEC))
        warped = warp_image(fr.image, h @ back, SPEC.height, SPEC.width)
        mine = res.writer == t
        np.testing.assert_array_equal(res.label[mine], warped[mine])
    agree = (expected_writer == res.writer).mean()
    assert agree > 0.999  # only pixels within round-off of a band edge may differ


def test_suffix_consistency():
    scene = _static(2)
    frames = _frames(scene, 1.5, 8)
    full = stitch_labels(frames, RIG, SPEC)
    for k in range(1, len(frames)):
        part = stitch_labels(frames[k:], RIG, SPEC)
        if part.coverage.any():
            assert np.abs(part.label - full.label).mean(axis=-1)[part.coverage].mean() < 1e-3


def test_coverage_monotone():
    scene = _static(3)
    frames = _frames(scene, 1.5, 9)
    prev = np.zeros((SPEC.height, SPEC.width), bool)
    for k in range(1, len(frames) + 1):
        cov = stitch_labels(frames[:k], RIG, SPEC).coverage
        assert not (prev & ~cov).any()
        prev = cov


def test_stops_at_far_edge():
    scene = _static(4)
    frames = _frames(scene, 4.0, 3) + [SequenceFrame(np.ones((96, 128, 3)), PosePlanar(16.0, 0, 0))]
    res = stitch_labels(frames, RIG, SPEC)
    assert res.n_used == 3 and res.writer.max() <= 2


def test_slope_drift_grows_with_lateral_offset():
    wide = CameraRig(fx=40, fy=40, cx=63.5, cy=47.5, width=128, height=96, cam_height=1.5, pitch=0.35)
    spec = BevSpec()
    x, y = spec.pixel_centers()

    def drift(slope, y_abs):
        scene = SceneSpec(road_half_width=12.0, lateral_slope=slope)
        frames = [SequenceFrame(np.nan_to_num(render_layers(scene, wide, p)["ground_xy"]), p)
                  for p in (PosePlanar(1.5 * t, 0, 0) for t in range(11))]
        res = stitch_labels(frames, wide, spec)
        sel = res.coverage & (np.abs(np.abs(y) - y_abs) < spec.mpp / 2 + 1e-9)
        return np.abs(res.label[..., 1][sel] - y[sel]).mean()

    slope = math.radians(3.0)
    assert drift(slope, 8.0) > drift(slope, 1.0)
    assert drift(slope, 8.0) > 1.0
    assert drift(0.0, 8.0) < 0.05


def test_stitch_errors():
    with pytest.raises(EmptySequence):
        stitch_labels([], RIG, SPEC)
    img = np.zeros((96, 128, 3))
    with pytest.raises(ValueError):
        stitch_labels([SequenceFrame(img, PosePlanar(0, 0, 0))], RIG, SPEC, trust_depth=17.0)
    with pytest.raises(ValueError):
        stitch_labels([SequenceFrame(img, PosePlanar(2, 0, 0)), SequenceFrame(img, PosePlanar(1, 0, 0))], RIG, SPEC)


def test_frame_band_identity():
    band = frame_band(SPEC, np.eye(3), 6.0)
    x, _ = SPEC.pixel_centers()
    np.testing.assert_array_equal(band, (x >= 4.0) & (x <= 10.0))


# -- files --------------------------------------------------------------------

def test_png_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (5, 7, 3)) / 255.0
    save_png(tmp_path / "a.png", img)
    np.testing.assert_array_equal(load_png(tmp_path / "a.png"), img)
    mask = np.random.default_rng(1).random((5, 7)) > 0.5
    save_png(tmp_path / "m.png", mask)
    np.testing.assert_array_equal(load_mask(tmp_path / "m.png"), mask)


def test_pose_csv_round_trip(tmp_path):
    poses = [PosePlanar(0, 0, 0), PosePlanar(1.2345678901234, -0.1, 0.0123456789)]
    write_poses(tmp_path / "p.csv", poses, [0.0, 0.1])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "frame,x,y,yaw,timestamp"
    back, stamps = read_poses(tmp_path / "p.csv")
    assert back == poses and stamps == [0.0, 0.1]


def test_empty_dataset(tmp_path):
    assert make_dataset(0, tmp_path / "ds", workers=1) == []
    files = sorted(p.name for p in (tmp_path / "ds").iterdir())
    assert files == ["manifest.jsonl"]
    assert (tmp_path / "ds" / "manifest.jsonl").read_text() == ""


def _tree(root):
    return sorted(str(p.relative_to(root)) for p in Path(root).rglob("*") if p.is_file())


def test_dataset_is_byte_identical_across_runs_and_workers(tmp_path):
    make_dataset(3, tmp_path / "a", seed=5, workers=1)
    make_dataset(3, tmp_path / "b", seed=5, workers=2)
    names = _tree(tmp_path / "a")
    assert names == _tree(tmp_path / "b")
    for n in names:
        assert filecmp.cmp(tmp_path / "a" / n, tmp_path / "b" / n, shallow=False), n
    make_dataset(3, tmp_path / "c", seed=6, workers=1)
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() != (tmp_path / "c" / "manifest.jsonl").read_bytes()


def test_manifest_contents_and_restitch(tmp_path):
    records = make_dataset(2, tmp_path, seed=1, workers=1)
    manifest = tmp_path / "manifest.jsonl"
    assert read_manifest(manifest) == records
    rec = records[0]
    for key in ("label", "truth", "ipm", "coverage", "occlusion", "poses", "scene_spec"):
        assert (tmp_path / rec[key]).exists()
    frames = load_sequence(manifest, rec)
    res = stitch_labels(frames, CameraRig(**rec["rig"]), BevSpec(**rec["bev"]), rec["trust_depth"])
    save_png(tmp_path / "again.png", res.label)
    assert (tmp_path / "again.png").read_bytes() == (tmp_path / rec["label"]).read_bytes()


def test_split_rule():
    assert [split_of(i) for i in range(10)] == ["train"] * 9 + ["test"]


def test_robotcar_stub(tmp_path):
    with pytest.raises(FileNotFoundError):
        check_layout(tmp_path)
    (tmp_path / "vo").mkdir()
    (tmp_path / "vo" / "vo.csv").write_text(
        "source_timestamp,destination_timestamp,x,y,z,roll,pitch,yaw\n"
        "200,100,1.0,0.0,0,0,0,0.5\n300,200,1.0,0.0,0,0,0,0.0\n")
    chain = read_vo(tmp_path / "vo" / "vo.csv")
    assert [ts for ts, _ in chain] == [100, 200, 300]
    last = chain[-1][1]
    assert last.x == pytest.approx(1 + math.cos(0.5)) and last.y == pytest.approx(math.sin(0.5))
