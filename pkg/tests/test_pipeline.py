import json
import warnings

import numpy as np
import pytest

from gsclosure.pipeline import (PipelineConfig, load_config, Proposal,
                                rescore_proposals, refine_box, box_objective,
                                ClosurePipeline, run_pipeline)
from gsclosure.pipeline.config import read_config_text
from gsclosure.boxes import OrientedBox, Detection, iou_3d
from gsclosure.synthetic import (SurfaceSpec, Hemisphere,
                                 gen_primitive_surface, gen_benchmark_scene)
from gsclosure.surface import SurfaceElements
from gsclosure.evaluation import average_precision
from gsclosure.exceptions import ConfigError, NoSupportWarning


EMPTY_SPACE = OrientedBox((10., 10., 10.), (1., 1., 1.))


def test_config_defaults():
    config = PipelineConfig()
    assert config.gamma == 0.5
    assert config.nms_iou == 0.25
    assert config.opacity_min == 0.3
    assert config.alpha == 0.1
    assert config.yaw_step == pytest.approx(np.radians(2.))


@pytest.mark.parametrize("field, value", [
    ("gamma", 0.), ("gamma", 1.5), ("min_support", -1), ("nms_iou", 2.),
    ("orientation", "up"), ("iou_mode", "bev"), ("coverage_weight", 1.1),
    ("cluster_margin", 0.5), ("opacity_min", -0.1),
])
def test_config_rejects_out_of_range(field, value):
    with pytest.raises(ConfigError):
        PipelineConfig(**{field: value})


def test_config_replace_ignores_none():
    config = PipelineConfig().replace(gamma=0.25, nms_iou=None)
    assert config.gamma == 0.25
    assert config.nms_iou == 0.25
    assert config == PipelineConfig(gamma=0.25)


def test_config_from_dict():
    config = PipelineConfig.from_dict({
        "gamma": 0.8, "refine": {"enabled": True, "max_sweeps": 5}})
    assert config.gamma == 0.8
    assert config.refine
    assert config.max_sweeps == 5

    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"gama": 0.8})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"refine": {"speed": 1}})


def test_config_file_overrides_base(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"nms_iou": 0.5}))

    config = load_config(str(path), base=PipelineConfig(gamma=0.9))
    assert config.nms_iou == 0.5
    assert config.gamma == 0.9


def test_config_toml():
    record = read_config_text('gamma = 0.3\n[refine]\nenabled = true\n',
                              ".toml")
    assert PipelineConfig.from_dict(record) == PipelineConfig(gamma=0.3,
                                                              refine=True)
    with pytest.raises(ConfigError):
        read_config_text("gamma = ", ".toml")


def test_config_invalid_json():
    with pytest.raises(ConfigError):
        read_config_text("{", ".json")


def test_rescore_closed_sphere_keeps_score(unit_sphere):
    elements, box = unit_sphere
    (proposal,) = rescore_proposals([Proposal(box, 0.8)], elements)

    assert proposal.report.enclosed_count == len(elements)
    assert proposal.closure_score == pytest.approx(1., abs=1e-2)
    assert proposal.final_score == pytest.approx(0.8, abs=1e-2)


def test_rescore_open_hemisphere():
    elements, analytic, box = gen_primitive_surface(
        SurfaceSpec(Hemisphere(1.), 10000))
    (proposal,) = rescore_proposals([Proposal(box, 0.6)], elements,
                                    PipelineConfig(gamma=0.5))

    expected = np.exp(-0.5 * abs(proposal.report.flux))
    assert proposal.closure_score == pytest.approx(expected)
    assert proposal.closure_score == pytest.approx(0.404, abs=2e-3)
    assert proposal.final_score == pytest.approx(0.6 * expected)


def test_rescore_empty_box_is_gated(unit_sphere):
    elements, _ = unit_sphere
    with pytest.warns(NoSupportWarning):
        (proposal,) = rescore_proposals([Proposal(EMPTY_SPACE, 0.9)],
                                        elements)

    assert proposal.report.flux == 0.
    assert proposal.closure_score == 1.
    assert proposal.final_score == 0.


def test_rescore_normalized_mode():
    elements, _, box = gen_primitive_surface(
        SurfaceSpec(Hemisphere(1.), 4000))
    config = PipelineConfig(use_normalized_flux=True, normalized_scale=10.)
    (proposal,) = rescore_proposals([Detection(box, 1.)], elements, config)

    kappa_flux = 10. * proposal.report.normalized_flux
    assert proposal.closure_score == pytest.approx(np.exp(-0.5 * kappa_flux))


def test_rescore_without_closure(unit_sphere):
    elements, box = unit_sphere
    config = PipelineConfig(use_closure=False)
    (proposal,) = rescore_proposals([box], elements, config)

    assert proposal.closure_score == 1.
    assert proposal.final_score == 1.


def test_rescore_orders_by_final_score():
    elements, _, box = gen_primitive_surface(
        SurfaceSpec(Hemisphere(1.), 2000))
    far = OrientedBox((5., 0., 0.), (1., 1., 1.))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoSupportWarning)
        proposals = rescore_proposals(
            [Proposal(far, 0.9), Proposal(box, 0.5), Proposal(box, 0.7)],
            elements)

    assert [p.base_score for p in proposals] == [0.7, 0.5, 0.9]


def test_refine_keeps_tight_box(unit_sphere):
    elements, box = unit_sphere
    refined, info = refine_box(box, elements, return_info=True)

    assert refined == box
    assert info.n_steps == 0
    assert not info.noop


def test_refine_recovers_translation(unit_sphere):
    elements, box = unit_sphere
    shifted = OrientedBox(np.add(box.center, (0.2, 0., 0.)), box.size,
                          box.yaw)
    refined, info = refine_box(shifted, elements, return_info=True)

    assert iou_3d(refined, box) > iou_3d(shifted, box)
    assert info.objective >= info.initial_objective
    assert info.objective == pytest.approx(
        box_objective(refined, elements, cluster_box=shifted))


def test_refine_never_lowers_objective(random_state):
    scene = gen_benchmark_scene(n_objects=2, seed=4,
                                elements_per_object=1500)
    for box in scene.gt_boxes:
        noisy = OrientedBox(
            np.add(box.center, random_state.uniform(-0.04, 0.04, 3)),
            np.multiply(box.size, random_state.uniform(0.8, 1.2, 3)),
            box.yaw + random_state.uniform(-0.2, 0.2))
        before = box_objective(noisy, scene.elements)
        refined, info = refine_box(noisy, scene.elements,
                                   PipelineConfig(max_sweeps=10),
                                   return_info=True)

        assert info.initial_objective == pytest.approx(before)
        assert info.objective >= before
        assert box_objective(refined, scene.elements,
                             cluster_box=noisy) >= before


@pytest.mark.parametrize("seed", [0, 3, 7])
def test_refine_is_idempotent(seed):
    scene = gen_benchmark_scene(n_objects=1, seed=seed,
                                elements_per_object=2000)
    (gt,) = scene.gt_boxes
    random_state = np.random.RandomState(seed)
    moved = OrientedBox(
        np.add(gt.center, random_state.uniform(-0.05, 0.05, 3)),
        gt.size, gt.yaw)

    once = refine_box(moved, scene.elements)
    twice, info = refine_box(once, scene.elements, return_info=True)

    assert info.n_steps == 0
    assert twice == once
    assert abs(box_objective(twice, scene.elements)
               - box_objective(once, scene.elements)) <= 1e-6


def test_refine_empty_box_is_noop(unit_sphere):
    elements, _ = unit_sphere
    with pytest.warns(NoSupportWarning):
        refined, info = refine_box(EMPTY_SPACE, elements, return_info=True)

    assert refined == EMPTY_SPACE
    assert info.noop


def test_pipeline_ranks_objects_above_fragments():
    scene = gen_benchmark_scene(n_objects=3, n_fragments=3, seed=9,
                                elements_per_object=2000)
    candidates = [Detection(b, 0.5) for b in scene.fragment_boxes] \
        + [Detection(b, 0.5) for b in scene.gt_boxes]

    pipeline = ClosurePipeline(PipelineConfig(nms_iou=0.25))
    detections = pipeline.run(scene.elements, candidates)

    assert len(pipeline.proposals_) == 6
    assert len(detections) == 6
    top = [d.box for d in detections[:3]]
    assert sorted(map(tuple, (b.center for b in top))) == \
        sorted(map(tuple, (b.center for b in scene.gt_boxes)))


def test_pipeline_suppresses_duplicates(unit_sphere):
    elements, box = unit_sphere
    nudged = OrientedBox(np.add(box.center, (0.02, 0., 0.)), box.size)
    detections = run_pipeline(elements, [Detection(box, 0.9),
                                         Detection(nudged, 0.8)])
    assert len(detections) == 1
    assert detections[0].box == box


def test_pipeline_without_refinement_keeps_geometry():
    scene = gen_benchmark_scene(n_objects=3, seed=2, elements_per_object=800)
    candidates = [Detection(b.scaled(1.1), 0.7) for b in scene.gt_boxes]
    detections = run_pipeline(scene.elements, candidates,
                              PipelineConfig(refine=False))

    assert sorted(d.box for d in detections) == \
        sorted(c.box for c in candidates)
    for detection in detections:
        assert detection.report["base_score"] == 0.7
        assert 0. < detection.score <= 0.7


def test_pipeline_refinement_reports(unit_sphere):
    elements, box = unit_sphere
    shifted = OrientedBox(np.add(box.center, (0.2, 0., 0.)), box.size)
    pipeline = ClosurePipeline(PipelineConfig(refine=True))
    (detection,) = pipeline.run(elements, [Detection(shifted, 0.9)])

    assert len(pipeline.refine_info_) == 1
    assert iou_3d(detection.box, box) > iou_3d(shifted, box)


def test_pipeline_drops_unsupported():
    elements = SurfaceElements.empty()
    with pytest.warns(NoSupportWarning):
        detections = run_pipeline(elements, [Detection(EMPTY_SPACE, 1.)])
    assert detections == []


def test_pipeline_is_deterministic():
    scene = gen_benchmark_scene(n_objects=3, n_fragments=2, seed=6,
                                elements_per_object=600)
    candidates = [Detection(b, 0.5) for b in scene.gt_boxes
                  + scene.fragment_boxes]
    config = PipelineConfig(refine=True, max_sweeps=3)

    assert run_pipeline(scene.elements, candidates, config) == \
        run_pipeline(scene.elements, candidates, config)


def _shift(box, offset):
    return OrientedBox(np.add(box.center, (offset, 0., 0.)), box.size,
                       box.yaw)


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::gsclosure.exceptions.NoSupportWarning")
def test_objects_outrank_fragments_across_scenes(random_state):
    separated, base, rescored, truth = [], [], [], []
    for seed in range(50):
        scene = gen_benchmark_scene(n_objects=3, n_fragments=3, seed=seed,
                                    elements_per_object=2000)
        boxes = list(scene.gt_boxes) + list(scene.fragment_boxes)
        candidates = [Detection(boxes[i], 0.5)
                      for i in random_state.permutation(len(boxes))]

        proposals = rescore_proposals(candidates, scene.elements,
                                      PipelineConfig(gamma=0.5))
        objects = [p.final_score for p in proposals
                   if any(p.box == b for b in scene.gt_boxes)]
        fragments = [p.final_score for p in proposals
                     if not any(p.box == b for b in scene.gt_boxes)]
        separated.append(min(objects) > max(fragments))

        # scenes are pooled side by side, ten units apart
        offset = 10. * seed
        base.extend(Detection(_shift(c.box, offset), c.score)
                    for c in candidates)
        rescored.extend(Detection(_shift(p.box, offset), p.final_score)
                        for p in proposals)
        truth.extend(_shift(b, offset) for b in scene.gt_boxes)
    # end for

    assert np.mean(separated) >= 0.95
    assert average_precision(rescored, truth, 0.25) \
        > average_precision(base, truth, 0.25)


@pytest.mark.slow
def test_refine_improves_translated_boxes(random_state):
    improved = []
    for seed in range(100):
        scene = gen_benchmark_scene(n_objects=1, seed=seed,
                                    elements_per_object=2000)
        (gt,) = scene.gt_boxes
        radius = 0.5 * np.linalg.norm(gt.size)
        angle = random_state.uniform(-np.pi, np.pi)
        moved = OrientedBox(
            np.add(gt.center, 0.2 * radius * np.array(
                [np.cos(angle), np.sin(angle), 0.])), gt.size, gt.yaw)

        before = box_objective(moved, scene.elements)
        refined, info = refine_box(moved, scene.elements, return_info=True)

        assert info.objective >= before
        assert box_objective(refined, scene.elements,
                             cluster_box=moved) >= before
        improved.append(iou_3d(refined, gt) > iou_3d(moved, gt))
    # end for

    assert np.mean(improved) >= 0.95
