"""End-to-end acceptance checks for the toolkit.

Each test verifies one acceptance criterion at its stated tolerance and
prints a single PASS line (to the real stdout, so it survives capture)
once its assertions hold.
"""

import sys
import time

import numpy as np
import pytest
import torch

from oracles import adpit_total_bruteforce, assignment_bruteforce, random_event_labels
from seld3d.audio import AudioClip
from seld3d.features import assemble_features
from seld3d.filterbanks import (BANK_KINDS, design_bank, erb_bandwidth,
                                hz_to_bark, hz_to_mel)
from seld3d.labels import EventLabel, doa_to_cartesian
from seld3d.loss import adpit_loss
from seld3d.metrics import (DetectionEvent, MatchCounts, MetricsConfig,
                            angular_error, compute_report, decode_multi_accdoa,
                            evaluate, events_from_labels, match_and_count)
from seld3d.model import DTYPE, ModelConfig, build_model, param_count
from seld3d.targets import encode_targets
from seld3d.train import gradient_check, overfit_demo, toy_config


_CAPTURE = None


@pytest.fixture(autouse=True)
def _live_output(capfd):
    # remember the active capture fixture so _report can bypass it
    global _CAPTURE
    _CAPTURE = capfd
    yield
    _CAPTURE = None


def _report(criterion: int, detail: str) -> None:
    line = f"[criterion {criterion}] PASS: {detail}"
    if _CAPTURE is not None:
        with _CAPTURE.disabled():
            print(line, flush=True)
    else:
        print(line, file=sys.__stdout__, flush=True)


def _random_clip(seed=0):
    rng = np.random.default_rng(seed)
    return AudioClip(0.1 * rng.standard_normal((4, 24000)))


class TestCriterion1FeatureShape:
    def test_all_banks_give_expected_shape_quickly(self):
        clip = _random_clip()
        times = {}
        for kind in BANK_KINDS:
            bank = design_bank(kind)
            t0 = time.perf_counter()
            fmap = assemble_features(clip, bank=bank)
            times[kind] = time.perf_counter() - t0
            assert fmap.shape == (7, 100, 128), kind
            assert times[kind] < 1.0, (kind, times[kind])
        _report(1, "feature map (7, 100, 128) for mel/bark/gammatone, "
                   + ", ".join(f"{k} {v * 1e3:.0f} ms" for k, v in times.items()))


class TestCriterion2FilterBankInvariants:
    def test_scale_formula_spot_checks(self):
        assert hz_to_mel(1000.0) == pytest.approx(1000.0, rel=1e-3)
        assert hz_to_bark(1000.0) == pytest.approx(8.527, rel=1e-3)
        assert erb_bandwidth(1000.0) == pytest.approx(132.64, rel=1e-3)

    def test_randomized_invariants(self):
        rng = np.random.default_rng(2024)
        n_checked = 0
        for _ in range(20):
            f_min = float(rng.uniform(20.0, 300.0))
            f_max = float(rng.uniform(4000.0, 12000.0))
            n_bands = int(rng.integers(16, 129))
            for kind in BANK_KINDS:
                bank = design_bank(kind, n_bands=n_bands, f_min=f_min, f_max=f_max)
                w = bank.weights
                assert w.shape == (n_bands, 257)
                assert np.all(w >= 0.0), (kind, "nonnegativity")
                assert np.all(np.diff(bank.center_freqs) > 0), (kind, "monotone centers")
                # every analysis bin strictly inside (f_min, f_max) is covered
                freqs = np.arange(257) * (24000 / 512)
                interior = (freqs > f_min) & (freqs < f_max)
                assert np.all(w[:, interior].sum(axis=0) > 0), (kind, "bin coverage")
                n_checked += 1
        _report(2, f"{n_checked} randomized banks: nonnegative, monotone centers, "
                   "full bin coverage; scale spot checks within 1e-3")


class TestCriterion3LossOracle:
    def test_thousand_random_instances_match_bruteforce(self):
        rng = np.random.default_rng(3)
        max_err = 0.0
        for trial in range(1000):
            labels = random_event_labels(rng, n_events=int(rng.integers(0, 9)))
            _, aset = encode_targets(labels)
            pred = rng.standard_normal((4, 3, 13, 20))
            got = adpit_loss(pred, aset).total
            want = adpit_total_bruteforce(pred, aset)
            max_err = max(max_err, abs(got - want))
            assert max_err < 1e-9, trial
            perm = rng.permutation(3)
            assert adpit_loss(pred[:, perm], aset).total == pytest.approx(got, rel=1e-12)
        _report(3, f"1000 random instances match the enumeration oracle "
                   f"(max abs err {max_err:.2e} < 1e-9) and are track-permutation invariant")


class TestCriterion4MetricFixtures:
    @staticmethod
    def _event(frame, cls, az, el, dist):
        return DetectionEvent(frame, cls, doa_to_cartesian(az, el), dist)

    def test_fixtures_and_hungarian_oracle(self):
        # single true positive at 10 degrees, exact distance
        r = evaluate([self._event(0, 3, 0.0, 0.0, 2.0)],
                     [self._event(0, 3, 10.0, 0.0, 2.0)])
        assert r.f_20_1 == pytest.approx(100.0)
        assert r.ae == pytest.approx(10.0)
        assert r.rde == pytest.approx(0.0)

        # over-threshold match: scored F 0 but still localized at 25 degrees
        r = evaluate([self._event(0, 3, 0.0, 0.0, 2.0)],
                     [self._event(0, 3, 25.0, 0.0, 2.0)])
        assert r.f_20_1 == pytest.approx(0.0)
        assert r.ae == pytest.approx(25.0)

        # composite score endpoints: exactly 0 and exactly 1
        best = compute_report(MatchCounts(tp=5, n_matched=5, n_matched_dist=5, n_ref=5))
        worst = compute_report(MatchCounts(fp=5, fn=5, s=5, n_ref=5))
        assert best.seld_score == 0.0
        assert worst.seld_score == 1.0

        rng = np.random.default_rng(4)
        for frame in range(1000):
            n_r, n_p = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            refs = [self._event(0, 0, rng.uniform(-179, 179), rng.uniform(-89, 89), 1.0)
                    for _ in range(n_r)]
            preds = [self._event(0, 0, rng.uniform(-179, 179), rng.uniform(-89, 89), 1.0)
                     for _ in range(n_p)]
            counts = match_and_count(refs, preds)
            cost = np.array([[angular_error(a.doa, b.doa) for b in preds] for a in refs])
            best_cost, _ = assignment_bruteforce(cost)
            assert counts.sum_angles == pytest.approx(best_cost, rel=1e-12), frame
        _report(4, "single-TP and over-threshold fixtures exact; score endpoints 0/1; "
                   "matching equals brute force on 1000 random frames")


class TestCriterion5RoundTrip:
    def test_encode_decode_recovers_labels(self):
        labels = [EventLabel(2, 1, 0, 40.0, 10.0, 3.0),
                  EventLabel(2, 1, 1, -120.0, -30.0, 7.0),
                  EventLabel(9, 6, 0, 0.0, 60.0, 1.2),
                  EventLabel(15, 12, 0, 179.0, -85.0, 9.9)]
        target, _ = encode_targets(labels)
        decoded = decode_multi_accdoa(target)
        assert sorted((e.frame, e.class_id) for e in decoded) == \
            sorted((lab.frame, lab.class_id) for lab in labels)
        max_doa, max_dist = 0.0, 0.0
        for lab in labels:
            cands = [e for e in decoded if (e.frame, e.class_id) == (lab.frame, lab.class_id)]
            e = min(cands, key=lambda e: abs(e.distance - lab.distance))
            doa_err = np.linalg.norm(e.doa - doa_to_cartesian(lab.azimuth, lab.elevation))
            max_doa = max(max_doa, doa_err)
            max_dist = max(max_dist, abs(e.distance - lab.distance))
        assert max_doa < 1e-6
        assert max_dist < 1e-5
        _report(5, f"encode/decode round trip exact on classes and frames; "
                   f"DOA err {max_doa:.1e} < 1e-6, distance err {max_dist:.1e} m < 1e-5")


class TestCriterion6GradientCheck:
    def test_central_differences_on_toy_config(self):
        t0 = time.perf_counter()
        result = gradient_check(toy_config(), n_samples=200, h=1e-4, seed=0)
        elapsed = time.perf_counter() - t0
        assert result["n_checked"] >= 200
        assert result["max_rel_err"] < 1e-4, result
        assert elapsed < 120.0, elapsed
        _report(6, f"{result['n_checked']} sampled parameters, max relative error "
                   f"{result['max_rel_err']:.2e} < 1e-4 in {elapsed:.1f} s")


class TestCriterion7OverfitDemo:
    def test_loss_drops_to_tenth_deterministically(self):
        t0 = time.perf_counter()
        trace = overfit_demo(toy_config(), steps=500, lr=1e-2, seed=0)
        elapsed = time.perf_counter() - t0
        ratio = trace[-1] / trace[0]
        assert ratio <= 0.1, ratio
        assert elapsed < 300.0, elapsed
        repeat = overfit_demo(toy_config(), steps=60, lr=1e-2, seed=0)
        np.testing.assert_array_equal(repeat, trace[:60])
        _report(7, f"500 plain-GD steps: loss {trace[0]:.4f} -> {trace[-1]:.4f} "
                   f"(ratio {ratio:.3f} <= 0.1) in {elapsed:.0f} s; trace reproducible")


class TestCriterion8ParamBudget:
    def test_default_count_window_and_ordering(self):
        full = param_count(ModelConfig())
        ablated = param_count(ModelConfig(use_scconv=False))
        assert 430_000 <= full <= 710_000, full
        assert full > ablated, (full, ablated)
        _report(8, f"default model {full:,} params in [430k, 710k]; "
                   f"without SCConv {ablated:,} (strictly fewer)")


class TestCriterion9Determinism:
    def test_pipeline_twice_is_bit_identical(self):
        def run():
            clip = _random_clip(seed=99)
            fmap = assemble_features(clip, bank=design_bank("mel"))
            model = build_model(toy_config(seed=0))
            with torch.no_grad():
                pred = model(torch.from_numpy(fmap[None]).to(DTYPE)).numpy()[0]
            refs = events_from_labels([EventLabel(3, 5, 0, 40.0, 10.0, 2.5)])
            preds = decode_multi_accdoa(pred, MetricsConfig())
            report = compute_report(match_and_count(refs, preds), MetricsConfig())
            return fmap, pred, report.to_dict()

        fmap_a, pred_a, report_a = run()
        fmap_b, pred_b, report_b = run()
        assert np.array_equal(fmap_a, fmap_b)
        assert np.array_equal(pred_a, pred_b)
        assert report_a == report_b
        _report(9, "features -> forward -> metrics twice with one seed: "
                   "bit-identical feature map, prediction, and report")
