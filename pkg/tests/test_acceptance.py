"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
figures before asserting, so the outcome is visible in ``pytest -v`` logs.
"""
import itertools
import time
from math import comb

import numpy as np
import pytest

from liplive.carrier import count_valid_tuples, draw_carriers
from liplive.demodulation import demodulate, estimate_displacement
from liplive.harness.dataset import generate_dataset
from liplive.harness.evaluation import evaluate_dataset
from liplive.harness.metrics import auc_trapezoid, eer_from_roc, roc_points
from liplive.harness.pipeline import (PipelineConfig, consistency_vector,
                                      enrollment_vector, gated_fragments, motion_signal,
                                      run_detection)
from liplive.harness.training import lip_fragments, noise_fragments
from liplive.interference import eliminate_static
from liplive.segmentation import segment_characters
from liplive.simulator import (PathModel, Scene, SpeakerParams, _static_paths, body_clutter_path,
                               make_attack_scene, make_genuine_scene, make_lip_path,
                               make_trajectory, random_speaker, simulate, speaker_population)
from liplive.verification.motion_net import (cnn_shapes, forward, init_params, loss_and_grads,
                                             train_motion_verifier, verify_motion)
from liplive.verification.profile import enroll, verify_consistency

CFG = PipelineConfig()
SOUND = 343.0


@pytest.fixture
def check(capsys):
    def _check(n, ok, detail, elapsed=None, limit=None):
        ok = bool(ok) and (limit is None or elapsed < limit)
        t = "" if elapsed is None else f" [{elapsed:.1f}s / limit {limit:.0f}s]"
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}{t}")
        assert ok, detail
    return _check


def test_criterion_01_carrier_count(check):
    t = time.perf_counter()
    full = count_valid_tuples(3, (18000, 21000), 300, 1)
    brute = [(count_valid_tuples(3, (0, hi), gap, 1),
              sum(1 for c in itertools.combinations(range(hi + 1), 3)
                  if c[1] - c[0] >= gap and c[2] - c[1] >= gap))
             for hi, gap in ((60, 10), (90, 30), (45, 3))]
    el = time.perf_counter() - t
    ok = full == 2_309_764_401 == comb(2403, 3) and all(a == b for a, b in brute)
    check(1, ok, f"count {full:,}, shrunken bands {brute}", el, 1)


def test_criterion_02_doppler(check):
    t = time.perf_counter()
    worst = 0.0
    for seed, v in ((0, 0.12), (1, 0.05), (2, -0.2)):
        c = draw_carriers(seed)
        # reflector moving at v changes the round-trip path at 2v
        sc = Scene([PathModel("body-clutter", 0.2, 2.0, velocity_mps=2 * v)], c, -90,
                   "visual-only", 3.0)
        fr = demodulate(simulate(sc), c)
        for k, f in enumerate(c.frequencies_hz):
            z = fr.complex[k] - fr.complex[k].mean()
            n = z.size * 32
            mag = np.abs(np.fft.fft(z * np.hanning(z.size), n))
            peak = abs(np.fft.fftfreq(n, 1 / fr.baseband_rate_hz)[mag.argmax()])
            worst = max(worst, abs(peak - 2 * f * abs(v) / SOUND))
    el = time.perf_counter() - t
    check(2, worst <= 0.5, f"max |peak - 2 f v / c| = {worst:.4f} Hz (tol 0.5)", el, 10)


def test_criterion_03_displacement(check):
    t = time.perf_counter()
    errs = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        sp = SpeakerParams(peak_open_mm=3.0, modulation_depth=0.0)
        traj = make_trajectory(4, sp, rng, jitter=0)
        c = draw_carriers(seed)
        lip = make_lip_path(traj, rng, sway_mm=0)
        for paths, mode in (([lip], "none"), (_static_paths(rng) + [lip], "circle")):
            sc = Scene(paths, c, -90, "genuine", round(traj.end_s + 0.4, 3))
            fr = demodulate(simulate(sc), c)
            d = estimate_displacement(fr, remove_static=mode)
            gt = traj.displacement_mm(fr.times)
            est = d.displacement_mm - np.mean(d.displacement_mm - gt)
            errs.append(float(np.sqrt(np.mean((est - gt) ** 2))))
    el = time.perf_counter() - t
    check(3, max(errs) <= 0.3, f"max RMS error {max(errs):.4f} mm on 3 mm pulses (tol 0.3)", el, 10)


def test_criterion_04_static_elimination(check):
    t = time.perf_counter()
    rng = np.random.default_rng(44)
    ratios = []
    for seed in range(8):
        sc = make_genuine_scene(4, random_speaker(rng), seed=100 + seed, body_clutter=bool(seed % 2))
        m = eliminate_static(demodulate(simulate(sc), sc.carriers), CFG.detrend_window_s)
        tt, x = m.times, m.channels
        motion = np.zeros(tt.size, bool)
        quiet = (tt > tt[0] + 0.25) & (tt < tt[-1] - 0.25)
        for a, b in sc.trajectory().boundaries():
            motion |= (tt >= a) & (tt <= b)
            quiet &= ~((tt >= a - 0.05) & (tt <= b + 0.05))
        ratios.append(np.sqrt(np.mean(x[:, quiet] ** 2)) / np.sqrt(np.mean(x[:, motion] ** 2)))
    el = time.perf_counter() - t
    check(4, max(ratios) < 0.05, f"max quiet/motion RMS {max(ratios):.4f} (tol 0.05)", el, 10)


def test_criterion_05_dynamic_elimination(check):
    t = time.perf_counter()
    worst, dops = -np.inf, []
    for seed in range(6):
        c = draw_carriers(seed)
        p = body_clutter_path(c, np.random.default_rng(seed), 3.0, amplitude=0.2)
        fr = demodulate(simulate(Scene([p], c, -np.inf, "visual-only", 3.0)), c)
        dops += [abs(p.velocity_mps) * f / SOUND for f in c.frequencies_hz]
        level = np.sqrt(np.mean(np.abs(fr.complex) ** 2, axis=1)) / (0.2 * c.amplitude / 2)
        worst = max(worst, float(np.max(20 * np.log10(level))))
    el = time.perf_counter() - t
    ok = worst <= -40 and 50 <= min(dops) and max(dops) <= 200
    check(5, ok, f"Doppler {min(dops):.0f}-{max(dops):.0f} Hz, worst residual {worst:.1f} dB "
                 "(tol -40)", el, 10)


def test_criterion_06_segmentation(check):
    t = time.perf_counter()
    rng = np.random.default_rng(6)
    hit = total = 0
    for seed in range(100):
        sc = make_genuine_scene(4, random_speaker(rng), seed=6000 + seed, body_clutter=bool(seed % 2))
        m = eliminate_static(demodulate(simulate(sc), sc.carriers), CFG.detrend_window_s)
        frags = segment_characters(m, CFG.segmentation, 4)
        gt = sc.trajectory().boundaries()
        total += 2 * len(gt)
        if len(frags) == len(gt):       # a count mismatch misses every boundary of the scene
            for f, (a, b) in zip(frags, gt):
                hit += (abs(f.start_s - a) <= 0.05) + (abs(f.end_s - b) <= 0.05)
    zero = 0
    for seed in range(100):
        sc = make_attack_scene("visual", seed=6500 + seed)
        m = eliminate_static(demodulate(simulate(sc), sc.carriers), CFG.detrend_window_s)
        zero += len(segment_characters(m, CFG.segmentation, 4)) == 0
    el = time.perf_counter() - t
    acc = hit / total
    check(6, acc >= 0.95 and zero >= 99,
          f"boundaries within 50 ms {acc:.3f} (tol 0.95); visual-only empty {zero}/100 (tol 99)",
          el, 120)


def test_criterion_07_motion_verifier(check):
    t = time.perf_counter()
    pos, neg = lip_fragments(500, 71), noise_fragments(500, 72)
    model = train_motion_verifier(pos, neg, seed=7)
    tp, tn = lip_fragments(150, 171), noise_fragments(150, 172)
    acc = (np.sum(model.probabilities(tp) > 0.5) + np.sum(model.probabilities(tn) <= 0.5)) / 300

    rng = np.random.default_rng(7)
    p = init_params(7)
    x = rng.standard_normal((2, 6, 128))
    y = np.array([1, 0])
    _, g = loss_and_grads(p, x, y)
    worst = 0.0
    for name in sorted(p):
        idx = np.unravel_index(int(np.argmax(np.abs(g[name]))), g[name].shape)
        old = p[name][idx]
        p[name][idx] = old + 1e-5
        lp, _ = loss_and_grads(p, x, y)
        p[name][idx] = old - 1e-5
        lm, _ = loss_and_grads(p, x, y)
        p[name][idx] = old
        num = (lp - lm) / 2e-5
        worst = max(worst, abs(num - g[name][idx]) / max(abs(num), abs(g[name][idx])))
    shapes_ok = (cnn_shapes() == [(6, 128), (6, 64, 32), (6, 32, 32), (6, 32, 64), (6, 32, 128),
                                  (6, 16, 128), (1, 16, 128)]
                 and forward(p, x).shape == (2, 2))
    el = time.perf_counter() - t
    check(7, acc > 0.95 and worst < 1e-4 and shapes_ok,
          f"held-out accuracy {acc:.3f} (tol >0.95) after {len(model.history)} epochs; "
          f"gradient rel err {worst:.1e} (tol 1e-4); layer shapes {'match' if shapes_ok else 'DIFFER'}",
          el, 300)


class _Population:
    """Ten enrolled users, 20 scored test attempts each (motion + consistency)."""

    def __init__(self, background, motion_model):
        t = time.perf_counter()
        self.speakers = speaker_population(10, seed=11, min_separation=0.3)
        self.profiles, self.tests = [], []
        for u, sp in enumerate(self.speakers):
            vecs = []
            for a in range(25):
                s = 100000 + 1000 * u + a
                sc = make_genuine_scene(4, sp, seed=s, carriers=draw_carriers(s),
                                        body_clutter=bool(a % 2))
                rec = simulate(sc)
                if a < 5:
                    vecs.append(enrollment_vector(rec, sc.carriers, CFG, 4))
                    continue
                _, sig = motion_signal(rec, sc.carriers, CFG)
                kept = gated_fragments(sig, CFG, 4)[1]
                md = verify_motion(motion_model, kept, 4, CFG.motion_threshold)
                self.tests.append((u, md.passed, consistency_vector(kept, CFG) if kept else None))
            self.profiles.append(enroll(f"user{u}", vecs, background))
        self.elapsed = time.perf_counter() - t

    def score(self, u, passed, vec):
        if not passed or vec is None:
            return -np.inf
        return verify_consistency(self.profiles[u], vec).score


@pytest.fixture(scope="module")
def population(background, motion_model):
    return _Population(background, motion_model)


def test_criterion_08_consistency(check, population):
    t = time.perf_counter()
    eers, G, A = [], [], []
    accepted = rejected = 0
    for u in range(10):
        g = [population.score(u, p, v) for w, p, v in population.tests if w == u]
        a = [population.score(u, p, v) for w, p, v in population.tests if w != u]
        eers.append(eer_from_roc(roc_points(g, a)))
        accepted += sum(s > population.profiles[u].threshold for s in a)
        rejected += sum(s <= population.profiles[u].threshold for s in g)
        G += g
        A += a
    auc = auc_trapezoid(roc_points(G, A))
    el = time.perf_counter() - t + population.elapsed
    check(8, max(eers) < 0.10 and auc > 0.95,
          f"per-user EER mean {np.mean(eers):.3f} max {max(eers):.3f} (tol <0.10); "
          f"AUC {auc:.4f} (tol >0.95); FRR {rejected / len(G):.3f}, cross-user FAR "
          f"{accepted / len(A):.3f}", el, 300)


def test_criterion_09_attacks(check, population, motion_model):
    t = time.perf_counter()
    visual = replay = imp_acc = 0
    for i in range(200):
        u = i % 10
        prof = population.profiles[u]
        s = 900000 + i
        sc = make_attack_scene("visual", seed=s, carriers=draw_carriers(s))
        visual += not run_detection(simulate(sc), sc.carriers, prof, motion_model, CFG, 4).final

        s0 = 800000 + i
        old = make_genuine_scene(4, population.speakers[u], seed=s0, carriers=draw_carriers(s0))
        sc = make_attack_scene("replay", seed=s, carriers=draw_carriers(s), prior=simulate(old),
                               prior_carriers=old.carriers)
        replay += not run_detection(simulate(sc), sc.carriers, prof, motion_model, CFG, 4).final

        other = population.speakers[(u + 1 + i // 10 % 9) % 10]
        sc = make_attack_scene("imposter", seed=700000 + i, carriers=draw_carriers(700000 + i),
                               target_params=population.speakers[u], imposter_params=other)
        imp_acc += run_detection(simulate(sc), sc.carriers, prof, motion_model, CFG, 4).final
    el = time.perf_counter() - t
    far = imp_acc / 200
    check(9, visual >= 198 and replay >= 198 and far < 0.10,
          f"visual-only rejected {visual}/200, replay rejected {replay}/200 (tol 198); "
          f"imposter FAR {far:.3f} (tol <0.10)", el, 300)


def test_criterion_10_metric_engine(check):
    t = time.perf_counter()
    rng = np.random.default_rng(10)
    worst_auc = worst_eer = 0.0
    for _ in range(50):
        g = np.round(rng.normal(1, 1, rng.integers(1, 40)), 1)
        a = np.round(rng.normal(0, 1, rng.integers(1, 40)), 1)
        pts = roc_points(g, a)
        pair = np.mean((g[:, None] > a[None, :]) + 0.5 * (g[:, None] == a[None, :]))
        worst_auc = max(worst_auc, abs(auc_trapezoid(pts) - pair))
        # FAR/FRR crossing over every threshold, interpolated linearly
        prev, cross = None, 1.0
        for th in np.r_[np.inf, np.unique(np.r_[g, a])[::-1]]:
            far, frr = np.mean(a >= th), np.mean(g < th)
            if far >= frr:
                if prev is None or far == frr:
                    cross = far
                else:
                    lam = (prev[1] - prev[0]) / ((prev[1] - prev[0]) - (frr - far))
                    cross = prev[0] + lam * (far - prev[0])
                break
            prev = (far, frr)
        worst_eer = max(worst_eer, abs(eer_from_roc(pts) - cross))
    el = time.perf_counter() - t
    check(10, worst_auc < 1e-9 and worst_eer < 1e-9,
          f"max |AUC - pairwise| {worst_auc:.1e}, max |EER - crossing| {worst_eer:.1e} (tol 1e-9)",
          el, 1)


def test_criterion_11_determinism(check, tmp_path, background, motion_model):
    t = time.perf_counter()
    runs = []
    for name in ("a", "b"):
        d = tmp_path / name
        generate_dataset(d, 4, 8, {"genuine": 0.5, "visual-only": 0.25, "replay": 0.125,
                                   "imposter": 0.125}, seed=11, enroll_per_speaker=5)
        outs, rep, _ = evaluate_dataset(d, motion_model, background, CFG)
        runs.append(((d / "manifest.json").read_bytes(), [o.to_dict() for o in outs], rep.to_dict()))
    el = time.perf_counter() - t
    same_manifest = runs[0][0] == runs[1][0]
    same_outcomes = runs[0][1] == runs[1][1] and runs[0][2] == runs[1][2]
    check(11, same_manifest and same_outcomes,
          f"manifests byte-identical: {same_manifest}; outcomes identical: {same_outcomes} "
          f"({len(runs[0][1])} detections)", el, 120)
