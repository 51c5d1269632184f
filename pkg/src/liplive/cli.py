"""Command-line interface.

Every option can also be set through an environment variable
``LIPLIVE_<COMMAND>_<OPTION>`` (upper case, dashes as underscores), e.g.
``LIPLIVE_DETECT_SNR_GATE_DB=8``.  Exit codes: 0 accept, 1 reject, 2 error.
"""
from __future__ import annotations

import dataclasses
import glob as globmod
import json
import sys
from pathlib import Path

import click
import numpy as np

from .audio import read_wav, write_wav
from .carrier import draw_carriers
from .demodulation import DemodConfig
from .features import StftParams
from .harness.pipeline import PipelineConfig
from .segmentation import SegmentationConfig

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2

_GROUPS = (("demod", DemodConfig), ("seg", SegmentationConfig), ("stft", StftParams))
_SCALARS = ("detrend_window_s", "snr_gate_db", "carrier_gate_db", "energy_clip", "feature_len",
            "fusion", "motion_threshold", "consistency_threshold", "pad_short_splice",
            "run_all_stages")


def _option(name: str, default, help_text: str):
    flag = "--" + name.replace("_", "-")
    if isinstance(default, bool):
        return click.option(f"{flag}/--no-{flag[2:]}", name, default=default, show_default=True,
                            help=help_text)
    if isinstance(default, tuple):
        return click.option(flag, name, type=float, nargs=len(default), default=default,
                            show_default=True, help=help_text)
    if default is None:
        return click.option(flag, name, type=float, default=None, help=help_text + " (auto)")
    return click.option(flag, name, type=type(default), default=default, show_default=True,
                        help=help_text)


def config_options(f):
    """Attach one option per pipeline config field."""
    base = PipelineConfig()
    opts = []
    for prefix, cls in _GROUPS:
        for fld in dataclasses.fields(cls):
            opts.append(_option(f"{prefix}_{fld.name}", fld.default, f"{cls.__name__}.{fld.name}"))
    for name in _SCALARS:
        opts.append(_option(name, getattr(base, name), f"PipelineConfig.{name}"))
    for o in reversed(opts):
        f = o(f)
    return f


def build_config(kw: dict) -> PipelineConfig:
    """Pop the config options out of ``kw`` and assemble a PipelineConfig."""
    parts = {}
    for prefix, cls in _GROUPS:
        vals = {fld.name: kw.pop(f"{prefix}_{fld.name}") for fld in dataclasses.fields(cls)}
        parts[prefix] = cls(**vals)
    scal = {name: kw.pop(name) for name in _SCALARS}
    scal["energy_clip"] = tuple(scal["energy_clip"])
    cfg = PipelineConfig(demod=parts["demod"], segmentation=parts["seg"], stft=parts["stft"],
                         **scal)
    cfg.demod.validate()
    cfg.segmentation.validate()
    return cfg


def _fail(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_ERROR)


def _profile_path(profile_dir, user) -> Path:
    return Path(profile_dir) / f"{user}.json"


def _load_profile(profile_dir, user):
    from .verification.profile import UserProfile
    p = _profile_path(profile_dir, user)
    if not p.exists():
        _fail(f"user {user!r} is not enrolled (no {p})")
    return UserProfile.load(p)


def _emit(outcome, as_json: bool):
    if as_json:
        click.echo(json.dumps(outcome.to_dict(), default=float))
    else:
        verdict = "ACCEPT" if outcome.final else "REJECT"
        click.echo(f"{verdict} scenario={outcome.scenario} stage={outcome.stage} "
                   f"motion={outcome.motion_pass} consistency={outcome.consistency_pass}"
                   + (f" error={outcome.error}" if outcome.error else ""))
    return EXIT_ACCEPT if outcome.final else EXIT_REJECT


@click.group(context_settings={"auto_envvar_prefix": "LIPLIVE",
                               "help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main():
    """Acoustic lip-motion liveness detection and scene simulator."""


@main.command()
@click.argument("scene_json", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False),
              help="Output WAV; the sidecar goes next to it with a .json suffix.")
@click.option("--scenario", type=click.Choice(["genuine", "visual"]), default="genuine",
              show_default=True, help="Scene to build when no SCENE_JSON is given.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--passcode-len", type=int, default=4, show_default=True)
@click.option("--body-clutter/--no-body-clutter", default=False, show_default=True)
@click.option("--noise-floor-db", type=float, default=-80.0, show_default=True)
@click.option("--save-scene", type=click.Path(dir_okay=False), default=None,
              help="Also write the scene JSON that was simulated.")
def simulate(scene_json, out, scenario, seed, passcode_len, body_clutter, noise_floor_db,
             save_scene):
    """Render a scene JSON (or a freshly built scene) to WAV + ground-truth sidecar."""
    from .simulator import (Scene, SceneError, ground_truth, make_attack_scene,
                            make_genuine_scene, random_speaker, simulate as render)
    try:
        if scene_json:
            scene = Scene.load(scene_json)
            scene.validate()
        elif scenario == "genuine":
            sp = random_speaker(np.random.default_rng([seed, 0x5E]))
            scene = make_genuine_scene(passcode_len, sp, seed=seed, body_clutter=body_clutter,
                                       noise_floor_db=noise_floor_db)
        else:
            scene = make_attack_scene("visual", seed=seed, noise_floor_db=noise_floor_db)
        rec = render(scene)
    except (SceneError, ValueError, OSError) as exc:
        _fail(str(exc))
    write_wav(out, rec)
    side = ground_truth(scene)
    side["scene"] = scene.to_dict()
    side["passcode_len"] = len(scene.trajectory().segments) if scene.trajectory() else passcode_len
    Path(out).with_suffix(".json").write_text(json.dumps(side, sort_keys=True))
    if save_scene:
        scene.save(save_scene)
    click.echo(f"wrote {out} ({rec.duration_s:.3f} s, carriers {scene.carriers.frequencies_hz})")


@main.command("gen-dataset")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--speakers", type=int, default=10, show_default=True)
@click.option("--attempts", type=int, default=10, show_default=True,
              help="Test attempts per speaker.")
@click.option("--enroll", "enroll_n", type=int, default=5, show_default=True,
              help="Enrollment recordings per speaker.")
@click.option("--mix", default="genuine=1", show_default=True,
              help="Scenario weights, e.g. genuine=0.5,visual-only=0.25,replay=0.25")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--passcode-len", type=int, default=4, show_default=True)
@click.option("--min-separation", type=float, default=0.3, show_default=True)
def gen_dataset(out, speakers, attempts, enroll_n, mix, seed, passcode_len, min_separation):
    """Generate a deterministic dataset directory with a manifest."""
    from .harness.dataset import DatasetError, generate_dataset, parse_mix
    try:
        man = generate_dataset(out, speakers, attempts, parse_mix(mix), seed, passcode_len,
                               enroll_n, min_separation)
    except (DatasetError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(man['recordings'])} recordings to {out}: {man['counts']}")


@main.command()
@click.option("--user", required=True)
@click.option("--recordings", required=True, help="Glob of enrollment WAVs (sidecars give carriers).")
@click.option("--profile-dir", default="profiles", show_default=True, type=click.Path())
@click.option("--background", default=None, type=click.Path(dir_okay=False),
              help="Negative feature vectors (JSON); shipped set by default.")
@click.option("--passcode-len", type=int, default=None)
@click.option("--svm-c", type=float, default=1.0, show_default=True)
@click.option("--svm-degree", type=int, default=3, show_default=True)
@click.option("--cap", type=int, default=100, show_default=True)
@click.option("--threshold", type=float, default=0.0, show_default=True)
@click.option("--class-weight", type=click.Choice(["balanced", "none"]), default="balanced",
              show_default=True)
@config_options
def enroll(user, recordings, profile_dir, background, passcode_len, svm_c, svm_degree, cap,
           threshold, class_weight, **kw):
    """Train a user's consistency profile from >= 5 recordings."""
    from .assets import load_background
    from .harness.evaluation import enroll_from_recordings
    cfg = build_config(kw)
    paths = sorted(globmod.glob(recordings))
    if not paths:
        _fail(f"no recordings match {recordings!r}")
    try:
        prof = enroll_from_recordings(user, paths, load_background(background), cfg, passcode_len,
                                      C=svm_c, degree=svm_degree, cap=cap, threshold=threshold,
                                      class_weight=None if class_weight == "none" else class_weight)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    Path(profile_dir).mkdir(parents=True, exist_ok=True)
    prof.save(_profile_path(profile_dir, user))
    click.echo(f"enrolled {user} from {len(paths)} recordings "
               f"(training accuracy {prof.svm.training_accuracy:.3f})")


def _challenge(seed, recording):
    if seed is not None:
        return draw_carriers(seed)
    from .harness.evaluation import sidecar_carriers
    return sidecar_carriers(recording)


@main.command()
@click.option("--user", required=True)
@click.option("--recording", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None,
              help="Challenge seed of this attempt; carriers come from the sidecar if omitted.")
@click.option("--profile-dir", default="profiles", show_default=True, type=click.Path())
@click.option("--model", default=None, type=click.Path(dir_okay=False),
              help="Motion verifier JSON; shipped model by default.")
@click.option("--passcode-len", type=int, default=4, show_default=True)
@click.option("--update/--no-update", default=False, show_default=True,
              help="Add this attempt to the profile and refit.")
@click.option("--dump-fragments", default=None, type=click.Path(dir_okay=False))
@click.option("--dump-motion", default=None, type=click.Path(dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@config_options
def detect(user, recording, seed, profile_dir, model, passcode_len, update, dump_fragments,
           dump_motion, as_json, **kw):
    """Verify one attempt: exit 0 on accept, 1 on reject, 2 on error."""
    from .assets import load_motion_model
    from .export import write_motion_csv
    from .harness.pipeline import consistency_vector, gated_fragments, motion_signal, run_detection
    from .segmentation import write_fragments_csv
    from .verification.profile import update_profile
    cfg = build_config(kw)
    prof = _load_profile(profile_dir, user)
    try:
        rec = read_wav(recording)
        carriers = _challenge(seed, recording)
        mm = load_motion_model(model)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    outcome = run_detection(rec, carriers, prof, mm, cfg, passcode_len, "unknown")
    if dump_fragments or dump_motion or update:
        _, sig = motion_signal(rec, carriers, cfg)
        frags, kept = gated_fragments(sig, cfg, passcode_len)
        if dump_motion:
            write_motion_csv(dump_motion, sig)
        if dump_fragments:
            write_fragments_csv(dump_fragments, frags)
        if update and kept and outcome.motion_pass:
            update_profile(prof, consistency_vector(kept, cfg), outcome.final).save(
                _profile_path(profile_dir, user))
    code = _emit(outcome, as_json)
    if outcome.error:
        sys.exit(EXIT_ERROR)
    sys.exit(code)


@main.command()
@click.option("--kind", required=True, type=click.Choice(["visual", "replay", "imposter"]))
@click.option("--user", required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Challenge / scene seed.")
@click.option("--prior", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Replay: stored recording of an earlier attempt (its sidecar gives the old carriers).")
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Also write the attack recording here.")
@click.option("--profile-dir", default="profiles", show_default=True, type=click.Path())
@click.option("--model", default=None, type=click.Path(dir_okay=False))
@click.option("--passcode-len", type=int, default=4, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@config_options
def attack(kind, user, seed, prior, out, profile_dir, model, passcode_len, as_json, **kw):
    """Simulate an attack against an enrolled user under a fresh challenge."""
    from .assets import load_motion_model
    from .harness.pipeline import run_detection
    from .simulator import (ConfigurationError, background_speakers, make_attack_scene,
                            make_genuine_scene, random_speaker, simulate as render)
    cfg = build_config(kw)
    prof = _load_profile(profile_dir, user)
    carriers = draw_carriers(seed)
    try:
        if kind == "visual":
            scene = make_attack_scene("visual", seed=seed, carriers=carriers)
        elif kind == "replay":
            if prior is None:
                # no stored attempt given: capture one under an older challenge
                old_seed = seed + 1
                sp = random_speaker(np.random.default_rng([seed, 0x5E]))
                old = make_genuine_scene(passcode_len, sp, seed=old_seed,
                                         carriers=draw_carriers(old_seed))
                prior_rec, prior_c = render(old), old.carriers
            else:
                from .harness.evaluation import sidecar_carriers
                prior_rec, prior_c = read_wav(prior), sidecar_carriers(prior)
            scene = make_attack_scene("replay", seed=seed, carriers=carriers, prior=prior_rec,
                                      prior_carriers=prior_c)
        else:
            imp = background_speakers(1, seed)[0]
            scene = make_attack_scene("imposter", seed=seed, carriers=carriers,
                                      imposter_params=imp, passcode_len=passcode_len)
        rec = render(scene)
        mm = load_motion_model(model)
    except (ConfigurationError, ValueError, OSError) as exc:
        _fail(str(exc))
    if out:
        write_wav(out, rec)
    outcome = run_detection(rec, carriers, prof, mm, cfg, passcode_len, scene.scenario)
    sys.exit(_emit(outcome, as_json))


@main.command("eval")
@click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--report", required=True, type=click.Path(dir_okay=False))
@click.option("--roc-csv", default=None, type=click.Path(dir_okay=False),
              help="ROC points as CSV (default: report path with .roc.csv).")
@click.option("--outcomes", default=None, type=click.Path(dir_okay=False),
              help="Also write every DetectionOutcome as JSON lines.")
@click.option("--model", default=None, type=click.Path(dir_okay=False))
@click.option("--background", default=None, type=click.Path(dir_okay=False))
@click.option("--workers", type=int, default=1, show_default=True)
@config_options
def eval_cmd(dataset, report, roc_csv, outcomes, model, background, workers, **kw):
    """Enroll every user of a dataset and score all test recordings."""
    from .assets import load_background, load_motion_model
    from .harness.evaluation import evaluate_dataset
    from .harness.metrics import MetricError
    cfg = build_config(kw)
    try:
        outs, rep, _ = evaluate_dataset(dataset, load_motion_model(model),
                                        load_background(background), cfg, workers)
    except (MetricError, ValueError, OSError) as exc:
        _fail(str(exc))
    rep.save(report)
    rep.write_roc_csv(roc_csv or str(Path(report).with_suffix("")) + ".roc.csv")
    if outcomes:
        with open(outcomes, "w") as fh:
            for o in outs:
                fh.write(json.dumps(o.to_dict(), default=float) + "\n")
    click.echo(f"auc {rep.auc:.4f} eer {rep.eer:.4f} accuracy {rep.accuracy:.4f} "
               f"far {rep.far:.4f} frr {rep.frr:.4f} counts {rep.counts}")


@main.command("train-motion")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--per-class", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lr", type=float, default=0.001, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True, help="Epoch limit.")
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default="sgd", show_default=True)
@click.option("--target-loss", type=float, default=0.02, show_default=True)
@click.option("--patience", type=int, default=10, show_default=True)
def train_motion(out, per_class, seed, lr, max_iter, batch_size, optimizer, target_loss,
                 patience):
    """Train the motion verifier on simulated lip / non-lip fragments."""
    from .harness.training import lip_fragments, noise_fragments
    from .verification.motion_net import train_motion_verifier
    pos = lip_fragments(per_class, seed + 1)
    neg = noise_fragments(per_class, seed + 2)
    m = train_motion_verifier(pos, neg, lr, max_iter, seed, batch_size, optimizer, target_loss,
                              patience, log=click.echo)
    m.save(out)
    click.echo(f"saved {out}")


@main.command("export-baseband")
@click.option("--recording", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Challenge seed; sidecar carriers if omitted.")
@click.option("--motion", is_flag=True, help="Export the motion signal (ig/qg) instead.")
@config_options
def export_baseband(recording, out, seed, motion, **kw):
    """Dump the demodulated baseband (or motion signal) as CSV."""
    from .demodulation import demodulate
    from .export import write_baseband_csv, write_motion_csv
    from .harness.pipeline import motion_signal
    cfg = build_config(kw)
    try:
        rec = read_wav(recording)
        carriers = _challenge(seed, recording)
        if motion:
            write_motion_csv(out, motion_signal(rec, carriers, cfg)[1])
        else:
            write_baseband_csv(out, demodulate(rec, carriers, cfg.demod))
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--duration", type=float, default=3.0, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the probe WAV here.")
def challenge(seed, duration, out):
    """Draw a fresh carrier challenge (and optionally its probe WAV)."""
    from .carrier import synthesize_probe
    c = draw_carriers(seed)
    if out:
        write_wav(out, synthesize_probe(c, duration))
    click.echo(json.dumps(c.to_dict()))


if __name__ == "__main__":
    main()
