"""Command-line entry point.

    ddsp-voxkit <analyze|fit|synth|eval> [--config PATH] [--seed N]
                [--steps N] [--out DIR] positional-paths...

Exit codes: 0 success, 2 input error, 3 contract violation, 4 internal
check failure. DDSP_TEST_F64=1 switches the numeric mode to float64.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .audio_io import WavFormatError, WavUnsupportedError, read_wav, write_wav
from .autodiff import GraphError, ShapeError
from .features import log_mel, write_feat
from .fit import FitConfig, FitArtifacts, eval_report, fit_utterance, render_utterance
from .paramnet import build_cond_features, load_checkpoint, save_checkpoint
from .pitch import extract_f0
from .synth import draw_phase_offsets

# cmd_synth keeps the harmonic branch fixed across --seed values: initial
# oscillator phases come from this constant, only the noise draw varies.
HARMONIC_PHASE_SEED = 0


class ConfigError(ValueError):
    pass


def load_run_config(path, overrides: dict) -> FitConfig:
    """FitConfig from an INI-like [fit] section; unknown keys are rejected."""
    fields = {f.name: f.type for f in dataclasses.fields(FitConfig)}
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section != "fit":
                raise ConfigError(f"unknown config section '{section}'")
        if parser.has_section("fit"):
            for key, raw in parser.items("fit"):
                if key not in fields:
                    raise ConfigError(f"unknown config key '{key}'")
                caster = int if fields[key] == "int" else float
                try:
                    values[key] = caster(raw)
                except ValueError:
                    raise ConfigError(f"config key '{key}': bad value '{raw}'")
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    try:
        return FitConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _format_float(x: float) -> str:
    return repr(float(x))


def cmd_analyze(args) -> int:
    audio = read_wav(args.paths[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mel = log_mel(audio)
    contour = extract_f0(audio)
    write_feat(out / "mel.feat", mel.values)
    write_feat(
        out / "f0.feat",
        np.stack([contour.f0_hz, contour.voiced.astype(np.float64)], axis=1),
    )
    print(f"frames={mel.frames}")
    return 0


def cmd_fit(args) -> int:
    config = load_run_config(args.config, {"seed": args.seed, "steps": args.steps})
    audio = read_wav(args.paths[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    artifacts = FitArtifacts()
    weights, history = fit_utterance(audio, config, artifacts=artifacts)

    save_checkpoint(out / "weights.ckpt", weights)
    with open(out / "loss.csv", "w") as fh:
        for step, loss in enumerate(history):
            fh.write(f"{step},{_format_float(loss)}\n")
    rendered = render_utterance(
        weights,
        artifacts.cond,
        artifacts.contour,
        artifacts.phase_offsets,
        noise_seed=config.seed,
    )
    write_wav(out / "y_dsp.wav", rendered)
    if history:
        print(f"final_loss={_format_float(history[-1])}")
    print(f"steps={len(history)}")
    return 0


def cmd_synth(args) -> int:
    weights = load_checkpoint(args.paths[0])
    audio = read_wav(args.paths[1])
    mel = log_mel(audio)
    contour = extract_f0(audio)
    cond = build_cond_features(mel, contour)
    rendered = render_utterance(
        weights,
        cond,
        contour,
        phase_offsets=draw_phase_offsets(HARMONIC_PHASE_SEED),
        noise_seed=args.seed if args.seed is not None else 0,
    )
    write_wav(args.paths[2], rendered)
    print(f"samples={len(rendered)}")
    return 0


def cmd_eval(args) -> int:
    ref = read_wav(args.paths[0])
    hyp = read_wav(args.paths[1])
    report = eval_report(ref, hyp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for key in ("mel_l1", "f0_pcc", "voicing_agreement"):
        value = report[key]
        lines.append(f"{key}={'undefined' if value is None else _format_float(value)}")
    (out / "metrics.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddsp-voxkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, runner, n_paths, help_text in (
        ("analyze", cmd_analyze, 1, "extract mel and f0 features from a WAV"),
        ("fit", cmd_fit, 1, "fit synthesizer parameters to a WAV"),
        ("synth", cmd_synth, 3, "render from a checkpoint: CKPT IN.wav OUT.wav"),
        ("eval", cmd_eval, 2, "score a rendering against a reference"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--out", default=".")
        p.add_argument("paths", nargs=n_paths)
        p.set_defaults(runner=runner)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.runner(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WavFormatError, WavUnsupportedError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (GraphError, FloatingPointError) as exc:
        print(f"internal check failed: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
