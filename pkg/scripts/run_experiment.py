#!/usr/bin/env python3
"""Run the full pipeline for one task: data, training, evaluation, one explanation.

Everything goes through the installed CLI, so the artifacts in the work
directory are exactly what a user would produce by hand:

    python3 scripts/run_experiment.py --task keyword --workdir runs/kw
"""

import argparse
import json
import sys
from pathlib import Path

from latentexplain.cli import main as cli


def run(args):
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    cfg = {
        "schema_version": 1,
        "paths": {
            "data_dir": str(work / "data"),
            "checkpoint_dir": str(work / "checkpoints"),
            "report_dir": str(work / "reports"),
        },
        "dataset": {"task": args.task, "seed": args.seed},
        "codec": {"epochs": args.codec_epochs},
        "classifier": {"epochs": args.classifier_epochs},
    }
    if args.task == "emotion":
        cfg["dataset"].update({"num_classes": 5, "clips_per_class": 100})
    cfg_path = work / "run.json"
    cfg_path.write_text(json.dumps(cfg, indent=1))

    steps = [
        ["synth-data"],
        ["train-codec"],
        ["train-classifier"],
        ["eval-fidelity", "--methods", args.methods, "--jobs", str(args.jobs)],
        ["eval-drop", "--methods", args.methods, "--jobs", str(args.jobs)],
    ]
    if args.task == "emotion":
        steps.append(["confusion", "--beta", "0.1"])
    for step in steps:
        print(f"==> latentexplain {' '.join(step)}")
        code = cli(["--config", str(cfg_path)] + step)
        if code != 0:
            return code

    clip = sorted((work / "data" / "clips").glob("*.wav"))[0]
    out = work / "explanation.wav"
    code = cli(["--config", str(cfg_path), "explain", "--input", str(clip),
                "--alpha", str(args.alpha), "--out", str(out)])
    if code == 0:
        print(f"done; listen to {out}")
    return code


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--task", choices=["keyword", "emotion"], default="keyword")
    p.add_argument("--workdir", default="runs/keyword")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--codec-epochs", type=int, default=30)
    p.add_argument("--classifier-epochs", type=int, default=150)
    p.add_argument("--methods", default="latent-ig,random-latent")
    p.add_argument("--jobs", type=int, default=4)
    sys.exit(run(p.parse_args()))
