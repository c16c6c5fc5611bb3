"""Driving the command-line interface end to end in a scratch directory:
synthesize data, train, evaluate, export embeddings, run the baseline and
a small momentum sweep. Each command is what you would type in a shell.
"""

import json
import tempfile
from pathlib import Path

from imvclust.cli import main

tmp = Path(tempfile.mkdtemp(prefix="imvclust-demo-"))
print(f"working in {tmp}\n")

config = tmp / "config.json"
config.write_text(json.dumps({
    "epochs": [10, 8, 6], "batch_size": 64, "latent_dim": 16,
    "prediction_dim": 16, "ae_hidden": [64], "head_hidden": 32,
    "disc_hidden": [64, 32],
}, indent=2))


def run(*argv):
    print("$ imvclust " + " ".join(argv))
    code = main(list(argv))
    print(f"(exit {code})\n")
    assert code == 0


run("synth", "--out", str(tmp / "data"), "--instances", "400",
    "--clusters", "3", "--view-dims", "12,16", "--latent-dim", "6",
    "--seed", "1")

run("train", "--data", str(tmp / "data"), "--out", str(tmp / "run"),
    "--config", str(config), "--mr", "0.5", "--seed", "1")

run("eval", "--checkpoint", str(tmp / "run" / "checkpoint"),
    "--data", str(tmp / "data"), "--out", str(tmp / "eval"), "--seed", "1")

run("baseline", "--data", str(tmp / "data"), "--out", str(tmp / "baseline"),
    "--mr", "0.5", "--seed", "1")

run("export-embeddings", "--checkpoint", str(tmp / "run" / "checkpoint"),
    "--data", str(tmp / "data"), "--out", str(tmp / "embeddings"))

run("sweep", "--data", str(tmp / "data"), "--out", str(tmp / "sweep"),
    "--config", str(config), "--param", "momentum", "--values", "0.0,0.6",
    "--seeds", "1", "--mr", "0.5")

print("artifacts:")
for path in sorted(tmp.rglob("*.csv")):
    print(f"  {path.relative_to(tmp)}")
    for line in path.read_text().strip().splitlines():
        print(f"    {line}")
