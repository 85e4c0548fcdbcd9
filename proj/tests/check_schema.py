"""Runs the CLI on small inputs and validates every result.json against docs/result.schema.json."""
import json
import pathlib
import random
import subprocess
import sys
import tempfile

import jsonschema

cli, schema_path = sys.argv[1], sys.argv[2]
schema = json.loads(pathlib.Path(schema_path).read_text())
validator = jsonschema.Draft202012Validator(schema)

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    rng = random.Random(7)
    rows = ["y,x,w,g"]
    for i in range(40):
        g = "abc"[i % 3]
        x, w = rng.gauss(0, 1), rng.random()
        rows.append(f"{x + w + (g == 'b') + rng.gauss(0, 1):.5f},{x:.5f},{w:.5f},{g}")
    (tmp / "d.csv").write_text("\n".join(rows) + "\n")
    curves = ["c1,c2,c3"] + [",".join(f"{rng.gauss(0, 1):.6f}" for _ in range(3)) for _ in range(30)]
    (tmp / "c.csv").write_text("\n".join(curves) + "\n")

    runs = []
    for strategy in ["fl", "flplus", "rl", "rls", "rq"]:
        runs.append(["test", "--data", str(tmp / "d.csv"), "--response", "y", "--interesting", "x,g",
                     "--nuisance", "w", "--categorical", "g", "--strategy", strategy, "--nperm", "19",
                     "--taus", "5@0.1:0.9"])
    runs.append(["test", "--data", str(tmp / "d.csv"), "--response", "y", "--interesting", "x",
                 "--nuisance", "g", "--categorical", "g", "--strategy", "wn", "--nperm", "39", "--measure", "area"])
    runs.append(["envelope", "--curves", str(tmp / "c.csv")])
    runs.append(["envelope", "--curves", str(tmp / "c.csv"), "--measure", "area", "--alpha", "0.1"])

    for k, args in enumerate(runs):
        out = tmp / f"out{k}"
        subprocess.run([cli, *args, "--out", str(out)], check=True)
        doc = json.loads((out / "result.json").read_text())
        errors = list(validator.iter_errors(doc))
        for e in errors:
            print(f"{args[0]} {k}: {e.message} at {list(e.path)}")
        if errors:
            sys.exit(1)
        manifest = json.loads((out / "manifest.json").read_text())
        assert "started_at" in manifest and manifest["outputs"][0] == "result.json"
    print(f"{len(runs)} result files validate")
