"""Validate every JSON document the CLI prints against the shipped schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

UNBOUNDED = """phases p1 p2
ground g
vsrc V in 0
switch S1 in x phase=p1
switch S2 x out phase=p2
switch S3 y g phase=p2
cap CA x g 1p
cap C out g 1p
memory C
readout out y phase=p1
"""


def run(cli, *args, ok=(0,)):
    p = subprocess.run([cli, *args], capture_output=True, text=True)
    if p.returncode not in ok:
        sys.exit(f"{' '.join(args)}: exit {p.returncode}\n{p.stderr}")
    return json.loads(p.stdout)


def main():
    cli, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    names = [line.split()[0] for line in subprocess.run([cli, "examples"], capture_output=True, text=True,
                                                           check=True).stdout.splitlines() if line.strip()]
    docs = {}
    for n in names:
        docs[f"analyze {n}"] = run(cli, "analyze", f"builtin:{n}", "--periods", "12", "--json")
    with tempfile.TemporaryDirectory() as tmp:
        f = Path(tmp) / "unbounded.scn"
        f.write_text(UNBOUNDED)
        docs["analyze unbounded"] = run(cli, "analyze", str(f), "--periods", "3", "--json")
    docs["simulate"] = run(cli, "simulate", "builtin:passive-lp-a1", "--runs", "20", "--periods", "3", "--json")
    docs["compare"] = run(cli, "compare", "builtin:passive-lp-a1", "--runs", "50", "--periods", "4", "--json",
                          ok=(0, 4))
    docs["gamma sweep"] = run(cli, "compare", "builtin:active-lp", "--gamma-sweep", "0:2:2", "--runs", "4",
                              "--periods", "3", "--json", ok=(0, 4))

    bad = 0
    for what, doc in docs.items():
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        for e in errors[:5]:
            print(f"{what}: {'/'.join(map(str, e.path))}: {e.message}")
        bad += bool(errors)
        print(f"{what}: {'invalid' if errors else 'ok'}")

    # a document with a wrong type must be rejected
    broken = json.loads(json.dumps(docs["analyze passive-lp-a1"]))
    broken["noise"]["rms_ss_v"] = "28.8uV"
    if validator.is_valid(broken):
        print("schema accepted a malformed document")
        bad += 1
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
