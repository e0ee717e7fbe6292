"""Run every CLI config, check the exit code and validate the JSON report."""

import json
import pathlib
import subprocess
import sys

import jsonschema

# config stem -> (subcommand, expected exit code)
CASES = {
    "simulate": ("simulate", 0),
    "simulate-delay": ("simulate", 0),
    "oracle": ("oracle", 0),
    "stability-tv": ("stability", 0),
    "stability-martingale": ("stability", 0),
    "check-certificate": ("check-certificate", 0),
    "check-certificate-fail": ("check-certificate", 1),
    "check-conditions-polynomial": ("check-conditions", 0),
    "check-conditions-delayed": ("check-conditions", 0),
    "check-conditions-exponential": ("check-conditions", None),
    "mollify-inspect": ("mollify-inspect", 0),
}


def main() -> int:
    binary, schema_dir, config_dir, out_root = (pathlib.Path(a) for a in sys.argv[1:5])
    failures = 0
    for stem, (sub, expected) in CASES.items():
        out = out_root / stem
        cmd = [str(binary), sub, "--config", str(config_dir / f"{stem}.cfg"), "--out", str(out), "--threads", "2"]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        problems = []
        if proc.returncode not in (0, 1) or (expected is not None and proc.returncode != expected):
            problems.append(f"exit {proc.returncode}, expected {expected}: {proc.stderr.strip()}")
        report_path = out / f"{sub}.json"
        if report_path.exists():
            schema = json.loads((schema_dir / f"{sub}.schema.json").read_text())
            report = json.loads(report_path.read_text())
            try:
                jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
            except jsonschema.ValidationError as e:
                problems.append(f"schema: {e.message} at {list(e.absolute_path)}")
            if (report["verdict"] == "pass") != (proc.returncode == 0):
                problems.append("verdict disagrees with the exit code")
        else:
            problems.append("no JSON report written")
        status = "ok" if not problems else "FAIL"
        print(f"{status:4} {stem} ({sub}) exit {proc.returncode}")
        for p in problems:
            print(f"     {p}")
        failures += bool(problems)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
