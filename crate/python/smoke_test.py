"""Builds the extension module with cargo and exercises it from Python.

Usage: python3 python/smoke_test.py [--no-build]
"""

import json
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_module(dest: Path) -> None:
    cmd = ["cargo", "build", "--release", "-p", "gradecast-py", "--features", "extension-module"]
    if "--no-build" not in sys.argv:
        subprocess.run(cmd, cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libgradecast_py.so"
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, dest / f"gradecast_py{suffix}")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        build_module(tmp)
        sys.path.insert(0, str(tmp))
        import gradecast_py as g

        p = g.SystemParams(7, 2, 1)
        assert (p.n, p.t, p.f, p.quorum(), p.weak_quorum()) == (7, 2, 1, 5, 3), p
        try:
            g.SystemParams(3, 1)
        except ValueError:
            pass
        else:
            raise AssertionError("n = 3t accepted")

        scenario = {
            "name": "py-smoke",
            "n": 7,
            "t": 2,
            "f": 2,
            "protocol": "consensus",
            "inputs": {"pattern": "split"},
            "adversary": "lie-rationing",
        }
        report = g.run_scenario(json.dumps(scenario))
        assert report.passed, report.text()
        summary = json.loads(report.json())["summary"]
        assert len(set(summary["decisions"].values())) == 1, summary["decisions"]
        files = report.write_artifacts(str(tmp / "out"))
        assert any(str(f).endswith("trace.csv") for f in files), files

        approx = dict(scenario, protocol="approx", epsilon="auto", inputs={"pattern": "spread"})
        assert g.run_scenario(json.dumps(approx)).passed

        try:
            g.run_scenario('{"n": 4}')
        except ValueError:
            pass
        else:
            raise AssertionError("incomplete scenario accepted")

        csv = g.sweep_csv(json.dumps({"t": 1, "protocol": "consensus"}), ["n=4,7", "f=0,1"])
        assert len(csv.strip().splitlines()) == 5, csv

        verdict = json.loads(g.oracle(4, 1, 2, "weak-break", [[0, 1, 1]]))
        assert any(v["property"] == "agreement" for v in verdict["violations"]), verdict
        assert json.loads(g.gradecast_oracle(4, 1, 1))["violations"] == 0
        assert g.UNSYNC_TICK_CONSTANT == 22

    print("python smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
