"""Drives the tlsaudit binary end to end: mock subcommand, scan --json
against the published schema, exit codes."""

import json
import re
import subprocess
import sys
from pathlib import Path

import jsonschema

BIN = Path(sys.argv[1])
ROOT = Path(__file__).resolve().parents[2]
POLICIES = ROOT / "tests" / "fixtures" / "policies"
SCHEMA = json.loads((ROOT / "docs" / "report.schema.json").read_text())

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args, timeout=60):
    return subprocess.run([str(BIN), *args], capture_output=True, text=True, timeout=timeout)


class Mock:
    def __init__(self, policy):
        self.proc = subprocess.Popen(
            [str(BIN), "mock", "--policy", str(POLICIES / f"{policy}.json"), "--port", "0"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        line = self.proc.stdout.readline()
        m = re.match(r"listening on (\S+):(\d+) policy (\S+)", line)
        if not m:
            self.proc.kill()
            raise RuntimeError(f"mock did not start: {line!r} {self.proc.stderr.read()!r}")
        self.target = f"127.0.0.1:{m.group(2)}"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


def text_findings(text):
    pat = re.compile(r"^\[ ?(OK|INFO|WARN|FAIL) ?\] ([A-Z0-9_]+)(?: \(([A-Z_]+)\))?: ")
    return sorted(m.groups("-") for m in map(pat.match, text.splitlines()) if m)


def json_findings(report):
    return sorted((f["severity"], f["rule_id"], f["verdict"] or "-") for f in report["findings"])


EXPECT = {
    "hardened": 0,  # self-signed leaf is a WARN only
    "heartbleed_vulnerable": 2,
    "legacy_sslv2": 2,
    "crime": 2,
    "weak_dh": None,
    "beast": None,
    "anon_null": 2,
}

for policy, code in EXPECT.items():
    with Mock(policy) as m:
        js = run("scan", m.target, "--json", "--sni", "www.example.net")
        tx = run("scan", m.target, "--sni", "www.example.net")
    check(js.returncode in (0, 2), f"{policy}: scan exit {js.returncode}")
    if code is not None:
        check(js.returncode == code, f"{policy}: exit code {js.returncode}")
    report = json.loads(js.stdout)
    try:
        jsonschema.validate(report, SCHEMA)
        check(True, f"{policy}: report validates against schema")
    except jsonschema.ValidationError as e:
        check(False, f"{policy}: schema violation {e.message} at {list(e.path)}")
    check(text_findings(tx.stdout) == json_findings(report), f"{policy}: text and JSON list the same findings")
    has_fail = any(f["severity"] == "FAIL" for f in report["findings"])
    check((js.returncode == 2) == has_fail, f"{policy}: exit 2 iff a FAIL finding")

with Mock("heartbleed_vulnerable") as m:
    r = run("scan", m.target, "--json")
    rep = json.loads(r.stdout)
    hb = [f for f in rep["findings"] if f["rule_id"] == "HEARTBLEED"]
    check(r.returncode == 2 and hb and hb[0]["severity"] == "FAIL", "vulnerable mock: HEARTBLEED FAIL, exit 2")

with Mock("mail_smtp") as m:
    r = run("scan", m.target, "--starttls", "smtp", "--json")
    rep = json.loads(r.stdout)
    check(rep["endpoint"]["starttls"] == "SMTP" and rep["profile"]["versions_supported"], "STARTTLS smtp scan")
    jsonschema.validate(rep, SCHEMA)

with Mock("mail_smtp_no_starttls") as m:
    r = run("scan", m.target, "--starttls", "smtp", "--json")
    rep = json.loads(r.stdout)
    jsonschema.validate(rep, SCHEMA)
    check(r.returncode == 2 and rep["findings"][0]["rule_id"] == "STARTTLS", "refused STARTTLS: exit 2")

r = run("scan", "127.0.0.1:1", "--timeout", "1")
check(r.returncode == 1 and r.stderr, "closed port: exit 1 with a message")

r = run("scan", "127.0.0.1:443", "--frobnicate")
check(r.returncode == 1 and "Usage" in r.stderr and not r.stdout, "unknown flag: usage on stderr, exit 1")

r = run("mock", "--policy", str(POLICIES / "does_not_exist.json"), "--port", "0")
check(r.returncode == 1 and "policy" in r.stderr, "missing policy file: exit 1")

r = run("expand", "ECDH:!RC4:!MD5:!NULL")
check(r.returncode == 0 and r.stdout.strip() and "RC4" not in r.stdout, "expand")

r = run("catalogue")
check(r.returncode == 0 and r.stdout == (ROOT / "docs" / "rule-catalogue.md").read_text(),
      "docs/rule-catalogue.md matches `tlsaudit catalogue`")

if failures:
    print(f"{len(failures)} check(s) failed", file=sys.stderr)
    sys.exit(1)
