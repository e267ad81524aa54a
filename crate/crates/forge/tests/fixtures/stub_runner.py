#!/usr/bin/env python3
"""Scripted stand-in for the runner.

Follows the invocation contract `runner <program_path> --cpu <s> --mem <bytes>`
but never executes the program: the verdict comes from a `# stub: <mode>`
line inside it. Set FORGE_STUB_LOG to append each argv as a JSON line.
"""
import json
import os
import subprocess
import sys
import time


def verdict(status, kind=None, message="", test_tag=None):
    v = {"status": status}
    if kind:
        v["kind"] = kind
    if message:
        v["message"] = message
    if test_tag is not None:
        v["test_tag"] = test_tag
    v["duration_ms"] = 1
    print(json.dumps(v))
    return 0 if status == "pass" else 1


def main(argv):
    if len(argv) != 5 or argv[1] != "--cpu" or argv[3] != "--mem" or not (argv[2].isdigit() and argv[4].isdigit()):
        print("usage: runner <program_path> --cpu <s> --mem <bytes>", file=sys.stderr)
        return 2
    log = os.environ.get("FORGE_STUB_LOG")
    if log:
        with open(log, "a") as f:
            f.write(json.dumps(argv) + "\n")
    with open(argv[0], encoding="utf-8") as f:
        source = f.read()
    mode = "missing"
    for line in source.splitlines():
        if line.startswith("# stub: "):
            mode = line[len("# stub: "):].strip()
            break
    name, _, arg = mode.partition(" ")
    if name == "pass":
        return verdict("pass")
    if name == "syntax":
        return verdict("fail", "compile", "SyntaxError: invalid syntax (program.py, line 1)")
    if name == "assert":
        return verdict("fail", "assertion", "Test 1: Expected 2, got 3", int(arg or "1"))
    if name == "exit":
        return verdict("fail", "system_exit", "SystemExit: 0")
    if name == "error":
        return verdict("fail", "exception", "ZeroDivisionError: division by zero", 0)
    if name == "hang":
        time.sleep(3600)
    if name == "spawn-hang":
        subprocess.Popen(["sleep", "3600"])
        time.sleep(3600)
    if name == "garbage":
        print("this is not a verdict")
        return 0
    if name == "crash":
        print("harness exploded", file=sys.stderr)
        return 2
    if name == "flaky":
        counter = os.environ["FORGE_STUB_COUNTER"]
        seen = os.path.exists(counter)
        open(counter, "a").close()
        if not seen:
            print("{broken")
            return 0
        return verdict("pass")
    return verdict("fail", "exception", "NameError: no stub directive in program")


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
