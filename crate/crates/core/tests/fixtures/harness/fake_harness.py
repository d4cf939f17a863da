"""Scripted harness double: behaviour chosen by argv[1]."""
import json
import sys
import time

job = json.loads(sys.stdin.read())
behaviour = sys.argv[1]

if behaviour == "echo":
    passed = "assert 1 == 2" not in job["program"]
    kind = "none" if passed else "assertion"
    print(json.dumps({"passed": passed, "error_kind": kind, "detail": job["mode"], "duration_ms": int(job["memory_cap_mb"])}))
elif behaviour == "capitalized":
    print(json.dumps({"passed": False, "error_kind": "Timeout", "detail": "", "duration_ms": 1}))
elif behaviour == "infra":
    print(json.dumps({"infra_error": "could not create temp dir"}))
elif behaviour == "crash":
    sys.stderr.write("Traceback: harness exploded\n")
    sys.exit(3)
elif behaviour == "garbage":
    print("hello")
elif behaviour == "inconsistent":
    print(json.dumps({"passed": True, "error_kind": "assertion", "detail": "", "duration_ms": 1}))
elif behaviour == "hang":
    time.sleep(60)
