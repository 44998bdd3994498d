#!/usr/bin/env python3
"""Integer-expression provider mirroring the built-in renderer exactly."""
import json
import re
import sys

INT_RE = re.compile(r"[+-]?[0-9]+")


class EvalFailure(Exception):
    pass


def send(msg):
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


def recv():
    line = sys.stdin.readline()
    if not line:
        sys.exit(0)
    return json.loads(line)


def call_host(rid, op, payload):
    send({"type": "callback", "id": rid, "op": op, "payload": payload})
    reply = recv()
    if reply.get("type") != "callback-result" or reply.get("id") != rid:
        raise EvalFailure("host sent a mismatched callback reply")
    if not reply.get("ok"):
        raise EvalFailure(reply.get("error", "callback failed"))
    return reply["value"]


def main():
    send({"type": "handshake", "protocol": 1})
    while True:
        req = recv()
        if req.get("type") != "request":
            continue
        rid = req["id"]
        try:
            value = call_host(rid, "eval", {"expr": req["args"][0]})
            text = value.strip()
            if not INT_RE.fullmatch(text):
                raise EvalFailure("non-integer value %r" % value)
            rendered = str(int(text))
            send(
                {
                    "type": "response",
                    "id": rid,
                    "fragments": {"html": rendered, "tex": rendered},
                    "cache": True,
                }
            )
        except EvalFailure as exc:
            send({"type": "error", "id": rid, "message": str(exc)})


if __name__ == "__main__":
    main()
