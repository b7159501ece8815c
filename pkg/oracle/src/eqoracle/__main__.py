"""Line-JSON request/response loop.

Each stdin line is a request: {"original": str, "transformed": str,
"stubs": [[module, api], ...] | null, "timeout": seconds | null}.
Each response line is the TracePair as JSON. A blank line or EOF ends the
session. ``--probe`` prints "ready" and exits (availability check).
"""

from __future__ import annotations

import json
import sys

from .sandbox import DEFAULT_TIMEOUT, check_equivalence


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if "--probe" in argv:
        print("ready")
        return 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            break
        request = json.loads(line)
        stubs = request.get("stubs")
        pair = check_equivalence(
            request["original"],
            request["transformed"],
            [tuple(s) for s in stubs] if stubs is not None else None,
            float(request.get("timeout") or DEFAULT_TIMEOUT),
        )
        print(json.dumps(pair.to_dict()), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
