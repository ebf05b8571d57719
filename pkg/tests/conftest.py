import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

SMALL = """
[simulation]
duration = 8
seed = 5
phy = B

[channel 1]
frequency_ghz = 2.4

[channel 2]
frequency_ghz = 2.41
medium = wired

[node 1]
position = 0, 0
mask = 01
waypoints = 5, 0 @ 1
move_start = 1

[node 2]
position = 30, 0
mask = 01

[node 3]
position = 40, 0
mask = 01

[node 9]
position = 35, 5
mask = 001

[link 2-9]

[sip]
proxy = 9
register_at = 0.1
bye_at = 6.5

[flow call]
kind = voip
src = 1
dst = 3
invite_at = 1
ring_delay = 0.5
initiator_spurts = 0-2, 3-4
receiver_spurts = 2-3

[flow bulk]
kind = ftp
src = 3
dst = 2
start = 0.5
item_bytes = 300000

[flow tone]
kind = cbr
src = 2
dst = 1
start = 1
stop = 5
"""

# Acceptance verdict lines, printed together at the end of the session.
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
