"""Reference values computed without touching the simulator code."""

from scipy.optimize import brentq

# 802.11b long preamble, 11 Mb/s data, 2 Mb/s ACK, 1000-byte payload + 28 bytes MAC.
B_SLOT, B_SIFS, B_DIFS = 20.0, 10.0, 50.0
B_DATA_US = 192 + 748          # ceil(8 * 1028 / 11)
B_ACK_US = 192 + 56            # 14 bytes at 2 Mb/s
B_PAYLOAD_US = 8000 / 11


def bianchi_tau(n, w=32, m=5):
    """Solve the two coupled equations with a root finder on p."""
    def tau_of(p):
        return 2 * (1 - 2 * p) / ((1 - 2 * p) * (w + 1) + p * w * (1 - (2 * p) ** m))

    def residual(p):
        return p - (1 - (1 - tau_of(p)) ** (n - 1))

    p = brentq(residual, 1e-9, 0.999, xtol=1e-14)
    return tau_of(p), p


def bianchi_throughput_b(n):
    tau, _ = bianchi_tau(n)
    ptr = 1 - (1 - tau) ** n
    ps = n * tau * (1 - tau) ** (n - 1) / ptr
    ts = B_DATA_US + B_SIFS + B_ACK_US + B_DIFS
    tc = B_DATA_US + B_DIFS
    return ps * ptr * B_PAYLOAD_US / ((1 - ptr) * B_SLOT + ptr * ps * ts + ptr * (1 - ps) * tc)


# Wired bulk transfer over one 100 Mb/s, 10 us link: 1488-byte chunk frames
# serialize in 120 us, 68-byte control packets in 6 us. The request takes
# 6 + 10 us; the server then keeps the link busy, and the last ack needs
# 10 + 6 + 10 us after the last chunk leaves.
def wired_ftp_completion_us(n_chunks, last_chunk_us=120):
    return 16 + (n_chunks - 1) * 120 + last_chunk_us + 26


# Two-ray crossover for 1.5 m antennas at 2.4 GHz: 4 pi h h / lambda.
CROSSOVER_2_4GHZ_M = 226.4
