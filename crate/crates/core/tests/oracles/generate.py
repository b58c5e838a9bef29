"""Independent high-precision reference values for tests/oracles.rs.

Run with `python3 generate.py`; the printed values are pasted into the test
file as frozen constants.
"""
import mpmath as mp

mp.mp.dps = 50

G = mp.mpf("6.67384e-11")
C = mp.mpf("299792458")
MSUN = mp.mpf("1.98892e30")
TPM = G / C**3
MC_LOW = mp.mpf("2.611651689888372")
MC_HIGH = mp.mpf("26.11651689888372")
F_HIGH = mp.mpf("366.3383434841933")


def spa(mc, f):
    v = mp.pi * TPM * f * mc
    phase = -mp.pi / 4 + mp.mpf(3) / 128 * v ** (-mp.mpf(5) / 3)
    return f ** (-mp.mpf(7) / 6) * mp.expj(phase)


def psd(f):
    y = f / 150
    return mp.mpf("9e-46") * ((mp.mpf("4.49") * y) ** -56 + mp.mpf("0.16") * y ** mp.mpf("-4.52") + mp.mpf("0.52") + mp.mpf("0.32") * y**2)


def cycles(mc, fmin, fmax):
    pre = (TPM * mc) ** (-mp.mpf(5) / 3) / (32 * mp.pi ** (mp.mpf(8) / 3))
    return pre * (fmin ** (-mp.mpf(5) / 3) - fmax ** (-mp.mpf(5) / 3))


def show(name, value):
    print(f"{name} = {mp.nstr(value, 20)}")


h = spa(10 * MSUN, mp.mpf(100))
show("spa_10_100_re", h.real)
show("spa_10_100_im", h.imag)
show("psd_40", psd(mp.mpf(40)))
show("psd_150", psd(mp.mpf(150)))
show("cycles_low", cycles(MC_LOW * MSUN, mp.mpf(40), F_HIGH))
show("cycles_high", cycles(MC_HIGH * MSUN, mp.mpf(40), F_HIGH))
a, b = MC_LOW * MSUN, MC_HIGH * MSUN
show("training_1500_of_3000", a * (b / a) ** (mp.mpf(1500) / 2999))

# largest Gauss-Legendre node and weight for 400 points
def legendre_and_derivative(n, t):
    p0, p1 = mp.mpf(1), t
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * t * p1 - (k - 1) * p0) / k
    return p1, n * (t * p1 - p0) / (t**2 - 1)


n = 400
x = mp.cos(mp.pi * (1 - mp.mpf(1) / 4) / (n + mp.mpf(1) / 2))
for _ in range(100):
    p, dp = legendre_and_derivative(n, x)
    x -= p / dp
p, dp = legendre_and_derivative(n, x)
show("gl400_node", x)
show("gl400_weight", 2 / ((1 - x**2) * dp**2))

# inverse-distance integrals
eps = mp.mpf("0.1")
show("inv_dist_1d_0.05", mp.quad(lambda t: 1 / mp.sqrt((t - mp.mpf("0.05")) ** 2 + eps**2), [-1, mp.mpf("0.05"), 1]))
mp.mp.dps = 25
mu1, mu2 = mp.mpf("0.03"), mp.mpf("-0.07")
show(
    "inv_dist_2d",
    mp.quad(lambda y: mp.quad(lambda t: 1 / mp.sqrt((t - mu1) ** 2 + (y - mu2) ** 2 + eps**2), [-1, mu1, 1]), [-1, mu2, 1]),
)
mp.mp.dps = 50

# spectral norm of a fixed complex matrix
A = mp.matrix([[mp.mpc(1, 2), mp.mpc(-0.5, 0), mp.mpc(0, 3)],
               [mp.mpc(2, -1), mp.mpc(4, 0.5), mp.mpc(-1, -1)],
               [mp.mpc(0, 0), mp.mpc(1.5, 2), mp.mpc(0.25, 0)],
               [mp.mpc(-3, 0), mp.mpc(0, -2), mp.mpc(1, 1)]])
show("matrix_two_norm", max(mp.svd_c(A, compute_uv=False)))
