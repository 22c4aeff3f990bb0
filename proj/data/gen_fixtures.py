"""Regenerates the numeric fixtures under data/.

zeta_zeros_200.txt  first 200 ordinates of nontrivial zeros of zeta (mpmath)
delta_ap_2000.csv   Ramanujan tau(p) for primes p <= 2000 (weight 12, level 1)
"""
import mpmath
from sympy import primerange, divisor_sigma

def zeros(count=200, path="zeta_zeros_200.txt"):
    mpmath.mp.dps = 30
    with open(path, "w") as f:
        f.write("# ordinates of the first %d nontrivial zeros of zeta(s), beta = 1/2\n" % count)
        for k in range(1, count + 1):
            f.write(mpmath.nstr(mpmath.zetazero(k).imag, 20) + "\n")

def tau(limit=2000, path="delta_ap_2000.csv"):
    # n a_n = -24 sum_{k=1}^{n} sigma(k) a_{n-k}, for prod (1-q^n)^24; tau(n) = a_{n-1}
    sig = [0] + [int(divisor_sigma(k)) for k in range(1, limit + 1)]
    a = [1] + [0] * limit
    for n in range(1, limit + 1):
        s = 0
        for k in range(1, n + 1):
            s += sig[k] * a[n - k]
        a[n] = -24 * s // n
    with open(path, "w") as f:
        f.write("p,a_p\n")
        for p in primerange(2, limit + 1):
            f.write("%d,%d\n" % (p, a[p - 1]))

if __name__ == "__main__":
    zeros()
    tau()
