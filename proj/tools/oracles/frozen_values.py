#!/usr/bin/env python3
# Copyright 2026 The gp-sbc Authors.
# SPDX-License-Identifier: Apache-2.0
"""Independent reference values for the unit tests.

Everything here is computed with numpy/scipy (or plain Python integer
arithmetic for Philox) and printed; the tests freeze the printed numbers.
Rerun after changing a case and paste the new output.
"""
import math

import numpy as np
from scipy import stats

M32 = 0xFFFFFFFF


def philox4x32_10(ctr, key):
    c = list(ctr)
    k0, k1 = key
    for _ in range(10):
        p0 = 0xD2511F53 * c[0]
        p1 = 0xCD9E8D57 * c[2]
        c = [(p1 >> 32) ^ c[1] ^ k0, p1 & M32, (p0 >> 32) ^ c[3] ^ k1, p0 & M32]
        k0 = (k0 + 0x9E3779B9) & M32
        k1 = (k1 + 0xBB67AE85) & M32
    return c


def se(a, b, s2, ls):
    d = (a[:, None, :] - b[None, :, :]) / np.asarray(ls)
    return s2 * np.exp(-0.5 * (d ** 2).sum(-1))


def main():
    print("# philox")
    for ctr, key in [((0, 0, 0, 0), (0, 0)),
                     ((M32,) * 4, (M32, M32)),
                     ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0))]:
        print([hex(v) for v in philox4x32_10(ctr, key)])

    print("# chi-square upper tail")
    for stat, dof in [(4.605, 2), (95.55, 100), (143.38, 100), (10.0, 3), (0.5, 7), (250.0, 100), (30.0, 19)]:
        print(stat, dof, repr(float(stats.chi2.sf(stat, dof))))

    print("# rebin L=100 B=20 bin sizes")
    sizes = [0] * 20
    for r in range(101):
        sizes[r * 20 // 101] += 1
    print(sizes)

    print("# valley score of (r - 50)^2, 101 bins: outer 10 per side, central bins 40..60")
    counts = [(r - 50) ** 2 for r in range(101)]
    outer = counts[:10] + counts[-10:]
    central = counts[40:61]
    print(repr((sum(outer) / len(outer)) / (sum(central) / len(central))))

    print("# sparse predictive, SE(1.3, 0.7), noise 0.2, single output")
    x = np.array([[0.0], [0.4], [0.9], [1.5], [2.2], [3.0]])
    y = np.array([0.3, -0.2, 0.8, 1.1, -0.4, 0.5])
    z = np.array([[0.2], [1.4], [2.6]])
    xs = np.array([[0.7], [2.0]])
    s2, ls, nv = 1.3, [0.7], 0.2
    kuu = se(z, z, s2, ls)
    kuf = se(z, x, s2, ls)
    kus = se(z, xs, s2, ls)
    kss = se(xs, xs, s2, ls)
    sigma = np.linalg.inv(kuu + kuf @ kuf.T / nv)
    mean = kus.T @ sigma @ kuf @ y / nv
    cov = kss - kus.T @ np.linalg.solve(kuu, kus) + kus.T @ sigma @ kus
    print("mean", [repr(float(v)) for v in mean])
    print("cov", [repr(float(v)) for v in cov.ravel()])

    print("# exact predictive and log evidence on the same data")
    kff = se(x, x, s2, ls) + nv * np.eye(len(x))
    kfs = se(x, xs, s2, ls)
    print("mean", [repr(float(v)) for v in kfs.T @ np.linalg.solve(kff, y)])
    print("cov", [repr(float(v)) for v in (kss - kfs.T @ np.linalg.solve(kff, kfs)).ravel()])
    _, logdet = np.linalg.slogdet(kff)
    print("lml", repr(float(-0.5 * y @ np.linalg.solve(kff, y) - 0.5 * logdet - 0.5 * len(x) * math.log(2 * math.pi))))

    print("# 99% binomial band quantiles (tail 0.005)")
    for trials, prob in [(4000, 1 / 101), (1000, 0.05)]:
        print(trials, prob, int(stats.binom.ppf(0.005, trials, prob)), int(stats.binom.ppf(0.995, trials, prob)))


if __name__ == "__main__":
    main()
