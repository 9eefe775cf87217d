"""Regenerates the frozen oracle fixtures with 50-digit mpmath arithmetic.

    python3 make_oracles.py
"""
import json
import random

import mpmath

mpmath.mp.dps = 50
R = mpmath.mpf("6371.0088")


def jsd(p, q):
    p = [mpmath.mpf(x) for x in p]
    q = [mpmath.mpf(x) for x in q]
    m = [(a + b) / 2 for a, b in zip(p, q)]

    def kl(a, b):
        return mpmath.fsum(x * mpmath.log(x / y, 2) for x, y in zip(a, b) if x > 0)

    return kl(p, m) / 2 + kl(q, m) / 2


def haversine(lat1, lon1, lat2, lon2):
    rad = mpmath.pi / 180
    p1, p2 = mpmath.mpf(lat1) * rad, mpmath.mpf(lat2) * rad
    dlat = p2 - p1
    dlon = (mpmath.mpf(lon2) - mpmath.mpf(lon1)) * rad
    h = mpmath.sin(dlat / 2) ** 2 + mpmath.cos(p1) * mpmath.cos(p2) * mpmath.sin(dlon / 2) ** 2
    return 2 * R * mpmath.asin(mpmath.sqrt(h))


def random_distribution(rng, n):
    w = [rng.random() if rng.random() > 0.25 else 0.0 for _ in range(n)]
    if sum(w) == 0:
        w[rng.randrange(n)] = 1.0
    total = sum(w)
    return [x / total for x in w]


def main():
    rng = random.Random(20191012)
    pairs = []
    for _ in range(100):
        n = rng.randint(2, 60)
        p, q = random_distribution(rng, n), random_distribution(rng, n)
        pairs.append({"p": p, "q": q, "jsd": float(jsd(p, q))})
    with open("jsd_oracle.json", "w") as f:
        json.dump(pairs, f)

    points = []
    for i in range(1000):
        if i < 800:
            a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        else:
            # city-scale pairs around Tokyo
            a = (rng.uniform(35.0, 36.0), rng.uniform(139.0, 140.5))
            b = (a[0] + rng.uniform(-0.2, 0.2), a[1] + rng.uniform(-0.2, 0.2))
        points.append({"a": a, "b": b, "km": float(haversine(a[0], a[1], b[0], b[1]))})
    with open("haversine_oracle.json", "w") as f:
        json.dump(points, f)


if __name__ == "__main__":
    main()
